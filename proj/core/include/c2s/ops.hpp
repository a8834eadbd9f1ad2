#pragma once

#include <cstdint>
#include <vector>

#include "c2s/tensor.hpp"

namespace c2s {

enum class Mode { train, eval };

/// Causal dilated 1-d convolution along the last (time) axis.
///
/// input is [C_in x T] or [N x C_in x T], weight [C_out x C_in x K], bias
/// [C_out] or undefined. The input is left-padded with (K-1)*dilation zeros so
/// the output keeps length T and frame t only sees frames <= t:
///
///   out[c, t] = bias[c] + sum_{i,k} weight[c, i, k] * in[i, t - (K-1-k)*dilation]
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, int dilation = 1);

/// tanh(conv1d(x, filter)) * sigmoid(conv1d(x, gate)).
Tensor gated_unit(const Tensor& x, const Tensor& filter_weight, const Tensor& filter_bias,
                  const Tensor& gate_weight, const Tensor& gate_bias, int dilation);

struct BatchNormState {
  Tensor gamma;  // [C], trainable
  Tensor beta;   // [C], trainable
  std::vector<float> running_mean;
  std::vector<float> running_var;
  float momentum = 0.9f;  // running = momentum * running + (1 - momentum) * batch
  float epsilon = 1e-5f;

  static BatchNormState create(std::size_t channels, float momentum = 0.9f, float epsilon = 1e-5f);
};

/// Per-channel normalization of [N x C x T] (or [C x T]) input. Train mode
/// normalizes with batch statistics over N and T and updates the running
/// statistics; eval mode applies the running statistics.
Tensor batchnorm1d(const Tensor& x, BatchNormState& state, Mode mode);

/// Inverted dropout. The mask is a pure function of `seed`.
Tensor dropout(const Tensor& x, float rate, Mode mode, std::uint64_t seed);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float factor);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sum(const Tensor& x);

/// Frames [start, start + length) of the last axis.
Tensor slice_time(const Tensor& x, std::size_t start, std::size_t length);

/// Mean of squared differences over all elements; differentiable in both arguments.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

}  // namespace c2s
