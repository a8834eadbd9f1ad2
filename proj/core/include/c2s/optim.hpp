#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "c2s/tensor.hpp"

namespace c2s {

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

struct AdamOptions {
  float learning_rate = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

/// Moment accumulators for a fixed, ordered parameter list.
struct AdamState {
  AdamOptions options;
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;
  std::uint64_t step = 0;

  static AdamState create(std::span<const NamedParameter> params, AdamOptions options = {});
};

/// One bias-corrected Adam update of every parameter from its gradient.
/// Throws if a parameter has no gradient; the message names it.
void adam_step(std::span<NamedParameter> params, AdamState& state);

void zero_grads(std::span<NamedParameter> params);

}  // namespace c2s
