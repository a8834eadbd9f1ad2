#pragma once

#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "c2s/ops.hpp"
#include "c2s/optim.hpp"
#include "c2s/tensor.hpp"

namespace c2s {

enum class Variant { linear, resnet, wavenet };

std::string to_string(Variant v);
Variant parse_variant(std::string_view name);

struct WaveNetConfig {
  std::size_t initial_filter = 32;
  std::size_t initial_features = 16;  // residual channel width
  std::size_t dilated_filter = 2;
  std::size_t dilated_features = 32;  // gated unit width
  std::size_t residual_filter = 1;
  std::size_t residual_features = 16;
  std::size_t skip_filter = 1;
  std::size_t skip_features = 32;
  std::size_t post_features = 32;
  std::vector<int> dilations{1, 2, 4, 8, 16, 1, 2, 4, 8, 16};
};

struct ResNetConfig {
  std::size_t blocks = 8;
  std::size_t filter = 4;
  std::size_t features = 32;
};

struct LinearConfig {
  std::size_t filter = 124;
};

struct ModelConfig {
  Variant variant = Variant::wavenet;
  std::size_t in_channels = 64;
  std::size_t out_channels = 32;
  WaveNetConfig wavenet;
  ResNetConfig resnet;
  LinearConfig linear;
  float dropout = 0.2f;
  float bn_momentum = 0.9f;
  float bn_epsilon = 1e-5f;

  static ModelConfig defaults(Variant variant);
  void validate() const;
};

nlohmann::json to_json(const ModelConfig& config);
/// Strict parse: unknown keys and wrong types raise ConfigError naming the JSON pointer.
ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& pointer = "");

/// Frames of input that influence one output frame: 1 + sum over the longest
/// serial chain of (K - 1) * dilation.
std::size_t receptive_field(const ModelConfig& config);

/// Trainable parameters: conv weights and biases plus batch-norm scale and shift.
std::size_t count_params(const ModelConfig& config);

struct Conv1dLayer {
  std::string name;
  Tensor weight;  // [C_out x C_in x K]
  Tensor bias;    // [C_out]
  int dilation = 1;

  Tensor forward(const Tensor& x) const { return conv1d(x, weight, bias, dilation); }
};

struct NormLayer {
  std::string name;
  BatchNormState state;
};

struct LayerInfo {
  std::string name;
  std::string kind;
  Shape shape;
  int dilation = 1;
  std::size_t params = 0;
};

/// Values of every persistent tensor, used for early-stopping restore.
struct ModelSnapshot {
  std::vector<std::vector<float>> tensors;
};

/// One of the three decoder architectures mapping [64 x T] (or [N x 64 x T])
/// envelopes to [32 x T] spectrogram frames.
class Model {
 public:
  static Model build(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  /// dropout_seed drives every dropout mask in train mode.
  Tensor forward(const Tensor& x, Mode mode, std::uint64_t dropout_seed = 0);

  /// Trainable tensors in a stable order, named "<layer>.<weight|bias|gamma|beta>".
  std::vector<NamedParameter> parameters();
  std::size_t parameter_count() const;

  /// Parameters plus batch-norm running statistics ("<norm>.running_mean"/"running_var").
  std::map<std::string, Tensor> state() const;
  /// Replaces all persistent tensors; throws FormatError naming the first missing or mis-shaped tensor.
  void load_state(const std::map<std::string, Tensor>& tensors);

  ModelSnapshot snapshot() const;
  void restore(const ModelSnapshot& snapshot);

  std::vector<LayerInfo> layers() const;

  std::vector<Conv1dLayer>& convs() { return convs_; }
  std::vector<NormLayer>& norms() { return norms_; }

 private:
  Tensor forward_linear(const Tensor& x);
  Tensor forward_resnet(const Tensor& x, Mode mode, std::uint64_t seed);
  Tensor forward_wavenet(const Tensor& x, Mode mode, std::uint64_t seed);

  ModelConfig config_;
  std::vector<Conv1dLayer> convs_;
  std::vector<NormLayer> norms_;
};

}  // namespace c2s
