#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "c2s/dataset.hpp"
#include "c2s/metrics.hpp"
#include "c2s/model.hpp"

namespace c2s {

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  float learning_rate = 1e-3f;
  std::optional<float> dropout;  // overrides the model config when set
  std::uint64_t seed = 0;
  std::size_t fold = 0;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& pointer = "");

/// Normalized streams plus the window offsets to draw from.
struct TrainData {
  Tensor ecog;  // E x T
  Tensor spec;  // B x T
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::size_t length = 100;
  std::size_t context = 0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
};

/// Mini-batch Adam on window MSE with validation early stopping; the model
/// ends holding the parameters of the best validation epoch. Throws
/// NumericError naming the epoch and batch if the loss stops being finite.
TrainResult train(Model& model, const TrainData& data, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Eval-mode predictions for windows at `offsets`, cropped to the target frames: [N x B x length].
Tensor predict_windows(Model& model, const Tensor& ecog, std::span<const std::size_t> offsets, std::size_t length,
                       std::size_t context);

/// Mean window MSE in eval mode.
double window_loss(Model& model, const Tensor& ecog, const Tensor& spec, std::span<const std::size_t> offsets,
                   std::size_t length, std::size_t context);

/// MSE over all test elements and per-band correlation over the concatenated
/// test windows; per-word scores when `annotations` lists the source utterance of each window.
EvalReport evaluate(Model& model, const Tensor& ecog, const Tensor& spec, std::span<const std::size_t> offsets,
                    std::size_t length, std::size_t context, std::span<const WordAnnotation> annotations = {});

struct FoldOutcome {
  std::size_t fold = 0;
  bool ok = false;
  std::string error;
  std::string error_kind;  // see c2s::error_kind
  EvalReport report;
  std::optional<Model> model;
  NormStats norm;
  float probe_amplitude = 0.0f;
  TrainResult training;
};

struct FoldSetup {
  FoldWindows windows;
  NormStats norm;
  PairedRecording normalized;
  float probe_amplitude = 0.0f;
};

/// Windows, training-only normalization and probe amplitude for one fold.
FoldSetup prepare_fold(const PairedRecording& rec, const FoldPlan& plan, std::size_t fold,
                       const WindowOptions& windows);

/// Builds (seeded per fold), trains and evaluates one fold. Errors are
/// captured in the outcome rather than thrown.
FoldOutcome run_fold(const PairedRecording& rec, const FoldPlan& plan, std::size_t fold, const ModelConfig& model,
                     const TrainConfig& train, const WindowOptions& windows);

struct CrossvalResult {
  std::vector<FoldOutcome> folds;
  std::optional<EvalReport> mean;  // over successful folds
  nlohmann::json to_json() const;
};

/// All k folds, `jobs` at a time on worker threads. Results are independent of `jobs`.
CrossvalResult crossval_run(const PairedRecording& rec, std::size_t k, const ModelConfig& model,
                            const TrainConfig& train, const WindowOptions& windows, std::size_t jobs = 1,
                            const std::function<void(const FoldOutcome&)>& on_fold = {});

}  // namespace c2s
