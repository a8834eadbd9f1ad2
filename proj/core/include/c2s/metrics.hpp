#pragma once

#include <cstddef>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "c2s/tensor.hpp"

namespace c2s {

double mean_squared_error(std::span<const float> pred, std::span<const float> target);

/// Pearson correlation. A constant argument yields 0 and sets *degenerate.
double pearson(std::span<const float> x, std::span<const float> y, bool* degenerate = nullptr);

struct BandCorrelation {
  std::vector<double> cc;
  std::vector<bool> degenerate;
  double mean() const;
};

/// Per-row correlation of two [B x T] arrays.
BandCorrelation band_correlation(const Tensor& pred, const Tensor& target);

struct WordScore {
  std::size_t word_id = 0;
  std::size_t repetition = 0;
  double cc = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct EvalReport {
  std::string fold;  // fold index, or "mean"
  double mse = 0.0;
  std::vector<double> cc_per_band;
  std::vector<bool> cc_degenerate;
  double cc_mean = 0.0;
  std::vector<WordScore> per_word;
  std::vector<EpochRecord> train_history;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

/// Arithmetic mean of mse, per-band cc and cc_mean over the reports.
EvalReport mean_report(std::span<const EvalReport> reports);

}  // namespace c2s
