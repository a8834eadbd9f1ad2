#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "c2s/dataset.hpp"
#include "c2s/model.hpp"
#include "c2s/train.hpp"

namespace c2s {

/// One JSON document driving a whole run. Sections: stimuli, teacher, dsp,
/// model, train, folds, window. Every section and key is optional; unknown
/// keys and wrong types are rejected with the JSON pointer of the offender.
struct ExperimentConfig {
  SessionConfig session;
  ModelConfig model;
  TrainConfig train;
  WindowOptions window;
  std::size_t folds = 3;

  void validate() const;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
/// Reads and validates a config file; parse errors report the byte offset.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

}  // namespace c2s
