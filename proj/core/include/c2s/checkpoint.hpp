#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "c2s/dataset.hpp"
#include "c2s/model.hpp"

namespace c2s {

inline constexpr int kCheckpointFormatVersion = 1;

struct CheckpointMeta {
  int format_version = kCheckpointFormatVersion;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  nlohmann::json metrics = nlohmann::json::object();
  float probe_amplitude = 0.0f;  // largest normalized training envelope value
  std::string checkpoint_id;     // content hash, filled in by save_checkpoint
};

struct Checkpoint {
  Model model;
  NormStats norm;
  CheckpointMeta meta;
};

/// Content hash (FNV-1a, hex) of the config and every persistent tensor.
std::string checkpoint_id(const Model& model);

/// Directory layout: config.json, params/<name>.ctsr, norm_stats.ctsr, meta.json.
/// Returns the stored metadata with checkpoint_id set.
CheckpointMeta save_checkpoint(const std::filesystem::path& dir, const Model& model, const NormStats& norm,
                               CheckpointMeta meta);

/// Throws FormatError on version mismatch or a missing or mis-shaped tensor (named).
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace c2s
