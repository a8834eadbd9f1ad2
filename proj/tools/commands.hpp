#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace c2s::cli {

namespace fs = std::filesystem;

/// Flags shared by commands that read an experiment config.
struct ConfigFlags {
  std::optional<fs::path> config;
  std::optional<std::string> variant;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_epochs;
  std::optional<std::size_t> train_hop;
  std::optional<std::size_t> batch_size;
  std::optional<float> learning_rate;
};

struct SynthArgs {
  ConfigFlags flags;
  fs::path out;
  bool force = false;
};

struct PreprocessArgs {
  ConfigFlags flags;
  fs::path audio;
  fs::path ecog;
  double ecog_rate = 3051.0;
  fs::path out;
  bool force = false;
};

struct TrainArgs {
  ConfigFlags flags;
  fs::path session;
  fs::path out;
  std::size_t fold = 0;
  bool force = false;
};

struct CrossvalArgs {
  ConfigFlags flags;
  fs::path session;
  fs::path out;
  std::size_t jobs = 1;
  bool force = false;
};

struct EvalArgs {
  fs::path checkpoint;
  fs::path session;
  std::optional<fs::path> out;
  bool force = false;
};

struct ProbeArgs {
  fs::path checkpoint;
  fs::path out;
  std::uint64_t seed = 0;
  std::size_t iterations = 100;
  std::optional<float> amplitude;
  bool force = false;
};

struct InvertArgs {
  fs::path spec;
  fs::path out;
  std::uint64_t seed = 0;
  std::size_t iterations = 100;
  double frame_rate = 100.0;
  bool force = false;
};

struct InfoArgs {
  ConfigFlags flags;
  std::optional<fs::path> checkpoint;
  bool json = false;
};

// Each command writes human-readable "key: value" lines to stdout and throws
// c2s::Error subclasses on failure.
void cmd_synth(const SynthArgs& args);
void cmd_preprocess(const PreprocessArgs& args);
void cmd_train(const TrainArgs& args);
void cmd_crossval(const CrossvalArgs& args);
void cmd_eval(const EvalArgs& args);
void cmd_probe(const ProbeArgs& args);
void cmd_invert(const InvertArgs& args);
void cmd_info(const InfoArgs& args);

}  // namespace c2s::cli
