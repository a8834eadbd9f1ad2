#include "c2s/checkpoint.hpp"

#include <cstdio>
#include <cstring>

#include "c2s/ctsr.hpp"
#include "c2s/errors.hpp"

namespace c2s {

namespace {

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ull;
  void add(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ull;
    }
  }
};

}  // namespace

std::string checkpoint_id(const Model& model) {
  Fnv1a f;
  const std::string cfg = to_json(model.config()).dump();
  f.add(cfg.data(), cfg.size());
  for (const auto& [name, t] : model.state()) {
    f.add(name.data(), name.size());
    f.add(t.data().data(), t.numel() * sizeof(float));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(f.h));
  return buf;
}

CheckpointMeta save_checkpoint(const std::filesystem::path& dir, const Model& model, const NormStats& norm,
                               CheckpointMeta meta) {
  std::filesystem::create_directories(dir / "params");
  write_json_file(dir / "config.json", to_json(model.config()));
  for (const auto& [name, t] : model.state()) write_ctsr(dir / "params" / (name + ".ctsr"), t);
  write_ctsr(dir / "norm_stats.ctsr", norm.to_tensor());
  meta.format_version = kCheckpointFormatVersion;
  meta.checkpoint_id = checkpoint_id(model);
  const nlohmann::json m{{"format_version", meta.format_version},
                         {"seed", meta.seed},
                         {"epoch", meta.epoch},
                         {"metrics", meta.metrics},
                         {"probe_amplitude", meta.probe_amplitude},
                         {"checkpoint_id", meta.checkpoint_id}};
  write_json_file(dir / "meta.json", m);
  return meta;
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("checkpoint directory " + dir.string() + " does not exist");
  const auto m = read_json_file(dir / "meta.json");
  CheckpointMeta meta;
  try {
    meta.format_version = m.at("format_version").get<int>();
    if (meta.format_version != kCheckpointFormatVersion) {
      throw FormatError(dir.string() + ": checkpoint format version " + std::to_string(meta.format_version) +
                        " is not supported (expected " + std::to_string(kCheckpointFormatVersion) + ")");
    }
    meta.seed = m.at("seed").get<std::uint64_t>();
    meta.epoch = m.at("epoch").get<std::size_t>();
    meta.metrics = m.value("metrics", nlohmann::json::object());
    meta.probe_amplitude = m.at("probe_amplitude").get<float>();
    meta.checkpoint_id = m.value("checkpoint_id", "");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir.string() + ": malformed meta.json (" + e.what() + ")");
  }

  const auto config = model_config_from_json(read_json_file(dir / "config.json"));
  Checkpoint ck{Model::build(config, 0), {}, meta};
  std::map<std::string, Tensor> tensors;
  for (const auto& [name, t] : ck.model.state()) {
    const auto path = dir / "params" / (name + ".ctsr");
    if (!std::filesystem::exists(path)) throw FormatError(dir.string() + ": checkpoint is missing tensor '" + name + "'");
    try {
      tensors[name] = read_ctsr(path);
    } catch (const FormatError& e) {
      throw FormatError("tensor '" + name + "': " + e.what());
    }
  }
  ck.model.load_state(tensors);
  ck.norm = NormStats::from_tensor(read_ctsr(dir / "norm_stats.ctsr"), config.in_channels);
  if (ck.norm.spec_mean.size() != config.out_channels) {
    throw FormatError(dir.string() + ": normalization statistics do not match the model's channel counts");
  }
  return ck;
}

}  // namespace c2s
