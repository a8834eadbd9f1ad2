#include "c2s/config.hpp"

#include "c2s/ctsr.hpp"
#include "c2s/errors.hpp"
#include "c2s/json_reader.hpp"

namespace c2s {

void ExperimentConfig::validate() const {
  session.validate();
  model.validate();
  train.validate();
  window.validate();
  if (folds < 2) throw ConfigError("folds.k must be >= 2");
  if (folds != session.stimuli.reps) {
    throw ConfigError("folds.k (" + std::to_string(folds) + ") must equal stimuli.reps (" +
                      std::to_string(session.stimuli.reps) + ")");
  }
  if (model.in_channels != session.teacher.electrodes) {
    throw ConfigError("model.in_channels must equal teacher.electrodes");
  }
  if (model.out_channels * session.band_group != session.filterbank.num_bands) {
    throw ConfigError("model.out_channels must equal dsp.num_bands / dsp.band_group");
  }
  if (window.context + 1 < receptive_field(model)) {
    throw ConfigError("window.context must cover the model's receptive field minus one frame");
  }
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  JsonReader root(j, "");
  if (const auto* s = root.child("stimuli")) {
    JsonReader r(*s, "/stimuli");
    auto& o = c.session.stimuli;
    r.read("words", o.words);
    r.read("reps", o.reps);
    r.read("seed", o.seed);
    r.read("sample_rate", o.sample_rate);
    r.read("word_ms", o.word_ms);
    r.read("gap_ms", o.gap_ms);
    r.read("lead_ms", o.lead_ms);
    r.finish();
  }
  if (const auto* s = root.child("teacher")) c.session.teacher = teacher_from_json(*s, "/teacher");
  if (const auto* s = root.child("dsp")) {
    JsonReader r(*s, "/dsp");
    auto& fb = c.session.filterbank;
    r.read("num_bands", fb.num_bands);
    r.read("f_low", fb.f_low);
    r.read("f_high", fb.f_high);
    r.read("bandwidth_octaves", fb.bandwidth_octaves);
    r.read("band_group", c.session.band_group);
    if (r.read("frame_rate", c.session.analysis.frame_rate)) c.session.stimuli.frame_rate = c.session.analysis.frame_rate;
    r.read("smoothing_pass_hz", c.session.analysis.smoothing_pass_hz);
    r.read("smoothing_stop_hz", c.session.analysis.smoothing_stop_hz);
    double lag_ms = c.session.lag_seconds * 1000.0;
    if (r.read("lag_ms", lag_ms)) c.session.lag_seconds = lag_ms / 1000.0;
    r.finish();
  }
  if (const auto* s = root.child("model")) c.model = model_config_from_json(*s, "/model");
  if (const auto* s = root.child("train")) c.train = train_config_from_json(*s, "/train");
  if (const auto* s = root.child("folds")) {
    JsonReader r(*s, "/folds");
    r.read("k", c.folds);
    r.finish();
  }
  if (const auto* s = root.child("window")) c.window = window_options_from_json(*s, "/window");
  root.finish();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    if (what.rfind("config ", 0) == 0) throw;
    JsonReader::fail("/", what);
  }
  return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j = to_json(c.session);
  j["model"] = to_json(c.model);
  j["train"] = to_json(c.train);
  j["folds"] = {{"k", c.folds}};
  j["window"] = to_json(c.window);
  return j;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON at byte " + std::to_string(e.byte));
  }
  return experiment_config_from_json(j);
}

}  // namespace c2s
