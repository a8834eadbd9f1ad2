#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "c2s/checkpoint.hpp"
#include "c2s/config.hpp"
#include "c2s/ctsr.hpp"
#include "c2s/dataset.hpp"
#include "c2s/errors.hpp"
#include "c2s/log.hpp"
#include "c2s/metrics.hpp"
#include "c2s/pgm.hpp"
#include "c2s/probe.hpp"
#include "c2s/random.hpp"
#include "c2s/train.hpp"
#include "c2s/wav.hpp"

namespace c2s::cli {

namespace {

using nlohmann::json;

ExperimentConfig load_config(const ConfigFlags& f) {
  ExperimentConfig c = f.config ? load_experiment_config(*f.config) : ExperimentConfig{};
  if (f.variant) {
    ModelConfig m = ModelConfig::defaults(parse_variant(*f.variant));
    m.in_channels = c.model.in_channels;
    m.out_channels = c.model.out_channels;
    m.dropout = c.model.dropout;
    m.bn_momentum = c.model.bn_momentum;
    m.bn_epsilon = c.model.bn_epsilon;
    c.model = m;
  }
  if (f.max_epochs) c.train.max_epochs = *f.max_epochs;
  if (f.train_hop) c.window.train_hop = *f.train_hop;
  if (f.batch_size) c.train.batch_size = *f.batch_size;
  if (f.learning_rate) c.train.learning_rate = *f.learning_rate;
  return c;
}

// Existing files are overwritten only with --force; nothing is deleted.
void prepare_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir) && !force) {
      throw IoError("output directory " + dir.string() + " is not empty; pass --force to overwrite");
    }
  }
  fs::create_directories(dir);
}

void prepare_output_file(const fs::path& path, bool force) {
  if (fs::exists(path) && !force) throw IoError(path.string() + " exists; pass --force to overwrite");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

[[noreturn]] void rethrow_as(const std::string& kind, const std::string& message) {
  if (kind == "config") throw ConfigError(message);
  if (kind == "shape") throw ShapeError(message);
  if (kind == "format") throw FormatError(message);
  if (kind == "io") throw IoError(message);
  if (kind == "numeric") throw NumericError(message);
  throw Error(message);
}

std::string format_ms(std::size_t frames, double frame_rate) {
  const double ms = static_cast<double>(frames) * 1000.0 / frame_rate;
  std::ostringstream s;
  if (std::abs(ms - std::round(ms)) < 1e-9) {
    s << static_cast<long long>(std::llround(ms));
  } else {
    s << ms;
  }
  return s.str();
}

void print_report_line(const std::string& label, const EvalReport& r) {
  std::cout << label << ": cc_mean " << r.cc_mean << " mse " << r.mse << "\n";
}

// Writes <dir>/checkpoint and <dir>/report.json for one successful fold.
void write_fold(const fs::path& dir, const FoldOutcome& f, const ExperimentConfig& cfg, std::size_t k,
                double frame_rate) {
  CheckpointMeta meta;
  meta.seed = cfg.train.seed;
  meta.epoch = f.training.best_epoch;
  meta.probe_amplitude = f.probe_amplitude;
  meta.metrics = {{"fold", f.fold},
                  {"k", k},
                  {"frame_rate", frame_rate},
                  {"window", to_json(cfg.window)},
                  {"mse", f.report.mse},
                  {"cc_mean", f.report.cc_mean},
                  {"best_epoch", f.training.best_epoch},
                  {"best_val_loss", f.training.best_val_loss}};
  fs::create_directories(dir);
  const auto saved = save_checkpoint(dir / "checkpoint", *f.model, f.norm, meta);
  write_json_file(dir / "report.json", f.report.to_json());
  std::cout << "checkpoint_id: " << saved.checkpoint_id << "\n";
}

}  // namespace

void cmd_synth(const SynthArgs& a) {
  auto cfg = load_config(a.flags);
  if (a.flags.seed) {
    cfg.session.stimuli.seed = *a.flags.seed;
    cfg.session.teacher.seed = *a.flags.seed;
  }
  cfg.validate();
  prepare_output_dir(a.out, a.force);
  const auto rec = synth_session(cfg.session);
  write_session(a.out, rec, {{"config", to_json(cfg.session)}});
  std::cout << "annotations: " << rec.annotations.size() << "\n"
            << "frames: " << rec.frames() << "\n"
            << "electrodes: " << rec.ecog.electrodes() << "\n"
            << "bands: " << rec.spec.bands() << "\n"
            << "lag_frames: " << rec.lag_frames << "\n";
}

void cmd_preprocess(const PreprocessArgs& a) {
  const auto cfg = load_config(a.flags);
  const auto wave = read_wav(a.audio);
  if (wave.sample_rate != cfg.session.stimuli.sample_rate) {
    std::ostringstream s;
    s << "audio sample rate " << wave.sample_rate << " Hz does not match the configured "
      << cfg.session.stimuli.sample_rate << " Hz";
    throw ConfigError(s.str());
  }
  const auto raw = read_ctsr(a.ecog);
  AlignOptions o;
  o.lag_seconds = cfg.session.lag_seconds;
  o.filterbank = cfg.session.filterbank;
  o.analysis = cfg.session.analysis;
  o.high_gamma.frame_rate = cfg.session.analysis.frame_rate;
  o.band_group = cfg.session.band_group;
  prepare_output_dir(a.out, a.force);
  const auto rec = align(wave, raw, a.ecog_rate, o);
  write_session(a.out, rec,
                {{"source",
                  {{"audio", a.audio.string()}, {"ecog", a.ecog.string()}, {"ecog_rate", a.ecog_rate}}},
                 {"lag_ms", o.lag_seconds * 1000.0}});
  std::cout << "lag_ms: " << format_ms(lag_samples(o.lag_seconds, 1000.0), 1000.0) << "\n"
            << "lag_samples: " << lag_samples(o.lag_seconds, wave.sample_rate) << "\n"
            << "lag_frames: " << rec.lag_frames << "\n"
            << "ecog_frames: " << rec.ecog.frames() << "\n"
            << "spec_frames: " << rec.spec.frames() << "\n";
}

void cmd_train(const TrainArgs& a) {
  auto cfg = load_config(a.flags);
  if (a.flags.seed) cfg.train.seed = *a.flags.seed;
  cfg.validate();
  const auto rec = read_session(a.session);
  const auto plan = kfold_split(rec, cfg.folds);
  prepare_output_dir(a.out, a.force);
  const auto outcome = run_fold(rec, plan, a.fold, cfg.model, cfg.train, cfg.window);
  if (!outcome.ok) rethrow_as(outcome.error_kind, "fold " + std::to_string(a.fold) + ": " + outcome.error);
  write_fold(a.out, outcome, cfg, cfg.folds, rec.spec.frame_rate);
  std::cout << "best_epoch: " << outcome.training.best_epoch << "\n";
  print_report_line("fold " + std::to_string(a.fold), outcome.report);
}

void cmd_crossval(const CrossvalArgs& a) {
  auto cfg = load_config(a.flags);
  if (a.flags.seed) cfg.train.seed = *a.flags.seed;
  cfg.validate();
  const auto rec = read_session(a.session);
  prepare_output_dir(a.out, a.force);
  const auto result = crossval_run(rec, cfg.folds, cfg.model, cfg.train, cfg.window, a.jobs, [](const FoldOutcome& f) {
    log::info("fold " + std::to_string(f.fold) + (f.ok ? " done" : " failed: " + f.error));
  });
  json failures = json::array();
  for (const auto& f : result.folds) {
    if (f.ok) {
      write_fold(a.out / ("fold_" + std::to_string(f.fold)), f, cfg, cfg.folds, rec.spec.frame_rate);
      print_report_line("fold " + std::to_string(f.fold), f.report);
    } else {
      failures.push_back({{"fold", f.fold}, {"kind", f.error_kind}, {"error", f.error}});
    }
  }
  if (result.mean) {
    write_json_file(a.out / "report.json", result.mean->to_json());
    print_report_line("mean", *result.mean);
  }
  if (!failures.empty()) {
    write_json_file(a.out / "failures.json", failures);
    const auto& first = failures.front();
    rethrow_as(first.at("kind").get<std::string>(),
               std::to_string(failures.size()) + " of " + std::to_string(cfg.folds) + " folds failed; fold " +
                   std::to_string(first.at("fold").get<std::size_t>()) + ": " + first.at("error").get<std::string>());
  }
}

void cmd_eval(const EvalArgs& a) {
  auto ck = load_checkpoint(a.checkpoint);
  const auto& m = ck.meta.metrics;
  if (!m.contains("fold") || !m.contains("k") || !m.contains("window")) {
    throw FormatError(a.checkpoint.string() + ": meta.json lacks the fold, k and window of its training run");
  }
  const auto fold = m.at("fold").get<std::size_t>();
  const auto k = m.at("k").get<std::size_t>();
  const auto window = window_options_from_json(m.at("window"), "/metrics/window");
  const auto rec = read_session(a.session);
  if (rec.ecog.electrodes() != ck.model.config().in_channels) {
    throw ShapeError("session has " + std::to_string(rec.ecog.electrodes()) + " electrodes, checkpoint expects " +
                     std::to_string(ck.model.config().in_channels));
  }
  const auto plan = kfold_split(rec, k);
  const auto fw = fold_windows(rec, plan, fold, window);
  const auto normalized = normalize(rec, ck.norm);
  std::vector<WordAnnotation> ann;
  for (std::size_t idx : fw.test_annotation) ann.push_back(rec.annotations[idx]);
  auto report = evaluate(ck.model, normalized.ecog.values, normalized.spec.values, fw.test, window.length,
                         window.context, ann);
  report.fold = std::to_string(fold);
  if (a.out) {
    prepare_output_file(*a.out, a.force);
    write_json_file(*a.out, report.to_json());
    print_report_line("fold " + report.fold, report);
  } else {
    std::cout << report.to_json().dump(2) << "\n";
  }
}

void cmd_probe(const ProbeArgs& a) {
  auto ck = load_checkpoint(a.checkpoint);
  const float amplitude = a.amplitude.value_or(ck.meta.probe_amplitude);
  if (!(amplitude > 0.0f)) log::warn("probe amplitude is not positive; responses will be zero");
  prepare_output_dir(a.out, a.force);
  const ProbeOptions po;
  const auto map = probe_all(ck.model, amplitude, ck.meta.checkpoint_id, po);

  json electrodes = json::array();
  std::vector<Tensor> tiles;
  std::size_t silent = 0;
  for (std::size_t e = 0; e < map.responses.size(); ++e) {
    const auto display = display_response(map.responses[e], ck.norm);
    char stem[32];
    std::snprintf(stem, sizeof stem, "elec_%02zu", e);
    const std::string base = stem;
    write_ctsr(a.out / (base + ".ctsr"), display);
    export_pgm(display, a.out / (base + ".pgm"));
    dsp::InversionOptions io;
    io.iterations = a.iterations;
    io.seed = derive_seed(a.seed, e);
    const auto audio = sonify(display, io);
    write_wav(a.out / (base + ".wav"), audio.waveform);
    silent += audio.silent ? 1 : 0;

    // Band holding most of the positive response energy.
    const std::size_t bands = display.dim(0), frames = display.dim(1);
    std::vector<double> energy(bands, 0.0);
    double total = 0.0;
    for (std::size_t b = 0; b < bands; ++b) {
      for (std::size_t t = 0; t < frames; ++t) {
        const double v = display.data()[b * frames + t];
        energy[b] += v * v;
      }
      total += energy[b];
    }
    const auto peak = static_cast<std::size_t>(std::max_element(energy.begin(), energy.end()) - energy.begin());
    electrodes.push_back({{"electrode", e},
                          {"ctsr", base + ".ctsr"},
                          {"pgm", base + ".pgm"},
                          {"wav", base + ".wav"},
                          {"peak_band", peak},
                          {"peak_band_energy_fraction", total > 0.0 ? energy[peak] / total : 0.0},
                          {"silent", audio.silent}});
    tiles.push_back(display);
  }
  const auto mont = montage(tiles);
  export_pgm(mont, a.out / "montage.pgm");

  const json manifest = {
      {"checkpoint_id", map.checkpoint_id},
      {"amplitude", map.amplitude},
      {"amplitude_units", "normalized envelope; default is the largest value over the training frames"},
      {"response_units", "spectrogram magnitude: normalized response times each band's training std"},
      {"baseline_subtracted", true},
      {"probe", {{"length", po.length}, {"onset", po.onset}, {"width", po.width}}},
      {"inversion", {{"iterations", a.iterations}, {"seed", a.seed}, {"per_electrode_seed", "derive_seed(seed, e)"}}},
      {"montage", {{"file", "montage.pgm"}, {"grid", 8}, {"margin", 2}, {"rows", mont.dim(0)}, {"cols", mont.dim(1)}}},
      {"electrodes", electrodes}};
  write_json_file(a.out / "manifest.json", manifest);
  std::cout << "electrodes: " << map.responses.size() << "\n"
            << "amplitude: " << map.amplitude << "\n"
            << "silent: " << silent << "\n"
            << "checkpoint_id: " << map.checkpoint_id << "\n";
}

void cmd_invert(const InvertArgs& a) {
  const auto values = read_ctsr(a.spec);
  if (values.ndim() != 2) throw ShapeError(a.spec.string() + ": expected a [bands x frames] tensor");
  prepare_output_file(a.out, a.force);
  dsp::Spectrogram s;
  s.values = values;
  s.frame_rate = a.frame_rate;
  dsp::InversionOptions io;
  io.iterations = a.iterations;
  io.seed = a.seed;
  const auto result = dsp::invert_spectrogram(s, io);
  write_wav(a.out, result.waveform);
  std::cout << "samples: " << result.waveform.samples.size() << "\n"
            << "silent: " << (result.silent ? "true" : "false") << "\n"
            << "initial_error: " << result.error_history.front() << "\n"
            << "final_error: " << result.error_history.back() << "\n";
}

void cmd_info(const InfoArgs& a) {
  ModelConfig mc;
  double frame_rate = 100.0;
  std::vector<LayerInfo> layers;
  if (a.checkpoint) {
    const auto ck = load_checkpoint(*a.checkpoint);
    mc = ck.model.config();
    if (ck.meta.metrics.contains("frame_rate")) frame_rate = ck.meta.metrics.at("frame_rate").get<double>();
    layers = ck.model.layers();
  } else {
    const auto cfg = load_config(a.flags);
    cfg.validate();
    mc = cfg.model;
    frame_rate = cfg.session.analysis.frame_rate;
    layers = Model::build(mc, 0).layers();
  }
  const std::size_t rf = receptive_field(mc);
  const std::size_t params = count_params(mc);
  if (a.json) {
    json j = {{"variant", to_string(mc.variant)},
              {"receptive_field_frames", rf},
              {"receptive_field_ms", static_cast<double>(rf) * 1000.0 / frame_rate},
              {"parameters", params},
              {"layers", json::array()}};
    for (const auto& l : layers) {
      j["layers"].push_back(
          {{"name", l.name}, {"kind", l.kind}, {"shape", l.shape}, {"dilation", l.dilation}, {"params", l.params}});
    }
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::cout << "variant: " << to_string(mc.variant) << "\n"
            << "receptive_field_frames: " << rf << " (" << format_ms(rf, frame_rate) << " ms)\n"
            << "parameters: " << params << "\n"
            << "layers:\n";
  char line[160];
  std::snprintf(line, sizeof line, "  %-22s %-12s %-14s %8s %8s\n", "name", "kind", "shape", "dilation", "params");
  std::cout << line;
  for (const auto& l : layers) {
    std::snprintf(line, sizeof line, "  %-22s %-12s %-14s %8d %8zu\n", l.name.c_str(), l.kind.c_str(),
                  shape_string(l.shape).c_str(), l.dilation, l.params);
    std::cout << line;
  }
}

}  // namespace c2s::cli
