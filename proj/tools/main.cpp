#include <CLI11.hpp>
#include <exception>
#include <filesystem>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>

#include "c2s/errors.hpp"
#include "c2s/log.hpp"
#include "commands.hpp"

namespace {

using namespace c2s::cli;

int exit_code(const std::string& kind) {
  if (kind == "usage") return 2;
  if (kind == "config") return 3;
  if (kind == "io" || kind == "format") return 4;
  if (kind == "numeric") return 5;
  if (kind == "shape") return 6;
  return 1;
}

// One JSON object on stderr; config errors carry the offending JSON pointer.
int report_error(const std::string& kind, const std::string& message) {
  nlohmann::json err = {{"kind", kind}, {"message", message}};
  const std::string prefix = "config /";
  if (kind == "config" && message.rfind(prefix, 0) == 0) {
    const auto end = message.find(':', prefix.size());
    if (end != std::string::npos) err["pointer"] = message.substr(prefix.size() - 1, end - prefix.size() + 1);
  }
  std::cerr << nlohmann::json{{"error", err}}.dump() << std::endl;
  return exit_code(kind);
}

void add_config_flags(CLI::App* app, ConfigFlags& f, bool training) {
  app->add_option("--config", f.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app->add_option("--variant", f.variant, "Model variant: linear, resnet or wavenet");
  app->add_option("--seed", f.seed, "Seed overriding the config");
  if (!training) return;
  app->add_option("--max-epochs", f.max_epochs, "Override train.max_epochs");
  app->add_option("--train-hop", f.train_hop, "Override window.train_hop");
  app->add_option("--batch-size", f.batch_size, "Override train.batch_size");
  app->add_option("--learning-rate", f.learning_rate, "Override train.learning_rate");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decode speech spectrograms from cortical envelopes"};
  app.require_subcommand(1);
  std::string log_level;
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off (default: $C2S_LOG or info)");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Synthesize stimuli and a teacher-encoded session");
  add_config_flags(s, synth.flags, false);
  s->add_option("--out", synth.out, "Session directory")->required();
  s->add_flag("--force", synth.force, "Overwrite a non-empty output directory");

  PreprocessArgs pre;
  auto* p = app.add_subcommand("preprocess", "Align a speech recording with raw cortical signals");
  p->add_option("--config", pre.flags.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  p->add_option("--audio", pre.audio, "Speech WAV (PCM16 mono)")->required()->check(CLI::ExistingFile);
  p->add_option("--ecog", pre.ecog, "Raw cortical signals, CTSR [electrodes x samples]")
      ->required()
      ->check(CLI::ExistingFile);
  p->add_option("--ecog-rate", pre.ecog_rate, "Raw cortical sample rate in Hz")->capture_default_str();
  p->add_option("--out", pre.out, "Session directory")->required();
  p->add_flag("--force", pre.force, "Overwrite a non-empty output directory");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train and evaluate one cross-validation fold");
  add_config_flags(t, train.flags, true);
  t->add_option("--session", train.session, "Session directory")->required();
  t->add_option("--fold", train.fold, "Fold index")->capture_default_str();
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_flag("--force", train.force, "Overwrite a non-empty output directory");

  CrossvalArgs cv;
  auto* c = app.add_subcommand("crossval", "Train and evaluate every fold");
  add_config_flags(c, cv.flags, true);
  c->add_option("--session", cv.session, "Session directory")->required();
  c->add_option("--jobs", cv.jobs, "Folds trained concurrently")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--out", cv.out, "Output directory")->required();
  c->add_flag("--force", cv.force, "Overwrite a non-empty output directory");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Re-evaluate a checkpoint on its test fold");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
  e->add_option("--session", ev.session, "Session directory")->required();
  e->add_option("--out", ev.out, "Report path (default: stdout)");
  e->add_flag("--force", ev.force, "Overwrite an existing report");

  ProbeArgs pr;
  auto* b = app.add_subcommand("probe", "Per-electrode impulse responses, images and audio");
  b->add_option("--checkpoint", pr.checkpoint, "Checkpoint directory")->required();
  b->add_option("--out", pr.out, "Probe directory")->required();
  b->add_option("--seed", pr.seed, "Inversion seed")->capture_default_str();
  b->add_option("--iterations", pr.iterations, "Inversion iterations")->capture_default_str()->check(CLI::PositiveNumber);
  b->add_option("--amplitude", pr.amplitude, "Impulse amplitude (default: from the checkpoint)");
  b->add_flag("--force", pr.force, "Overwrite a non-empty output directory");

  InvertArgs inv;
  auto* i = app.add_subcommand("invert", "Invert a spectrogram to a waveform");
  i->add_option("--spec", inv.spec, "Spectrogram CTSR [bands x frames]")->required()->check(CLI::ExistingFile);
  i->add_option("--out", inv.out, "Output WAV")->required();
  i->add_option("--seed", inv.seed, "Inversion seed")->capture_default_str();
  i->add_option("--iterations", inv.iterations, "Iterations")->capture_default_str()->check(CLI::PositiveNumber);
  i->add_option("--frame-rate", inv.frame_rate, "Spectrogram frame rate in Hz")->capture_default_str();
  i->add_flag("--force", inv.force, "Overwrite an existing file");

  InfoArgs info;
  auto* n = app.add_subcommand("info", "Receptive field, parameter count and layer table");
  add_config_flags(n, info.flags, false);
  n->add_option("--checkpoint", info.checkpoint, "Checkpoint directory");
  n->add_flag("--json", info.json, "Machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    if (err.get_exit_code() == 0) return app.exit(err);
    return report_error("usage", err.what());
  }

  try {
    if (!log_level.empty()) c2s::log::set_level(log_level);
    if (*s) cmd_synth(synth);
    if (*p) cmd_preprocess(pre);
    if (*t) cmd_train(train);
    if (*c) cmd_crossval(cv);
    if (*e) cmd_eval(ev);
    if (*b) cmd_probe(pr);
    if (*i) cmd_invert(inv);
    if (*n) cmd_info(info);
  } catch (const std::filesystem::filesystem_error& err) {
    return report_error("io", err.what());
  } catch (const std::exception& err) {
    return report_error(c2s::error_kind(err), err.what());
  }
  return 0;
}
