#include <doctest.h>

#ifdef C2S_CLI_PATH

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "c2s/ctsr.hpp"
#include "c2s/model.hpp"
#include "c2s/wav.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace c2s;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Run c2s_run(const std::string& args) {
  static int counter = 0;
  const auto dir = fs::temp_directory_path() / "c2s_cli_capture";
  fs::create_directories(dir);
  const auto out = dir / ("out" + std::to_string(counter) + ".txt");
  const auto err = dir / ("err" + std::to_string(counter++) + ".txt");
  const std::string cmd = std::string(C2S_CLI_PATH) + " --log-level warn " + args + " > " + out.string() + " 2> " +
                          err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

nlohmann::json error_json(const Run& r) {
  // The error object is the last stderr line.
  auto end = r.err.find_last_not_of('\n');
  auto start = r.err.rfind('\n', end);
  return nlohmann::json::parse(r.err.substr(start == std::string::npos ? 0 : start + 1, end + 1));
}

fs::path write_config(const fs::path& dir, const nlohmann::json& j) {
  const auto p = dir / "config.json";
  std::ofstream(p) << j.dump();
  return p;
}

nlohmann::json small_config(const std::string& variant = "linear") {
  return {{"stimuli", {{"words", 4}, {"reps", 3}, {"seed", 3}}},
          {"teacher", {{"seed", 4}}},
          {"model", {{"variant", variant}}},
          {"train", {{"max_epochs", 2}, {"batch_size", 16}}},
          {"window", {{"train_hop", 25}}}};
}

std::size_t count_ext(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
  return n;
}

bool same_tree(const fs::path& a, const fs::path& b) {
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    if (!fs::exists(b / rel) || slurp(e.path()) != slurp(b / rel)) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 2 with a JSON error") {
    auto r = c2s_run("synth");
    CHECK(r.code == 2);
    CHECK(error_json(r)["error"]["kind"] == "usage");
    CHECK(c2s_run("").code == 2);
    CHECK(c2s_run("--help").code == 0);
  }

  TEST_CASE("info prints receptive field and parameter count") {
    auto w = c2s_run("info --variant wavenet");
    REQUIRE(w.code == 0);
    CHECK(w.out.find("receptive_field_frames: 94 (940 ms)") != std::string::npos);
    CHECK(w.out.find("parameters: " + std::to_string(count_params(ModelConfig::defaults(Variant::wavenet)))) !=
          std::string::npos);
    auto l = c2s_run("info --variant linear");
    CHECK(l.out.find("receptive_field_frames: 124 (1240 ms)") != std::string::npos);
    CHECK(l.out.find("parameters: 253984") != std::string::npos);
    auto j = c2s_run("info --variant resnet --json");
    REQUIRE(j.code == 0);
    const auto doc = nlohmann::json::parse(j.out);
    CHECK(doc["parameters"] == count_params(ModelConfig::defaults(Variant::resnet)));
    CHECK(doc["receptive_field_frames"] == 49);
    CHECK(c2s_run("info --variant mlp").code == 3);
  }

  TEST_CASE("config schema errors carry the JSON pointer") {
    const auto dir = c2s::test::temp_dir("cli_schema");
    const auto cfg = write_config(dir, {{"model", {{"variant", "linear"}, {"bogus", 1}}}});
    auto r = c2s_run("synth --config " + cfg.string() + " --out " + (dir / "s").string());
    CHECK(r.code == 3);
    const auto e = error_json(r);
    CHECK(e["error"]["kind"] == "config");
    CHECK(e["error"]["pointer"] == "/model/bogus");
    CHECK_FALSE(fs::exists(dir / "s"));
  }

  TEST_CASE("synth: default session has 150 annotations") {
    const auto dir = c2s::test::temp_dir("cli_synth_default");
    auto r = c2s_run("synth --out " + (dir / "s").string());
    REQUIRE(r.code == 0);
    CHECK(r.out.find("annotations: 150") != std::string::npos);
    CHECK(r.out.find("lag_frames: 17") != std::string::npos);
    for (const char* f : {"ecog.ctsr", "spec.ctsr", "annotations.json", "meta.json"}) CHECK(fs::exists(dir / "s" / f));
  }

  TEST_CASE("synth: fixed seed gives identical bytes; outputs need --force") {
    const auto dir = c2s::test::temp_dir("cli_synth");
    const auto cfg = write_config(dir, small_config());
    const std::string base = "synth --config " + cfg.string() + " --seed 21 --out ";
    REQUIRE(c2s_run(base + (dir / "a").string()).code == 0);
    REQUIRE(c2s_run(base + (dir / "b").string()).code == 0);
    CHECK(same_tree(dir / "a", dir / "b"));
    REQUIRE(c2s_run("synth --config " + cfg.string() + " --seed 22 --out " + (dir / "c").string()).code == 0);
    CHECK(slurp(dir / "a" / "ecog.ctsr") != slurp(dir / "c" / "ecog.ctsr"));

    auto refused = c2s_run(base + (dir / "a").string());
    CHECK(refused.code == 4);
    CHECK(error_json(refused)["error"]["message"].get<std::string>().find("--force") != std::string::npos);
    CHECK(c2s_run(base + (dir / "a").string() + " --force").code == 0);
  }

  TEST_CASE("preprocess: lag, frame counts, silence, rate mismatch") {
    const auto dir = c2s::test::temp_dir("cli_pre");
    write_wav(dir / "speech.wav", c2s::test::synthetic_vowel(2.0));
    dsp::Waveform silence;
    silence.samples.assign(48000, 0.0f);
    write_wav(dir / "silence.wav", silence);
    dsp::Waveform wrong_rate = silence;
    wrong_rate.sample_rate = 16000.0;
    write_wav(dir / "wrong.wav", wrong_rate);
    write_ctsr(dir / "ecog.ctsr", c2s::test::random_tensor({64, 6102}, 5, -50.0f, 50.0f));

    const std::string ecog = " --ecog " + (dir / "ecog.ctsr").string();
    auto r = c2s_run("preprocess --audio " + (dir / "speech.wav").string() + ecog + " --out " + (dir / "p").string());
    REQUIRE(r.code == 0);
    CHECK(r.out.find("lag_ms: 168") != std::string::npos);
    CHECK(r.out.find("lag_samples: 4032") != std::string::npos);
    const auto e = read_ctsr(dir / "p" / "ecog.ctsr"), s = read_ctsr(dir / "p" / "spec.ctsr");
    CHECK(e.dim(1) == s.dim(1));
    CHECK(s.dim(0) == 32);

    REQUIRE(c2s_run("preprocess --audio " + (dir / "silence.wav").string() + ecog + " --out " + (dir / "q").string())
                .code == 0);
    const Tensor quiet = read_ctsr(dir / "q" / "spec.ctsr");
    for (float v : quiet.data()) CHECK(v == 0.0f);

    auto bad = c2s_run("preprocess --audio " + (dir / "wrong.wav").string() + ecog + " --out " + (dir / "w").string());
    CHECK(bad.code == 3);
    CHECK(error_json(bad)["error"]["message"].get<std::string>().find("sample rate") != std::string::npos);
  }

  TEST_CASE("invert: zero spectrogram gives a silent WAV") {
    const auto dir = c2s::test::temp_dir("cli_invert");
    write_ctsr(dir / "zero.ctsr", Tensor::zeros({32, 50}));
    auto r = c2s_run("invert --spec " + (dir / "zero.ctsr").string() + " --out " + (dir / "z.wav").string());
    REQUIRE(r.code == 0);
    CHECK(r.out.find("silent: true") != std::string::npos);
    const auto w = read_wav(dir / "z.wav");
    CHECK(w.samples.size() == 12000);
    for (float v : w.samples) CHECK(v == 0.0f);
    CHECK(c2s_run("invert --spec " + (dir / "zero.ctsr").string() + " --out " + (dir / "z.wav").string()).code == 4);
  }

  TEST_CASE("pipeline: synth, train, eval, probe, crossval") {
    const auto dir = c2s::test::temp_dir("cli_pipeline");
    const auto cfg = write_config(dir, small_config());
    const std::string c = " --config " + cfg.string();
    const std::string session = (dir / "session").string();
    REQUIRE(c2s_run("synth" + c + " --out " + session).code == 0);

    auto t = c2s_run("train" + c + " --session " + session + " --fold 1 --out " + (dir / "train").string());
    REQUIRE(t.code == 0);
    CHECK(fs::exists(dir / "train" / "checkpoint" / "meta.json"));
    const auto report = nlohmann::json::parse(slurp(dir / "train" / "report.json"));
    CHECK(report["fold"] == 1);

    auto ev = c2s_run("eval --checkpoint " + (dir / "train" / "checkpoint").string() + " --session " + session);
    REQUIRE(ev.code == 0);
    const auto evj = nlohmann::json::parse(ev.out);
    CHECK(evj["mse"] == report["mse"]);
    CHECK(evj["cc_per_band"] == report["cc_per_band"]);

    const std::string ckpt = " --checkpoint " + (dir / "train" / "checkpoint").string();
    REQUIRE(c2s_run("probe" + ckpt + " --iterations 2 --seed 3 --out " + (dir / "probe").string()).code == 0);
    CHECK(count_ext(dir / "probe", ".pgm") == 65);
    CHECK(count_ext(dir / "probe", ".wav") == 64);
    CHECK(fs::exists(dir / "probe" / "montage.pgm"));
    CHECK(fs::exists(dir / "probe" / "manifest.json"));
    REQUIRE(c2s_run("probe" + ckpt + " --iterations 2 --seed 3 --out " + (dir / "probe2").string()).code == 0);
    CHECK(same_tree(dir / "probe", dir / "probe2"));

    const std::string cv = "crossval" + c + " --session " + session + " --jobs 2 --out ";
    REQUIRE(c2s_run(cv + (dir / "cv").string()).code == 0);
    std::size_t checkpoints = 0, reports = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir / "cv")) {
      checkpoints += e.path().filename() == "checkpoint";
      reports += e.path().filename() == "report.json";
    }
    CHECK(checkpoints == 3);
    CHECK(reports == 4);
    CHECK(nlohmann::json::parse(slurp(dir / "cv" / "report.json"))["fold"] == "mean");
    REQUIRE(c2s_run(cv + (dir / "cv2").string()).code == 0);
    for (const char* f : {"report.json", "fold_0/report.json", "fold_1/report.json", "fold_2/report.json"}) {
      CHECK(slurp(dir / "cv" / f) == slurp(dir / "cv2" / f));
    }

    // Divergence surfaces as a numeric error with diagnostics.
    auto nan = c2s_run("train" + c + " --session " + session + " --learning-rate 1e30 --out " + (dir / "nan").string());
    CHECK(nan.code == 5);
    const auto msg = error_json(nan)["error"]["message"].get<std::string>();
    CHECK(msg.find("epoch") != std::string::npos);
    CHECK(msg.find("batch") != std::string::npos);

    // Unsupported checkpoint versions are refused.
    fs::copy(dir / "train" / "checkpoint", dir / "old", fs::copy_options::recursive);
    auto meta = nlohmann::json::parse(slurp(dir / "old" / "meta.json"));
    meta["format_version"] = 0;
    std::ofstream(dir / "old" / "meta.json") << meta.dump();
    auto old = c2s_run("probe --checkpoint " + (dir / "old").string() + " --out " + (dir / "probe_old").string());
    CHECK(old.code == 4);
    CHECK(error_json(old)["error"]["message"].get<std::string>().find("version") != std::string::npos);
  }
}

#endif
