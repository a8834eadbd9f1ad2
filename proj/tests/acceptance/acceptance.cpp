// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fail. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "c2s/checkpoint.hpp"
#include "c2s/dataset.hpp"
#include "c2s/dsp.hpp"
#include "c2s/metrics.hpp"
#include "c2s/model.hpp"
#include "c2s/ops.hpp"
#include "c2s/pgm.hpp"
#include "c2s/probe.hpp"
#include "c2s/train.hpp"
#include "model_util.hpp"
#include "test_util.hpp"

using namespace c2s;
using c2s::test::bit_identical;
using c2s::test::random_tensor;
using clk = std::chrono::steady_clock;

namespace {

const Variant kVariants[] = {Variant::linear, Variant::resnet, Variant::wavenet};

double seconds_since(clk::time_point t0) { return std::chrono::duration<double>(clk::now() - t0).count(); }
double db(double gain) { return 20.0 * std::log10(gain); }

/// Collects failed sub-checks; the criterion passes when none fail.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++count_;
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    failed_ += !ok;
  }
  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : ", ") + s; }
  bool ok() const { return failed_ == 0; }
  std::string summary() const {
    std::ostringstream s;
    s << (count_ - failed_) << "/" << count_ << " checks";
    if (!notes_.empty()) s << "; " << notes_;
    for (const auto& f : failures_) s << "; failed: " << f;
    return s.str();
  }

 private:
  std::size_t count_ = 0, failed_ = 0;
  std::vector<std::string> failures_;
  std::string notes_;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << std::fixed << v;
  return s.str();
}

// -- shared fixtures ---------------------------------------------------------

SessionConfig diagonal_session(std::optional<double> snr_db) {
  SessionConfig sc;
  sc.teacher.kernel = TeacherKernel::diagonal;
  sc.teacher.mode = TeacherMode::linear;
  sc.teacher.snr_db = snr_db;
  return sc;
}

const PairedRecording& noiseless_session() {
  static const PairedRecording rec = synth_session(diagonal_session(std::nullopt));
  return rec;
}

WindowOptions recovery_windows() {
  WindowOptions wo;
  wo.train_hop = 20;
  return wo;
}

TrainConfig recovery_training() {
  TrainConfig tc;
  tc.batch_size = 32;
  tc.max_epochs = 25;
  tc.seed = 1;
  return tc;
}

/// Linear decoder trained on fold 0 of the noiseless diagonal-teacher session.
const FoldOutcome& noiseless_linear_fold() {
  static const FoldOutcome out = [] {
    const auto& rec = noiseless_session();
    return run_fold(rec, kfold_split(rec, 3), 0, ModelConfig::defaults(Variant::linear), recovery_training(),
                    recovery_windows());
  }();
  return out;
}

// -- criteria ----------------------------------------------------------------

Checks gradient_correctness() {
  Checks c;
  const auto t0 = clk::now();
  double worst = 0.0;
  auto record = [&](double err, const std::string& what) {
    worst = std::max(worst, err);
    c.expect(err < 1e-3, what + " rel err " + fmt(err, 6));
  };
  struct ConvShape {
    std::size_t n, cin, cout, k, t;
  };
  const ConvShape shapes[] = {{1, 1, 1, 2, 9}, {2, 3, 2, 2, 13}, {3, 4, 5, 3, 17}};
  for (int d : {1, 2, 4}) {
    for (const auto& s : shapes) {
      record(c2s::test::gradient_check(
                 [d](const std::vector<Tensor>& in) { return conv1d(in[0], in[1], in[2], d); },
                 {random_tensor({s.n, s.cin, s.t}, 10 + s.t), random_tensor({s.cout, s.cin, s.k}, 20 + s.t),
                  random_tensor({s.cout}, 30 + s.t)}),
             "conv1d d=" + std::to_string(d));
    }
  }
  for (const auto& s : shapes) {
    record(c2s::test::gradient_check(
               [](const std::vector<Tensor>& in) { return gated_unit(in[0], in[1], in[2], in[3], in[4], 2); },
               {random_tensor({s.n, s.cin, s.t}, 40 + s.t), random_tensor({s.cout, s.cin, s.k}, 41 + s.t),
                random_tensor({s.cout}, 42 + s.t), random_tensor({s.cout, s.cin, s.k}, 43 + s.t),
                random_tensor({s.cout}, 44 + s.t)}),
           "gated unit");
  }
  const Shape bn_shapes[] = {{2, 2, 5}, {3, 4, 7}, {1, 3, 12}};
  for (const auto& shape : bn_shapes) {
    for (Mode mode : {Mode::train, Mode::eval}) {
      auto state = BatchNormState::create(shape[1]);
      state.running_mean.assign(shape[1], 0.3f);
      state.running_var.assign(shape[1], 1.7f);
      record(c2s::test::gradient_check(
                 [&state, mode](const std::vector<Tensor>& in) {
                   state.gamma = in[1];
                   state.beta = in[2];
                   return batchnorm1d(in[0], state, mode);
                 },
                 {random_tensor(shape, 52 + shape[2]), random_tensor({shape[1]}, 50, 0.5f, 1.5f),
                  random_tensor({shape[1]}, 51)},
                 99, 5e-3),
             mode == Mode::train ? "batchnorm train" : "batchnorm eval");
    }
  }
  const Shape plain_shapes[] = {{7}, {3, 5}, {2, 3, 4}};
  for (const auto& shape : plain_shapes) {
    record(c2s::test::gradient_check(
               [](const std::vector<Tensor>& in) { return dropout(in[0], 0.3f, Mode::eval, 77); },
               {random_tensor(shape, 60 + shape.size())}),
           "dropout eval");
    record(c2s::test::gradient_check([](const std::vector<Tensor>& in) { return mse_loss(in[0], in[1]); },
                                     {random_tensor(shape, 70 + shape.size()), random_tensor(shape, 80 + shape.size())}),
           "mse");
  }
  const double elapsed = seconds_since(t0);
  c.expect(elapsed < 60.0, "runtime " + fmt(elapsed, 1) + " s");
  c.note("worst rel err " + fmt(worst, 6) + ", " + fmt(elapsed, 1) + " s");
  return c;
}

Checks receptive_fields() {
  Checks c;
  for (Variant v : kVariants) {
    auto m = Model::build(ModelConfig::defaults(v), 3);
    const auto analytic = receptive_field(m.config());
    const auto empirical = c2s::test::empirical_receptive_field(m);
    c.expect(analytic == empirical, to_string(v) + " analytic " + std::to_string(analytic) + " empirical " +
                                        std::to_string(empirical));
    c.expect(!c2s::test::responds_before(m, 60), to_string(v) + " responds before onset");
    c.note(to_string(v) + " " + std::to_string(empirical));
  }
  const auto wn = receptive_field(ModelConfig::defaults(Variant::wavenet));
  const auto lin = receptive_field(ModelConfig::defaults(Variant::linear));
  c.expect(wn == 94, "wavenet receptive field is 94 frames");
  c.expect(lin == 124, "linear receptive field is 124 frames (1240 ms)");
  c.expect(wn != lin, "wavenet and linear receptive fields differ");
  return c;
}

Checks dsp_fidelity() {
  Checks c;
  using namespace c2s::dsp;
  FilterBankSpec spec;
  const auto fc = spec.center_freqs();
  auto level = [](const Spectrogram& s, std::size_t band) {
    const std::size_t f0 = s.frames() / 4, f1 = 3 * s.frames() / 4;
    double acc = 0.0;
    for (std::size_t f = f0; f < f1; ++f) acc += s.values.data()[band * s.frames() + f];
    return acc / static_cast<double>(f1 - f0);
  };
  double worst_center = 0.0, worst_edge = 0.0;
  for (std::size_t i = 0; i < fc.size(); ++i) {
    const double at = db(level(analyze(c2s::test::sine(fc[i], 0.25, 0.6, 24000)), i) / 0.25);
    worst_center = std::max(worst_center, std::abs(at));
    c.expect(std::abs(at) <= 1.0, "band " + std::to_string(i) + " center gain " + fmt(at, 2) + " dB");
    for (double side : {-1.0, 1.0}) {
      const double f = fc[i] * std::pow(2.0, side / 24.0);
      const double off = db(level(analyze(c2s::test::sine(f, 0.25, 0.6, 24000)), i) / 0.25);
      worst_edge = std::max(worst_edge, std::abs(off + 3.0));
      c.expect(std::abs(off + 3.0) <= 1.0, "band " + std::to_string(i) + " edge gain " + fmt(off, 2) + " dB");
    }
  }
  c.note("tone response: worst center dev " + fmt(worst_center, 3) + " dB, worst edge dev " + fmt(worst_edge, 3) +
         " dB over 128 bands");

  // Unit sine, edges (5% each side) excluded.
  const std::size_t n = 4000, edge = n / 20;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(std::numbers::pi * 0.1 * i + 0.3);
  const auto env = hilbert_envelope(x);
  double worst_env = 0.0;
  for (std::size_t i = edge; i < n - edge; ++i) worst_env = std::max(worst_env, std::abs(env[i] - 1.0));
  c.expect(worst_env < 0.01, "hilbert envelope deviation " + fmt(worst_env, 5));
  c.note("hilbert max dev " + fmt(worst_env, 5));

  const double fs = 3051.0;
  const std::size_t samples = static_cast<std::size_t>(2.0 * fs);
  auto tone = [&](double hz) {
    Tensor raw = Tensor::zeros({1, samples});
    for (std::size_t i = 0; i < samples; ++i) {
      raw.mutable_data()[i] = static_cast<float>(std::sin(2.0 * std::numbers::pi * hz * i / fs));
    }
    return high_gamma_envelope(raw, fs);
  };
  const auto pass = tone(100.0), stop = tone(10.0);
  double worst_pass = 0.0, worst_stop = -300.0;
  for (std::size_t f = 40; f < 160; ++f) {
    worst_pass = std::max(worst_pass, std::abs(db(pass.values.data()[f])));
    worst_stop = std::max(worst_stop, db(std::max<double>(stop.values.data()[f], 1e-15)));
  }
  c.expect(worst_pass < 1.0, "100 Hz loss " + fmt(worst_pass, 3) + " dB");
  c.expect(worst_stop < -40.0, "10 Hz measured level " + fmt(worst_stop, 1) + " dB");
  const double design_stop = db(high_gamma_gain({}, 10.0) + 1e-300);
  c.expect(design_stop < -40.0, "10 Hz design gain " + fmt(design_stop, 1) + " dB");
  c.note("high gamma 100 Hz dev " + fmt(worst_pass, 3) + " dB, 10 Hz measured " + fmt(worst_stop, 1) + " dB");
  return c;
}

Checks inversion_consistency() {
  Checks c;
  const auto t0 = clk::now();
  const auto target = dsp::subsample_bands(dsp::analyze(c2s::test::synthetic_vowel(1.0)));
  dsp::InversionOptions opts;
  opts.iterations = 100;
  opts.seed = 1;
  const auto r = dsp::invert_spectrogram(target, opts);
  const auto again = dsp::subsample_bands(dsp::analyze(r.waveform));
  const double elapsed = seconds_since(t0);
  const auto cc = band_correlation(again.values, target.values);
  const double worst = *std::min_element(cc.cc.begin(), cc.cc.end());
  c.expect(cc.mean() >= 0.9, "mean band correlation " + fmt(cc.mean()));
  bool monotone = true;
  for (std::size_t i = 1; i < r.error_history.size(); ++i) {
    monotone = monotone && r.error_history[i] <= r.error_history[i - 1] * (1.0 + 1e-4);
  }
  c.expect(monotone, "envelope error increased");
  c.expect(elapsed < 120.0, "runtime " + fmt(elapsed, 1) + " s");
  c.note("mean cc " + fmt(cc.mean()) + ", min band cc " + fmt(worst) + ", error " + fmt(r.error_history.front()) +
         " -> " + fmt(r.error_history.back()) + ", " + fmt(elapsed, 1) + " s");
  return c;
}

Checks linear_recovery() {
  Checks c;
  const auto t0 = clk::now();
  const auto& clean = noiseless_linear_fold();
  c.expect(clean.ok, "noiseless fold failed: " + clean.error);
  c.expect(clean.report.cc_mean >= 0.95, "noiseless cc_mean " + fmt(clean.report.cc_mean));

  const auto noisy_rec = synth_session(diagonal_session(10.0));
  const auto noisy = run_fold(noisy_rec, kfold_split(noisy_rec, 3), 0, ModelConfig::defaults(Variant::linear),
                              recovery_training(), recovery_windows());
  c.expect(noisy.ok, "10 dB fold failed: " + noisy.error);
  c.expect(noisy.report.cc_mean >= 0.8, "10 dB cc_mean " + fmt(noisy.report.cc_mean));
  const double elapsed = seconds_since(t0);
  c.expect(elapsed < 600.0, "runtime " + fmt(elapsed, 1) + " s");
  c.note("noiseless cc " + fmt(clean.report.cc_mean) + ", 10 dB cc " + fmt(noisy.report.cc_mean) + ", " +
         fmt(elapsed, 1) + " s");
  return c;
}

Checks model_ordering() {
  Checks c;
  const auto t0 = clk::now();
  std::size_t wins = 0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SessionConfig sc;
    sc.stimuli.seed = seed;
    sc.teacher.seed = seed;
    sc.teacher.kernel = TeacherKernel::strf;
    sc.teacher.mode = TeacherMode::gated;
    sc.teacher.gain = 2.0;
    sc.teacher.snr_db = 0.0;
    const auto rec = synth_session(sc);
    const auto plan = kfold_split(rec, 3);
    TrainConfig tc;
    tc.batch_size = 32;
    tc.max_epochs = 90;
    tc.seed = seed;
    std::map<Variant, double> cc;
    for (Variant v : kVariants) {
      // Each model reads exactly its receptive field; test targets are the same for all three.
      const auto mc = ModelConfig::defaults(v);
      WindowOptions wo;
      wo.train_hop = 20;
      wo.context = receptive_field(mc) - 1;
      const auto out = run_fold(rec, plan, 0, mc, tc, wo);
      c.expect(out.ok, to_string(v) + " seed " + std::to_string(seed) + " failed: " + out.error);
      cc[v] = out.ok ? out.report.cc_mean : 0.0;
    }
    const bool win = cc[Variant::wavenet] >= cc[Variant::linear] + 0.03 && cc[Variant::wavenet] >= cc[Variant::resnet];
    wins += win;
    c.note("seed " + std::to_string(seed) + " linear " + fmt(cc[Variant::linear], 3) + " resnet " +
           fmt(cc[Variant::resnet], 3) + " wavenet " + fmt(cc[Variant::wavenet], 3));
    std::fflush(stdout);
  }
  const double elapsed = seconds_since(t0);
  c.expect(wins >= 2, "wavenet ordering held in " + std::to_string(wins) + " of 3 seeds");
  c.expect(elapsed < 2700.0, "runtime " + fmt(elapsed, 1) + " s");
  c.note(std::to_string(wins) + "/3 seeds, " + fmt(elapsed, 1) + " s");
  return c;
}

Checks metric_oracles() {
  Checks c;
  std::mt19937_64 gen(2);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t bands = 1 + gen() % 4, frames = 2 + gen() % 30;
    const Tensor p = random_tensor({bands, frames}, 100 + trial, -3.0f, 3.0f);
    const Tensor q = random_tensor({bands, frames}, 300 + trial, -1.0f, 2.0f);
    const double mse_err = std::abs(mean_squared_error(p.data(), q.data()) - c2s::test::brute_mse(p.data(), q.data()));
    worst = std::max(worst, mse_err);
    c.expect(mse_err < 1e-6, "mse trial " + std::to_string(trial));
    const auto cc = band_correlation(p, q);
    for (std::size_t b = 0; b < bands; ++b) {
      const auto pr = c2s::test::row(p, b), qr = c2s::test::row(q, b);
      const double cc_err = std::abs(cc.cc[b] - c2s::test::brute_pearson(pr, qr));
      worst = std::max(worst, cc_err);
      c.expect(cc_err < 1e-6, "cc trial " + std::to_string(trial));
      std::vector<float> scaled(frames);
      for (std::size_t j = 0; j < frames; ++j) scaled[j] = 2.5f * pr[j] - 0.75f;
      const double affine_err = std::abs(pearson(scaled, qr) - cc.cc[b]);
      worst = std::max(worst, affine_err);
      c.expect(affine_err < 1e-6, "affine trial " + std::to_string(trial));
    }
  }
  c.note("worst abs err " + fmt(worst * 1e9, 3) + "e-9");
  return c;
}

Checks probe_correctness() {
  Checks c;
  {
    auto m = Model::build(ModelConfig::defaults(Variant::linear), 1);
    const auto& conv = m.convs().front();
    const std::size_t k = conv.weight.dim(2);
    double worst = 0.0;
    for (std::size_t e = 0; e < 64; e += 7) {
      const float a = 1.7f;
      const Tensor r = impulse_response(m, e, a);
      for (std::size_t b = 0; b < 32; ++b) {
        for (std::size_t t = 0; t < 100; ++t) {
          double acc = 0.0;
          for (std::size_t tap = 0; tap < k; ++tap) {
            const long src = static_cast<long>(t) - static_cast<long>(k - 1 - tap);
            if (src >= 50 && src < 60) acc += double(conv.weight.data()[(b * 64 + e) * k + tap]) * a;
          }
          worst = std::max(worst, std::abs(r.data()[b * 100 + t] - acc));
        }
      }
    }
    c.expect(worst < 1e-4, "linear brute-force deviation " + fmt(worst, 7));
    c.note("brute-force max dev " + fmt(worst, 7));
  }
  {
    // Energy of electrode e's response in its teacher band (e mod 32), in the
    // normalized units the model was trained in.
    const auto& fold = noiseless_linear_fold();
    c.expect(fold.ok, "training failed: " + fold.error);
    if (fold.ok) {
      Model m = *fold.model;
      const auto map = probe_all(m, fold.probe_amplitude);
      double lowest = 1.0;
      for (std::size_t e = 0; e < 64; ++e) {
        const Tensor& r = map.responses[e];
        const std::size_t bands = r.dim(0), frames = r.dim(1);
        double total = 0.0, own = 0.0;
        for (std::size_t b = 0; b < bands; ++b) {
          for (std::size_t t = 0; t < frames; ++t) {
            const double v = r.data()[b * frames + t];
            total += v * v;
            if (b == e % bands) own += v * v;
          }
        }
        const double share = total > 0.0 ? own / total : 0.0;
        lowest = std::min(lowest, share);
        c.expect(share > 0.5, "electrode " + std::to_string(e) + " teacher-band share " + fmt(share, 3));
      }
      c.note("lowest teacher-band share " + fmt(lowest, 3));
    }
  }
  for (Variant v : kVariants) {
    auto m = Model::build(ModelConfig::defaults(v), 2);
    for (std::size_t e : {0u, 31u, 63u}) {
      const Tensor r = impulse_response(m, e, 4.0f);
      bool before = false, after = false;
      for (std::size_t b = 0; b < r.dim(0); ++b) {
        for (std::size_t t = 0; t < r.dim(1); ++t) {
          const float val = r.data()[b * r.dim(1) + t];
          before = before || (t < 50 && val != 0.0f);
          after = after || (t >= 50 && val != 0.0f);
        }
      }
      c.expect(!before, to_string(v) + " responds before frame 50");
      c.expect(after, to_string(v) + " has no response");
    }
  }
  return c;
}

Checks determinism_and_hygiene() {
  Checks c;
  SessionConfig sc;
  sc.stimuli.words = 6;
  sc.stimuli.seed = 5;
  sc.teacher.seed = 6;
  sc.teacher.mode = TeacherMode::gated;
  sc.teacher.snr_db = 5.0;
  const auto a = synth_session(sc), b = synth_session(sc);
  c.expect(bit_identical(a.ecog.values, b.ecog.values) && bit_identical(a.spec.values, b.spec.values),
           "datasets differ");
  bool same_annotations = a.annotations.size() == b.annotations.size();
  for (std::size_t i = 0; same_annotations && i < a.annotations.size(); ++i) {
    same_annotations = a.annotations[i].onset_frame == b.annotations[i].onset_frame &&
                       a.annotations[i].word_id == b.annotations[i].word_id;
  }
  c.expect(same_annotations, "annotations differ");

  const auto plan = kfold_split(a, 3);
  WindowOptions wo;
  wo.train_hop = 7;
  TrainConfig tc;
  tc.batch_size = 16;
  tc.max_epochs = 3;
  tc.seed = 4;
  for (Variant v : kVariants) {
    const auto x = run_fold(a, plan, 1, ModelConfig::defaults(v), tc, wo);
    const auto y = run_fold(b, plan, 1, ModelConfig::defaults(v), tc, wo);
    c.expect(x.ok && y.ok, to_string(v) + " training failed");
    if (!x.ok || !y.ok) continue;
    bool same_curve = x.training.history.size() == y.training.history.size();
    for (std::size_t i = 0; same_curve && i < x.training.history.size(); ++i) {
      same_curve = x.training.history[i].train_loss == y.training.history[i].train_loss &&
                   x.training.history[i].val_loss == y.training.history[i].val_loss;
    }
    c.expect(same_curve, to_string(v) + " loss curves differ");
    c.expect(x.report.to_json().dump() == y.report.to_json().dump(), to_string(v) + " reports differ");
    c.expect(checkpoint_id(*x.model) == checkpoint_id(*y.model), to_string(v) + " parameters differ");

    Model mx = *x.model, my = *y.model;
    const auto px = probe_all(mx, x.probe_amplitude), py = probe_all(my, y.probe_amplitude);
    bool same_probe = true;
    for (std::size_t e = 0; e < 64; ++e) same_probe = same_probe && bit_identical(px.responses[e], py.responses[e]);
    c.expect(same_probe, to_string(v) + " impulse responses differ");
    std::vector<Tensor> tiles_x, tiles_y;
    for (std::size_t e = 0; e < 64; ++e) {
      tiles_x.push_back(display_response(px.responses[e], x.norm));
      tiles_y.push_back(display_response(py.responses[e], y.norm));
    }
    c.expect(encode_pgm(montage(tiles_x)) == encode_pgm(montage(tiles_y)), to_string(v) + " montages differ");
    dsp::InversionOptions io;
    io.iterations = 5;
    io.seed = 9;
    const auto sx = sonify(tiles_x[3], io), sy = sonify(tiles_y[3], io);
    c.expect(sx.waveform.samples == sy.waveform.samples, to_string(v) + " sonification differs");
  }

  // Exhaustive fold hygiene on the full 50-word, 3-repetition session at hop 1.
  const auto& rec = noiseless_session();
  const auto full_plan = kfold_split(rec, 3);
  WindowOptions every;
  every.train_hop = 1;
  std::size_t windows_checked = 0;
  for (std::size_t fold = 0; fold < 3; ++fold) {
    std::set<std::size_t> words;
    for (auto idx : full_plan.test_utterances[fold]) {
      words.insert(rec.annotations[idx].word_id);
      c.expect(rec.annotations[idx].repetition == fold, "fold " + std::to_string(fold) + " repetition");
    }
    c.expect(words.size() == 50 && full_plan.test_utterances[fold].size() == 50,
             "fold " + std::to_string(fold) + " tests " + std::to_string(words.size()) + " words");
    const auto w = fold_windows(rec, full_plan, fold, every);
    std::vector<char> test_frame(rec.frames(), 0);
    for (auto idx : full_plan.test_utterances[fold]) {
      const auto span = utterance_span(rec.annotations[idx], rec.lag_frames);
      for (std::size_t t = span.begin; t < std::min(span.end, rec.frames()); ++t) test_frame[t] = 1;
    }
    for (auto off : w.test) {
      for (std::size_t t = off - every.context; t < off + every.length; ++t) test_frame[t] = 1;
    }
    std::size_t touching = 0;
    for (const auto* set : {&w.train, &w.validation}) {
      for (auto off : *set) {
        ++windows_checked;
        for (std::size_t t = off - every.context; t < off + every.length; ++t) touching += test_frame[t];
      }
    }
    c.expect(touching == 0, "fold " + std::to_string(fold) + ": " + std::to_string(touching) +
                                " train/validation frames overlap test frames");
    c.expect(!w.train.empty() && !w.validation.empty(), "fold " + std::to_string(fold) + " has no training windows");
  }
  c.note(std::to_string(windows_checked) + " train/validation windows checked against test frames");
  return c;
}

Checks checkpoint_round_trip() {
  Checks c;
  for (Variant v : kVariants) {
    auto m = Model::build(ModelConfig::defaults(v), 21);
    {
      NoGradScope guard;
      (void)m.forward(random_tensor({4, 64, 150}, 22), Mode::train, 1);
    }
    NormStats norm;
    norm.ecog_mean.assign(64, 0.5f);
    norm.ecog_std.assign(64, 2.0f);
    norm.spec_mean.assign(32, 0.25f);
    norm.spec_std.assign(32, 0.75f);
    const auto dir = c2s::test::temp_dir("acceptance_ckpt_" + to_string(v));
    const auto saved = save_checkpoint(dir, m, norm, {});
    auto loaded = load_checkpoint(dir);
    c.expect(loaded.meta.checkpoint_id == saved.checkpoint_id, to_string(v) + " checkpoint id");
    const Tensor x = random_tensor({64, 300}, 23);
    NoGradScope guard;
    c.expect(bit_identical(m.forward(x, Mode::eval), loaded.model.forward(x, Mode::eval)),
             to_string(v) + " eval outputs differ");
    std::filesystem::remove_all(dir);
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Checks()>>> criteria = {
      {"gradient correctness", gradient_correctness},
      {"receptive field", receptive_fields},
      {"dsp fidelity", dsp_fidelity},
      {"inversion self-consistency", inversion_consistency},
      {"linear-teacher recovery", linear_recovery},
      {"model ordering", model_ordering},
      {"metric oracle equivalence", metric_oracles},
      {"impulse-probe correctness", probe_correctness},
      {"determinism and fold hygiene", determinism_and_hygiene},
      {"checkpoint round trip", checkpoint_round_trip},
  };
  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::strtoul(argv[i], nullptr, 10));

  std::size_t failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected.empty() && !selected.count(i + 1)) continue;
    const auto t0 = clk::now();
    bool ok = false;
    std::string detail;
    try {
      const auto checks = criteria[i].second();
      ok = checks.ok();
      detail = checks.summary();
    } catch (const std::exception& e) {
      detail = std::string("error: ") + e.what();
    }
    failed += !ok;
    std::printf("%s criterion %zu: %s (%s) [%.1f s]\n", ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
