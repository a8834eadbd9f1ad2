#include "c2s/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include "c2s/ctsr.hpp"
#include "c2s/errors.hpp"
#include "c2s/json_reader.hpp"
#include "c2s/log.hpp"
#include "c2s/random.hpp"

namespace c2s {

std::size_t lag_samples(double lag_seconds, double rate) {
  if (!(lag_seconds >= 0.0)) throw ConfigError("lag must be non-negative");
  return static_cast<std::size_t>(std::llround(lag_seconds * rate));
}

Tensor delay_frames(const Tensor& x, std::size_t lag) {
  if (x.ndim() != 2) throw ShapeError("delay_frames expects [C x T], got " + shape_string(x.shape()));
  const std::size_t c = x.dim(0), t = x.dim(1);
  std::vector<float> out(c * t, 0.0f);
  auto in = x.data();
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = lag; j < t; ++j) out[i * t + j] = in[i * t + j - lag];
  }
  return Tensor({c, t}, std::move(out));
}

namespace {

Tensor truncate_frames(const Tensor& x, std::size_t frames) {
  const std::size_t c = x.dim(0), t = x.dim(1);
  if (frames == t) return x;
  std::vector<float> out(c * frames);
  auto in = x.data();
  for (std::size_t i = 0; i < c; ++i) std::copy_n(in.begin() + i * t, frames, out.begin() + i * frames);
  return Tensor({c, frames}, std::move(out));
}

}  // namespace

PairedRecording align(const dsp::Waveform& speech, const Tensor& ecog_raw, double ecog_rate, const AlignOptions& o) {
  const std::size_t lag = lag_samples(o.lag_seconds, speech.sample_rate);
  if (lag >= speech.samples.size()) {
    throw ConfigError("lag of " + std::to_string(lag) + " samples exceeds the " +
                      std::to_string(speech.samples.size()) + "-sample recording");
  }
  dsp::Waveform delayed;
  delayed.sample_rate = speech.sample_rate;
  delayed.samples.assign(lag, 0.0f);
  delayed.samples.insert(delayed.samples.end(), speech.samples.begin(), speech.samples.end());

  auto spec = dsp::subsample_bands(dsp::analyze(delayed, o.filterbank, o.analysis), o.band_group);
  auto ecog = dsp::high_gamma_envelope(ecog_raw, ecog_rate, o.high_gamma);
  if (std::abs(ecog.frame_rate - spec.frame_rate) > 1e-9) {
    throw ConfigError("envelope and spectrogram frame rates differ");
  }
  const std::size_t frames = std::min(spec.frames(), ecog.frames());
  PairedRecording rec;
  rec.spec = spec;
  rec.spec.values = truncate_frames(spec.values, frames);
  rec.ecog = ecog;
  rec.ecog.values = truncate_frames(ecog.values, frames);
  rec.lag_frames = lag_samples(o.lag_seconds, spec.frame_rate);
  return rec;
}

PairedRecording align_features(const dsp::EcogEnvelope& ecog, const dsp::Spectrogram& spec, std::size_t lag_frames) {
  if (lag_frames >= spec.frames()) {
    throw ConfigError("lag of " + std::to_string(lag_frames) + " frames exceeds the " +
                      std::to_string(spec.frames()) + "-frame recording");
  }
  const std::size_t frames = std::min(ecog.frames(), spec.frames());
  PairedRecording rec;
  rec.ecog = ecog;
  rec.ecog.values = truncate_frames(ecog.values, frames);
  rec.spec = spec;
  rec.spec.values = truncate_frames(lag_frames ? delay_frames(spec.values, lag_frames) : spec.values, frames);
  rec.lag_frames = lag_frames;
  return rec;
}

Tensor NormStats::to_tensor() const {
  const std::size_t n = ecog_mean.size() + spec_mean.size();
  std::vector<float> v;
  v.reserve(2 * n);
  v.insert(v.end(), ecog_mean.begin(), ecog_mean.end());
  v.insert(v.end(), spec_mean.begin(), spec_mean.end());
  v.insert(v.end(), ecog_std.begin(), ecog_std.end());
  v.insert(v.end(), spec_std.begin(), spec_std.end());
  return Tensor({2, n}, std::move(v));
}

NormStats NormStats::from_tensor(const Tensor& t, std::size_t electrodes) {
  if (t.ndim() != 2 || t.dim(0) != 2 || t.dim(1) <= electrodes) {
    throw FormatError("normalization statistics must be [2 x (E + B)], got " + shape_string(t.shape()));
  }
  const std::size_t n = t.dim(1);
  auto d = t.data();
  NormStats s;
  s.ecog_mean.assign(d.begin(), d.begin() + electrodes);
  s.spec_mean.assign(d.begin() + electrodes, d.begin() + n);
  s.ecog_std.assign(d.begin() + n, d.begin() + n + electrodes);
  s.spec_std.assign(d.begin() + n + electrodes, d.end());
  for (float v : s.ecog_std) {
    if (!(v > 0.0f)) throw FormatError("normalization statistics contain a non-positive std");
  }
  for (float v : s.spec_std) {
    if (!(v > 0.0f)) throw FormatError("normalization statistics contain a non-positive std");
  }
  return s;
}

namespace {

void row_stats(const Tensor& x, const std::vector<char>& keep, const char* what, std::vector<float>& mean,
               std::vector<float>& stdev) {
  const std::size_t c = x.dim(0), t = x.dim(1);
  auto d = x.data();
  mean.assign(c, 0.0f);
  stdev.assign(c, 1.0f);
  std::size_t count = 0;
  for (char k : keep) count += k ? 1 : 0;
  if (count == 0) throw ConfigError("no frames left for normalization statistics");
  for (std::size_t i = 0; i < c; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < t; ++j) {
      if (keep[j]) s += d[i * t + j];
    }
    const double mu = s / static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t j = 0; j < t; ++j) {
      if (keep[j]) ss += (d[i * t + j] - mu) * (d[i * t + j] - mu);
    }
    double sd = std::sqrt(ss / static_cast<double>(count));
    if (sd < kStdFloor) {
      log::warn(std::string(what) + " channel " + std::to_string(i) + " has zero variance; it normalizes to zero");
      sd = kStdFloor;
    }
    mean[i] = static_cast<float>(mu);
    stdev[i] = static_cast<float>(sd);
  }
}

}  // namespace

NormStats compute_norm_stats(const PairedRecording& rec, std::span<const FrameRange> exclude) {
  const std::size_t t = rec.frames();
  std::vector<char> keep(t, 1);
  for (const auto& r : exclude) {
    for (std::size_t j = r.begin; j < std::min(r.end, t); ++j) keep[j] = 0;
  }
  NormStats s;
  row_stats(rec.ecog.values, keep, "envelope", s.ecog_mean, s.ecog_std);
  row_stats(rec.spec.values, keep, "spectrogram", s.spec_mean, s.spec_std);
  return s;
}

Tensor normalize_rows(const Tensor& x, std::span<const float> mean, std::span<const float> stdev) {
  const std::size_t c = x.dim(0), t = x.dim(1);
  if (mean.size() != c || stdev.size() != c) {
    throw ShapeError("normalization statistics cover " + std::to_string(mean.size()) + " channels, data has " +
                     std::to_string(c));
  }
  std::vector<float> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < t; ++j) out[i * t + j] = (out[i * t + j] - mean[i]) / stdev[i];
  }
  return Tensor(x.shape(), std::move(out));
}

Tensor denormalize_rows(const Tensor& x, std::span<const float> mean, std::span<const float> stdev) {
  const std::size_t c = x.dim(0), t = x.dim(1);
  if (mean.size() != c || stdev.size() != c) {
    throw ShapeError("normalization statistics cover " + std::to_string(mean.size()) + " channels, data has " +
                     std::to_string(c));
  }
  std::vector<float> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < t; ++j) out[i * t + j] = out[i * t + j] * stdev[i] + mean[i];
  }
  return Tensor(x.shape(), std::move(out));
}

PairedRecording normalize(const PairedRecording& rec, const NormStats& s) {
  PairedRecording out = rec;
  out.ecog.values = normalize_rows(rec.ecog.values, s.ecog_mean, s.ecog_std);
  out.spec.values = normalize_rows(rec.spec.values, s.spec_mean, s.spec_std);
  return out;
}

PairedRecording denormalize(const PairedRecording& rec, const NormStats& s) {
  PairedRecording out = rec;
  out.ecog.values = denormalize_rows(rec.ecog.values, s.ecog_mean, s.ecog_std);
  out.spec.values = denormalize_rows(rec.spec.values, s.spec_mean, s.spec_std);
  return out;
}

namespace {

Tensor window_of(const Tensor& x, std::size_t begin, std::size_t len) {
  const std::size_t c = x.dim(0), t = x.dim(1);
  std::vector<float> out(c * len);
  auto d = x.data();
  for (std::size_t i = 0; i < c; ++i) std::copy_n(d.begin() + i * t + begin, len, out.begin() + i * len);
  return Tensor({c, len}, std::move(out));
}

}  // namespace

Tensor SegmentSet::ecog_window(std::size_t i) const {
  return window_of(ecog, offsets.at(i) - context, context + length);
}

Tensor SegmentSet::spec_window(std::size_t i) const { return window_of(spec, offsets.at(i), length); }

SegmentSet segment(const PairedRecording& rec, std::size_t length) {
  if (length == 0) throw ConfigError("window length must be >= 1");
  if (rec.frames() < length) {
    throw ConfigError("recording of " + std::to_string(rec.frames()) + " frames is shorter than one " +
                      std::to_string(length) + "-frame window");
  }
  SegmentSet s;
  s.ecog = rec.ecog.values;
  s.spec = rec.spec.values;
  s.length = length;
  s.offsets.resize(rec.frames() - length + 1);
  for (std::size_t i = 0; i < s.offsets.size(); ++i) s.offsets[i] = i;
  return s;
}

Batch gather(const Tensor& ecog, const Tensor& spec, std::span<const std::size_t> offsets, std::size_t length,
             std::size_t context) {
  const std::size_t e = ecog.dim(0), b = spec.dim(0), t = ecog.dim(1);
  const std::size_t n = offsets.size(), span = context + length;
  std::vector<float> in(n * e * span), tg(n * b * length);
  auto ed = ecog.data();
  auto sd = spec.data();
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t o = offsets[k];
    if (o < context || o + length > t) throw ShapeError("window offset " + std::to_string(o) + " out of range");
    for (std::size_t i = 0; i < e; ++i) {
      std::copy_n(ed.begin() + i * t + (o - context), span, in.begin() + (k * e + i) * span);
    }
    for (std::size_t i = 0; i < b; ++i) std::copy_n(sd.begin() + i * t + o, length, tg.begin() + (k * b + i) * length);
  }
  return {Tensor({n, e, span}, std::move(in)), Tensor({n, b, length}, std::move(tg))};
}

FoldPlan kfold_split(const PairedRecording& rec, std::size_t k) {
  if (k < 2) throw ConfigError("k-fold split needs k >= 2");
  std::map<std::size_t, std::vector<std::size_t>> reps_of_word;
  for (const auto& a : rec.annotations) reps_of_word[a.word_id].push_back(a.repetition);
  if (reps_of_word.empty()) throw ConfigError("recording has no word annotations");
  for (auto& [word, reps] : reps_of_word) {
    std::sort(reps.begin(), reps.end());
    bool ok = reps.size() == k;
    for (std::size_t i = 0; ok && i < k; ++i) ok = reps[i] == i;
    if (!ok) {
      throw ConfigError("word " + std::to_string(word) + " has " + std::to_string(reps.size()) +
                        " repetitions; a " + std::to_string(k) + "-fold split needs repetitions 0.." +
                        std::to_string(k - 1));
    }
  }
  FoldPlan plan;
  plan.k = k;
  plan.test_utterances.resize(k);
  for (std::size_t i = 0; i < rec.annotations.size(); ++i) {
    plan.test_utterances[rec.annotations[i].repetition].push_back(i);
  }
  return plan;
}

void WindowOptions::validate() const {
  if (length < 1) throw ConfigError("window.length must be >= 1");
  if (train_hop < 1) throw ConfigError("window.train_hop must be >= 1");
  if (!(val_fraction >= 0.0) || val_fraction >= 1.0) throw ConfigError("window.val_fraction must lie in [0, 1)");
  if (val_blocks < 1) throw ConfigError("window.val_blocks must be >= 1");
}

nlohmann::json to_json(const WindowOptions& w) {
  return {{"length", w.length},
          {"context", w.context},
          {"train_hop", w.train_hop},
          {"val_fraction", w.val_fraction},
          {"val_blocks", w.val_blocks}};
}

WindowOptions window_options_from_json(const nlohmann::json& j, const std::string& pointer) {
  WindowOptions w;
  JsonReader r(j, pointer);
  r.read("length", w.length);
  r.read("context", w.context);
  r.read("train_hop", w.train_hop);
  r.read("val_fraction", w.val_fraction);
  r.read("val_blocks", w.val_blocks);
  r.finish();
  return w;
}

FrameRange utterance_span(const WordAnnotation& a, std::size_t lag_frames) {
  return {a.onset_frame, a.offset_frame + lag_frames};
}

FoldWindows fold_windows(const PairedRecording& rec, const FoldPlan& plan, std::size_t fold,
                         const WindowOptions& o) {
  o.validate();
  if (fold >= plan.k) throw ConfigError("fold " + std::to_string(fold) + " out of range for k=" + std::to_string(plan.k));
  const std::size_t frames = rec.frames();
  if (frames < o.context + o.length) throw ConfigError("recording too short for one window with context");
  const std::size_t lo = o.context, hi = frames - o.length;

  FoldWindows w;
  for (std::size_t idx : plan.test_utterances[fold]) {
    const auto& a = rec.annotations.at(idx);
    const FrameRange span = utterance_span(a, rec.lag_frames);
    const std::size_t center = (a.onset_frame + a.offset_frame) / 2 + rec.lag_frames;
    const std::size_t start = center >= o.length / 2 ? center - o.length / 2 : 0;
    const std::size_t off = std::clamp(start, lo, hi);
    w.test.push_back(off);
    w.test_annotation.push_back(idx);
    w.reserved.push_back(span);
    w.reserved.push_back({off - o.context, off + o.length});
  }
  std::sort(w.reserved.begin(), w.reserved.end(),
            [](const FrameRange& a, const FrameRange& b) { return a.begin < b.begin; });
  std::vector<FrameRange> merged;
  for (const auto& r : w.reserved) {
    if (!merged.empty() && r.begin <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, r.end);
    } else {
      merged.push_back(r);
    }
  }
  w.reserved = std::move(merged);

  std::vector<std::size_t> candidates;
  std::size_t next = 0;  // first reserved range that may still overlap
  for (std::size_t off = lo; off <= hi; off += o.train_hop) {
    const FrameRange extent{off - o.context, off + o.length};
    while (next < w.reserved.size() && w.reserved[next].end <= extent.begin) ++next;
    if (next < w.reserved.size() && w.reserved[next].overlaps(extent)) continue;
    candidates.push_back(off);
  }

  // Validation: the tail of each of val_blocks contiguous stretches.
  const std::size_t n = candidates.size();
  const std::size_t blocks = std::min(o.val_blocks, std::max<std::size_t>(n, 1));
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t begin = n * b / blocks, end = n * (b + 1) / blocks;
    const auto held = static_cast<std::size_t>(std::llround(o.val_fraction * static_cast<double>(end - begin)));
    for (std::size_t i = begin; i < end; ++i) {
      (i >= end - held ? w.validation : w.train).push_back(candidates[i]);
    }
  }
  return w;
}

std::string to_string(TeacherMode m) { return m == TeacherMode::linear ? "linear" : "gated"; }
std::string to_string(TeacherKernel k) { return k == TeacherKernel::strf ? "strf" : "diagonal"; }

void TeacherSpec::validate() const {
  if (electrodes < 1) throw ConfigError("teacher.electrodes must be >= 1");
  if (taps < 1) throw ConfigError("teacher.taps must be >= 1");
  if (!(noise_std >= 0.0)) throw ConfigError("teacher.noise_std must be non-negative");
  if (snr_db && !std::isfinite(*snr_db)) throw ConfigError("teacher.snr_db must be finite");
  if (!std::isfinite(gain)) throw ConfigError("teacher.gain must be finite");
}

nlohmann::json to_json(const TeacherSpec& t) {
  nlohmann::json j{{"mode", to_string(t.mode)},   {"kernel", to_string(t.kernel)}, {"electrodes", t.electrodes},
                   {"taps", t.taps},              {"gain", t.gain},                {"noise_std", t.noise_std},
                   {"seed", t.seed}};
  if (t.snr_db) j["snr_db"] = *t.snr_db;
  return j;
}

TeacherSpec teacher_from_json(const nlohmann::json& j, const std::string& pointer) {
  JsonReader r(j, pointer);
  TeacherSpec t;
  std::string mode, kernel;
  if (r.read("mode", mode)) {
    if (mode == "linear") t.mode = TeacherMode::linear;
    else if (mode == "gated") t.mode = TeacherMode::gated;
    else JsonReader::fail(r.path("mode"), "expected \"linear\" or \"gated\"");
  }
  if (r.read("kernel", kernel)) {
    if (kernel == "strf") t.kernel = TeacherKernel::strf;
    else if (kernel == "diagonal") t.kernel = TeacherKernel::diagonal;
    else JsonReader::fail(r.path("kernel"), "expected \"strf\" or \"diagonal\"");
  }
  r.read("electrodes", t.electrodes);
  r.read("taps", t.taps);
  r.read("gain", t.gain);
  r.read("noise_std", t.noise_std);
  double snr = 0.0;
  if (const auto* s = r.child("snr_db"); s && !s->is_null()) {
    if (!s->is_number()) JsonReader::fail(r.path("snr_db"), "expected a number or null");
    snr = s->get<double>();
    t.snr_db = snr;
  }
  r.read("seed", t.seed);
  r.finish();
  try {
    t.validate();
  } catch (const ConfigError& e) {
    JsonReader::fail(pointer.empty() ? "/" : pointer, e.what());
  }
  return t;
}

Tensor make_teacher_kernel(const TeacherSpec& t, std::size_t bands) {
  t.validate();
  const std::size_t e = t.electrodes, taps = t.taps;
  std::vector<float> k(e * bands * taps, 0.0f);
  if (t.kernel == TeacherKernel::diagonal) {
    for (std::size_t i = 0; i < e; ++i) k[(i * bands + i % bands) * taps] = 1.0f;
    return Tensor({e, bands, taps}, std::move(k));
  }
  Rng rng(derive_seed(t.seed, 11));
  for (std::size_t i = 0; i < e; ++i) {
    const double best = static_cast<double>(i % bands) + rng.uniform(-0.5, 0.5);
    const double width = rng.uniform(0.8, 2.5);
    const double peak = rng.uniform(1.0, std::max(1.0, static_cast<double>(taps) / 2.0));
    // Surround area relative to the excitatory center; near 1 the tuning is balanced.
    const double inhibition = rng.uniform(0.7, 1.0);
    double norm = 0.0;
    for (std::size_t b = 0; b < bands; ++b) {
      const double db = static_cast<double>(b) - best;
      const double spectral =
          std::exp(-db * db / (2 * width * width)) - inhibition / 3.0 * std::exp(-db * db / (2 * 9 * width * width));
      for (std::size_t tau = 0; tau < taps; ++tau) {
        const double u = (static_cast<double>(tau) + 1.0) / (peak + 1.0);
        const double temporal = u * std::exp(1.0 - u);
        const double v = spectral * temporal;
        k[(i * bands + b) * taps + tau] = static_cast<float>(v);
        norm += v * v;
      }
    }
    const double scale = norm > 0.0 ? 1.0 / std::sqrt(norm) : 0.0;
    for (std::size_t j = 0; j < bands * taps; ++j) k[i * bands * taps + j] *= static_cast<float>(scale);
  }
  return Tensor({e, bands, taps}, std::move(k));
}

namespace {

std::vector<double> linear_encode(const Tensor& spec, const Tensor& kernel) {
  const std::size_t e = kernel.dim(0), bands = kernel.dim(1), taps = kernel.dim(2);
  const std::size_t t = spec.dim(1);
  auto s = spec.data();
  auto k = kernel.data();
  std::vector<double> y(e * t, 0.0);
  for (std::size_t i = 0; i < e; ++i) {
    double* row = y.data() + i * t;
    for (std::size_t b = 0; b < bands; ++b) {
      const float* in = s.data() + b * t;
      for (std::size_t tau = 0; tau < taps; ++tau) {
        const double w = k[(i * bands + b) * taps + tau];
        if (w == 0.0) continue;
        for (std::size_t j = tau; j < t; ++j) row[j] += w * in[j - tau];
      }
    }
  }
  return y;
}

}  // namespace

dsp::EcogEnvelope teacher_encode(const dsp::Spectrogram& spec, const Tensor& kernel, const TeacherSpec& t) {
  t.validate();
  if (kernel.ndim() != 3 || kernel.dim(1) != spec.bands()) {
    throw ShapeError("teacher kernel " + shape_string(kernel.shape()) + " does not match " +
                     std::to_string(spec.bands()) + " bands");
  }
  const std::size_t e = kernel.dim(0), frames = spec.frames();
  if (kernel.dim(2) > frames) {
    throw ConfigError("teacher kernel spans " + std::to_string(kernel.dim(2)) + " lags but only " +
                      std::to_string(frames) + " frames of history exist");
  }
  auto y = linear_encode(spec.values, kernel);
  if (t.mode == TeacherMode::gated) {
    for (double& v : y) v = v / (1.0 + std::exp(-t.gain * v));
  }
  if (t.noise_std > 0.0 || t.snr_db) {
    Rng rng(derive_seed(t.seed, 99));
    for (std::size_t i = 0; i < e; ++i) {
      double* row = y.data() + i * frames;
      double sd = t.noise_std;
      if (t.snr_db) {
        double mean = 0.0, ss = 0.0;
        for (std::size_t j = 0; j < frames; ++j) mean += row[j];
        mean /= static_cast<double>(frames);
        for (std::size_t j = 0; j < frames; ++j) ss += (row[j] - mean) * (row[j] - mean);
        sd = std::sqrt(ss / static_cast<double>(frames)) * std::pow(10.0, -*t.snr_db / 20.0);
      }
      for (std::size_t j = 0; j < frames; ++j) row[j] += sd * rng.normal();
    }
  }
  std::vector<float> out(y.begin(), y.end());
  return {Tensor({e, frames}, std::move(out)), spec.frame_rate};
}

dsp::EcogEnvelope teacher_encode(const dsp::Spectrogram& spec, const TeacherSpec& t) {
  return teacher_encode(spec, make_teacher_kernel(t, spec.bands()), t);
}

Tensor calibrate_teacher_kernel(const Tensor& kernel, const dsp::Spectrogram& spec) {
  const std::size_t e = kernel.dim(0), per = kernel.dim(1) * kernel.dim(2), t = spec.frames();
  auto y = linear_encode(spec.values, kernel);
  std::vector<float> k(kernel.data().begin(), kernel.data().end());
  for (std::size_t i = 0; i < e; ++i) {
    double mean = 0.0, ss = 0.0;
    for (std::size_t j = 0; j < t; ++j) mean += y[i * t + j];
    mean /= static_cast<double>(t);
    for (std::size_t j = 0; j < t; ++j) ss += (y[i * t + j] - mean) * (y[i * t + j] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(t));
    if (sd <= 0.0) continue;
    for (std::size_t j = 0; j < per; ++j) k[i * per + j] = static_cast<float>(k[i * per + j] / sd);
  }
  return Tensor(kernel.shape(), std::move(k));
}

void SessionConfig::validate() const {
  stimuli.validate();
  teacher.validate();
  filterbank.validate(stimuli.sample_rate);
  if (band_group < 1 || filterbank.num_bands % band_group != 0) {
    throw ConfigError("dsp.band_group must divide the number of filterbank bands");
  }
  if (!(lag_seconds >= 0.0)) throw ConfigError("dsp.lag_ms must be non-negative");
  if (std::abs(analysis.frame_rate - stimuli.frame_rate) > 1e-9) {
    throw ConfigError("stimulus and analysis frame rates differ");
  }
}

nlohmann::json to_json(const SessionConfig& c) {
  return {{"stimuli",
           {{"words", c.stimuli.words},
            {"reps", c.stimuli.reps},
            {"seed", c.stimuli.seed},
            {"sample_rate", c.stimuli.sample_rate},
            {"word_ms", c.stimuli.word_ms},
            {"gap_ms", c.stimuli.gap_ms},
            {"lead_ms", c.stimuli.lead_ms}}},
          {"teacher", to_json(c.teacher)},
          {"dsp",
           {{"num_bands", c.filterbank.num_bands},
            {"f_low", c.filterbank.f_low},
            {"f_high", c.filterbank.f_high},
            {"bandwidth_octaves", c.filterbank.bandwidth_octaves},
            {"band_group", c.band_group},
            {"frame_rate", c.analysis.frame_rate},
            {"smoothing_pass_hz", c.analysis.smoothing_pass_hz},
            {"smoothing_stop_hz", c.analysis.smoothing_stop_hz},
            {"lag_ms", c.lag_seconds * 1000.0}}}};
}

PairedRecording synth_session(const SessionConfig& c) {
  c.validate();
  const auto stim = synth_stimuli(c.stimuli);
  auto spec = dsp::subsample_bands(dsp::analyze(stim.wave, c.filterbank, c.analysis), c.band_group);

  // The teacher listens to the z-scored spectrogram so its kernel scale is band-independent.
  const std::size_t b = spec.bands(), t = spec.frames();
  std::vector<float> mean(b), sd(b);
  auto sv = spec.values.data();
  for (std::size_t i = 0; i < b; ++i) {
    double m = 0.0, ss = 0.0;
    for (std::size_t j = 0; j < t; ++j) m += sv[i * t + j];
    m /= static_cast<double>(t);
    for (std::size_t j = 0; j < t; ++j) ss += (sv[i * t + j] - m) * (sv[i * t + j] - m);
    mean[i] = static_cast<float>(m);
    sd[i] = std::max(static_cast<float>(std::sqrt(ss / static_cast<double>(t))), kStdFloor);
  }
  dsp::Spectrogram z = spec;
  z.values = normalize_rows(spec.values, mean, sd);

  const Tensor kernel = calibrate_teacher_kernel(make_teacher_kernel(c.teacher, b), z);
  auto ecog = teacher_encode(z, kernel, c.teacher);
  auto rec = align_features(ecog, spec, lag_samples(c.lag_seconds, c.analysis.frame_rate));
  rec.annotations = stim.annotations;
  return rec;
}

void write_session(const std::filesystem::path& dir, const PairedRecording& rec, const nlohmann::json& meta) {
  std::filesystem::create_directories(dir);
  write_ctsr(dir / "ecog.ctsr", rec.ecog.values);
  write_ctsr(dir / "spec.ctsr", rec.spec.values);
  nlohmann::json ann = nlohmann::json::array();
  for (const auto& a : rec.annotations) {
    ann.push_back({{"word_id", a.word_id},
                   {"repetition", a.repetition},
                   {"onset_frame", a.onset_frame},
                   {"offset_frame", a.offset_frame}});
  }
  write_json_file(dir / "annotations.json", ann);
  nlohmann::json m = meta;
  m["frame_rate"] = rec.spec.frame_rate;
  m["lag_frames"] = rec.lag_frames;
  m["band_centers"] = rec.spec.band_centers;
  m["frames"] = rec.frames();
  m["electrodes"] = rec.ecog.electrodes();
  m["bands"] = rec.spec.bands();
  write_json_file(dir / "meta.json", m);
}

PairedRecording read_session(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("session directory " + dir.string() + " does not exist");
  PairedRecording rec;
  rec.ecog.values = read_ctsr(dir / "ecog.ctsr");
  rec.spec.values = read_ctsr(dir / "spec.ctsr");
  if (rec.ecog.values.ndim() != 2 || rec.spec.values.ndim() != 2 ||
      rec.ecog.values.dim(1) != rec.spec.values.dim(1)) {
    throw FormatError(dir.string() + ": ecog.ctsr and spec.ctsr must be [C x T] with equal frame counts");
  }
  const auto meta = read_json_file(dir / "meta.json");
  try {
    rec.spec.frame_rate = meta.at("frame_rate").get<double>();
    rec.ecog.frame_rate = rec.spec.frame_rate;
    rec.lag_frames = meta.at("lag_frames").get<std::size_t>();
    rec.spec.band_centers = meta.at("band_centers").get<std::vector<double>>();
    for (const auto& a : read_json_file(dir / "annotations.json")) {
      rec.annotations.push_back({a.at("word_id").get<std::size_t>(), a.at("repetition").get<std::size_t>(),
                                 a.at("onset_frame").get<std::size_t>(), a.at("offset_frame").get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir.string() + ": malformed session metadata (" + e.what() + ")");
  }
  for (const auto& a : rec.annotations) {
    if (a.offset_frame <= a.onset_frame || a.offset_frame > rec.frames()) {
      throw FormatError(dir.string() + ": annotation outside the recording");
    }
  }
  return rec;
}

}  // namespace c2s
