#include "c2s/stimuli.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "c2s/errors.hpp"
#include "c2s/random.hpp"

namespace c2s {

void StimulusOptions::validate() const {
  if (words < 1) throw ConfigError("stimuli.words must be >= 1");
  if (reps < 1) throw ConfigError("stimuli.reps must be >= 1");
  if (!(sample_rate > 0.0) || !(frame_rate > 0.0)) throw ConfigError("stimulus rates must be positive");
  if (!(word_ms > 0.0) || !(gap_ms >= 0.0) || !(lead_ms >= 0.0)) throw ConfigError("stimulus durations must be positive");
  const double word_frames = word_ms * frame_rate / 1000.0;
  const double gap_frames = gap_ms * frame_rate / 1000.0;
  const double lead_frames = lead_ms * frame_rate / 1000.0;
  const double word_samples = word_ms * sample_rate / 1000.0;
  const double frame_samples = sample_rate / frame_rate;
  auto integral = [](double v) { return std::abs(v - std::round(v)) < 1e-9; };
  if (!integral(word_frames) || !integral(gap_frames) || !integral(lead_frames) || !integral(word_samples) || !integral(frame_samples)) {
    throw ConfigError("stimulus word and gap lengths must be whole frames and samples");
  }
}

namespace {

struct WordVoice {
  double f1[2], f2[2], f3[2];  // start, end (Hz)
  double pitch[2];
  double aspiration;
};

WordVoice draw_voice(Rng& rng) {
  WordVoice v{};
  for (int i = 0; i < 2; ++i) {
    v.f1[i] = rng.uniform(200.0, 1000.0);
    v.f2[i] = std::max(rng.uniform(700.0, 3000.0), v.f1[i] + 250.0);
    v.f3[i] = std::max(rng.uniform(2000.0, 6500.0), v.f2[i] + 400.0);
  }
  v.pitch[0] = rng.uniform(95.0, 220.0);
  v.pitch[1] = v.pitch[0] * rng.uniform(0.8, 1.15);
  v.aspiration = rng.uniform(0.02, 0.12);
  return v;
}

// Two-pole resonator with unity gain at its center frequency.
struct Resonator {
  double y1 = 0.0, y2 = 0.0;

  double step(double x, double freq, double bandwidth, double fs) {
    const double r = std::exp(-std::numbers::pi * bandwidth / fs);
    const double a1 = 2.0 * r * std::cos(2.0 * std::numbers::pi * freq / fs);
    const double a2 = -r * r;
    const double y = (1.0 - r) * std::sqrt(1.0 - 2.0 * r * std::cos(4.0 * std::numbers::pi * freq / fs) + r * r) * x +
                     a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

std::vector<double> render_word(const WordVoice& v, std::size_t n, double fs, Rng& rng) {
  std::vector<double> out(n);
  Resonator r1, r2, r3;
  double phase = 0.0;
  const double ramp = 0.030 * fs;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(n - 1);
    auto lerp = [u](const double* p) { return p[0] + (p[1] - p[0]) * u; };
    const double f0 = lerp(v.pitch);
    phase += f0 / fs;
    double source = 0.0;
    if (phase >= 1.0) {
      phase -= 1.0;
      source = 1.0;
    }
    source += v.aspiration * rng.normal();
    double y = r1.step(source, lerp(v.f1), 80.0, fs) + 0.7 * r2.step(source, lerp(v.f2), 120.0, fs) +
               0.5 * r3.step(source, lerp(v.f3), 200.0, fs);
    const double t = static_cast<double>(i);
    const double tail = static_cast<double>(n - 1 - i);
    double env = 1.0;
    if (t < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * t / ramp);
    if (tail < ramp) env = std::min(env, 0.5 - 0.5 * std::cos(std::numbers::pi * tail / ramp));
    out[i] = y * env;
  }
  double peak = 0.0;
  for (double s : out) peak = std::max(peak, std::abs(s));
  if (peak > 0.0) {
    for (double& s : out) s *= 0.5 / peak;
  }
  return out;
}

}  // namespace

StimulusSet synth_stimuli(const StimulusOptions& o) {
  o.validate();
  const double fs = o.sample_rate;
  const auto word_samples = static_cast<std::size_t>(std::lround(o.word_ms * fs / 1000.0));
  const auto gap_samples = static_cast<std::size_t>(std::lround(o.gap_ms * fs / 1000.0));
  const auto frame_samples = static_cast<std::size_t>(std::lround(fs / o.frame_rate));
  const auto lead_samples = static_cast<std::size_t>(std::lround(o.lead_ms * fs / 1000.0));
  const std::size_t slot = word_samples + gap_samples;

  Rng voice_rng(derive_seed(o.seed, 1));
  std::vector<WordVoice> voices;
  for (std::size_t w = 0; w < o.words; ++w) voices.push_back(draw_voice(voice_rng));

  StimulusSet set;
  set.wave.sample_rate = fs;
  set.wave.samples.assign(lead_samples + slot * o.words * o.reps, 0.0f);
  Rng order_rng(derive_seed(o.seed, 2));
  std::size_t position = 0;
  for (std::size_t rep = 0; rep < o.reps; ++rep) {
    std::vector<std::size_t> order(o.words);
    for (std::size_t w = 0; w < o.words; ++w) order[w] = w;
    order_rng.shuffle(order);
    for (std::size_t w : order) {
      // Each rendering gets its own aspiration noise stream.
      Rng noise_rng(derive_seed(o.seed, 1000 + rep * o.words + w));
      const auto token = render_word(voices[w], word_samples, fs, noise_rng);
      const std::size_t start = lead_samples + position * slot;
      for (std::size_t i = 0; i < word_samples; ++i) set.wave.samples[start + i] = static_cast<float>(token[i]);
      set.annotations.push_back({w, rep, start / frame_samples, (start + word_samples) / frame_samples});
      ++position;
    }
  }
  return set;
}

}  // namespace c2s
