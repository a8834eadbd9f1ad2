#include "c2s/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "c2s/errors.hpp"
#include "c2s/fft.hpp"
#include "c2s/log.hpp"
#include "c2s/random.hpp"

namespace c2s::dsp {

using fft::Complex;

namespace {

constexpr double kGainFloor = 1e-9;

long integer_rate(double rate, const char* what) {
  const long r = std::lround(rate);
  if (r <= 0 || std::abs(rate - static_cast<double>(r)) > 1e-9) {
    throw ConfigError(std::string(what) + " must be a positive integer rate, got " + std::to_string(rate));
  }
  return r;
}

double raised_cosine_lowpass(double f, double pass, double stop) {
  f = std::abs(f);
  if (f <= pass) return 1.0;
  if (f >= stop) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * (f - pass) / (stop - pass)));
}

void check_smoothing(double pass, double stop, double out_rate) {
  if (!(pass > 0.0) || !(stop > pass)) {
    throw ConfigError("smoothing band edges must satisfy 0 < pass < stop, got " + std::to_string(pass) + ", " +
                      std::to_string(stop));
  }
  if (stop > out_rate / 2.0 + 1e-9) {
    throw ConfigError("smoothing stop frequency " + std::to_string(stop) + " Hz exceeds the output Nyquist " +
                      std::to_string(out_rate / 2.0) + " Hz");
  }
}

// Low-pass and rate change of a signal sampled on an n_in-point periodic grid
// to n_out points covering the same duration. bin_hz is the bin spacing.
std::vector<double> spectral_resample(std::span<const double> x, std::size_t n_in, std::size_t n_out, double bin_hz,
                                      double pass, double stop) {
  auto spectrum = fft::rfft(x, n_in);
  std::vector<Complex> out(n_out / 2 + 1);
  const std::size_t limit = std::min(n_in / 2, n_out / 2);
  for (std::size_t k = 0; k <= limit; ++k) {
    out[k] = spectrum[k] * raised_cosine_lowpass(static_cast<double>(k) * bin_hz, pass, stop);
  }
  auto y = fft::irfft(out, n_out);
  const double scale = static_cast<double>(n_out) / static_cast<double>(n_in);
  for (auto& v : y) v *= scale;
  return y;
}

std::vector<double> to_double(std::span<const float> x) { return {x.begin(), x.end()}; }

}  // namespace

std::vector<double> FilterBankSpec::center_freqs() const {
  std::vector<double> c(num_bands);
  if (num_bands == 1) {
    c[0] = f_low;
    return c;
  }
  const double ratio = f_high / f_low;
  for (std::size_t i = 0; i < num_bands; ++i) {
    c[i] = f_low * std::pow(ratio, static_cast<double>(i) / static_cast<double>(num_bands - 1));
  }
  c.back() = f_high;
  return c;
}

double FilterBankSpec::sigma_octaves() const {
  // exp(-(bw/2)^2 / (2 sigma^2)) == 10^(-3/20)
  const double half = bandwidth_octaves / 2.0;
  return half / std::sqrt(2.0 * 0.15 * std::numbers::ln10);
}

void FilterBankSpec::validate(double sample_rate) const {
  if (num_bands == 0) throw ConfigError("filterbank needs at least one band");
  if (!(f_low > 0.0) || !(f_high >= f_low) || (num_bands > 1 && f_high == f_low)) {
    throw ConfigError("filterbank frequency range must satisfy 0 < f_low < f_high");
  }
  if (!(bandwidth_octaves > 0.0)) throw ConfigError("filterbank bandwidth must be positive");
  if (f_high >= sample_rate / 2.0) {
    throw ConfigError("filterbank f_high " + std::to_string(f_high) + " Hz is not below the Nyquist frequency " +
                      std::to_string(sample_rate / 2.0) + " Hz");
  }
}

double band_gain(const FilterBankSpec& spec, std::size_t band, double freq_hz) {
  if (freq_hz <= 0.0) return 0.0;
  const double center = spec.center_freqs().at(band);
  const double octaves = std::log2(freq_hz / center);
  const double sigma = spec.sigma_octaves();
  return std::exp(-octaves * octaves / (2.0 * sigma * sigma));
}

std::vector<BandResponse> design_filterbank(const FilterBankSpec& spec, std::size_t fft_size, double sample_rate) {
  spec.validate(sample_rate);
  if (fft_size < 2) throw ConfigError("design_filterbank: fft_size must be at least 2");
  const auto centers = spec.center_freqs();
  const double sigma = spec.sigma_octaves();
  const double reach = sigma * std::sqrt(2.0 * std::log(1.0 / kGainFloor));
  const double bin_hz = sample_rate / static_cast<double>(fft_size);
  const std::size_t last = fft_size / 2;
  std::vector<BandResponse> bank(spec.num_bands);
  for (std::size_t b = 0; b < spec.num_bands; ++b) {
    const double lo = centers[b] * std::exp2(-reach);
    const double hi = centers[b] * std::exp2(reach);
    const auto k0 = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(lo / bin_hz)));
    const auto k1 = std::min<std::size_t>(last, static_cast<std::size_t>(std::floor(hi / bin_hz)));
    auto& r = bank[b];
    r.first_bin = k0;
    for (std::size_t k = k0; k <= k1; ++k) {
      const double octaves = std::log2(static_cast<double>(k) * bin_hz / centers[b]);
      r.gain.push_back(std::exp(-octaves * octaves / (2.0 * sigma * sigma)));
    }
  }
  return bank;
}

Spectrogram analyze(const Waveform& wave, const FilterBankSpec& spec, const AnalysisOptions& options) {
  if (wave.samples.empty()) throw Error("analyze: empty waveform");
  const long fs = integer_rate(wave.sample_rate, "waveform sample rate");
  const long frame_rate = integer_rate(options.frame_rate, "frame rate");
  if (fs % frame_rate != 0) {
    throw ConfigError("analyze: sample rate " + std::to_string(fs) + " is not a multiple of the frame rate " +
                      std::to_string(frame_rate));
  }
  spec.validate(static_cast<double>(fs));
  check_smoothing(options.smoothing_pass_hz, options.smoothing_stop_hz, static_cast<double>(frame_rate));

  const auto hop = static_cast<std::size_t>(fs / frame_rate);
  const std::size_t samples = wave.samples.size();
  const std::size_t frames = samples / hop;
  if (frames == 0) throw Error("analyze: waveform shorter than one frame");

  const std::size_t n = fft::good_size(samples + static_cast<std::size_t>(fs / 2), hop);
  const std::size_t n_frames = n / hop;
  const double bin_hz = static_cast<double>(fs) / static_cast<double>(n);
  const auto x = to_double(wave.samples);
  const auto spectrum = fft::rfft(x, n);
  const auto bank = design_filterbank(spec, n, static_cast<double>(fs));

  std::vector<std::size_t> divisors;
  for (std::size_t d = hop; d >= 1; --d) {
    if (hop % d == 0) divisors.push_back(d);
  }

  std::vector<float> out(spec.num_bands * frames, 0.0f);
  for (std::size_t b = 0; b < spec.num_bands; ++b) {
    const auto& r = bank[b];
    const std::size_t width = r.gain.size();
    if (width == 0) continue;
    // The subband is analytic and band-limited, so its magnitude can be read
    // off a frequency-shifted copy at a reduced rate d times lower.
    const double width_hz = static_cast<double>(width) * bin_hz;
    std::size_t d = 1;
    for (auto cand : divisors) {
      const double rate = static_cast<double>(fs) / static_cast<double>(cand);
      if (rate >= 4.0 * width_hz && rate >= 4.0 * options.smoothing_stop_hz && n / cand >= width) {
        d = cand;
        break;
      }
    }
    const std::size_t m = n / d;
    std::vector<Complex> base(m, Complex{});
    for (std::size_t j = 0; j < width; ++j) base[j] = 2.0 * r.gain[j] * spectrum[r.first_bin + j];
    const auto z = fft::ifft(base);
    const double to_full = static_cast<double>(m) / static_cast<double>(n);
    std::vector<double> env(m);
    for (std::size_t s = 0; s < m; ++s) env[s] = std::abs(z[s]) * to_full;
    const auto smooth =
        spectral_resample(env, m, n_frames, bin_hz, options.smoothing_pass_hz, options.smoothing_stop_hz);
    for (std::size_t f = 0; f < frames; ++f) {
      out[b * frames + f] = static_cast<float>(std::max(0.0, smooth[f]));
    }
  }
  return Spectrogram{Tensor({spec.num_bands, frames}, std::move(out)), spec.center_freqs(),
                     static_cast<double>(frame_rate)};
}

Spectrogram subsample_bands(const Spectrogram& spec, std::size_t group) {
  const std::size_t bands = spec.bands(), frames = spec.frames();
  if (group == 0 || bands % group != 0) {
    throw ShapeError("subsample_bands: " + std::to_string(bands) + " bands not divisible by " + std::to_string(group));
  }
  const std::size_t out_bands = bands / group;
  std::vector<float> out(out_bands * frames, 0.0f);
  auto v = spec.values.data();
  for (std::size_t ob = 0; ob < out_bands; ++ob) {
    for (std::size_t f = 0; f < frames; ++f) {
      double acc = 0.0;
      for (std::size_t g = 0; g < group; ++g) acc += v[(ob * group + g) * frames + f];
      out[ob * frames + f] = static_cast<float>(acc / static_cast<double>(group));
    }
  }
  std::vector<double> centers;
  if (spec.band_centers.size() == bands) {
    for (std::size_t ob = 0; ob < out_bands; ++ob) {
      double log_sum = 0.0;
      for (std::size_t g = 0; g < group; ++g) log_sum += std::log(spec.band_centers[ob * group + g]);
      centers.push_back(std::exp(log_sum / static_cast<double>(group)));
    }
  }
  return Spectrogram{Tensor({out_bands, frames}, std::move(out)), std::move(centers), spec.frame_rate};
}

Spectrogram upsample_bands(const Spectrogram& spec, const FilterBankSpec& bank) {
  const std::size_t in_bands = spec.bands(), frames = spec.frames(), out_bands = bank.num_bands;
  if (out_bands % in_bands != 0) {
    throw ShapeError("upsample_bands: " + std::to_string(out_bands) + " is not a multiple of " +
                     std::to_string(in_bands));
  }
  const double group = static_cast<double>(out_bands / in_bands);
  auto v = spec.values.data();
  std::vector<float> out(out_bands * frames);
  for (std::size_t j = 0; j < out_bands; ++j) {
    double u = (static_cast<double>(j) + 0.5) / group - 0.5;
    u = std::clamp(u, 0.0, static_cast<double>(in_bands - 1));
    const auto lo = static_cast<std::size_t>(std::floor(u));
    const std::size_t hi = std::min(lo + 1, in_bands - 1);
    const double w = u - static_cast<double>(lo);
    for (std::size_t f = 0; f < frames; ++f) {
      out[j * frames + f] = static_cast<float>((1.0 - w) * v[lo * frames + f] + w * v[hi * frames + f]);
    }
  }
  return Spectrogram{Tensor({out_bands, frames}, std::move(out)), bank.center_freqs(), spec.frame_rate};
}

std::vector<double> hilbert_envelope(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) throw Error("hilbert_envelope: empty input");
  const auto half = fft::rfft(x, n);
  std::vector<Complex> analytic(n, Complex{});
  analytic[0] = half[0];
  for (std::size_t k = 1; k < (n + 1) / 2; ++k) analytic[k] = 2.0 * half[k];
  if (n % 2 == 0) analytic[n / 2] = half[n / 2];
  const auto z = fft::ifft(analytic);
  std::vector<double> env(n);
  for (std::size_t i = 0; i < n; ++i) env[i] = std::abs(z[i]);
  return env;
}

std::vector<double> lowpass_resample(std::span<const double> x, long fs_in, long fs_out, double pass_hz,
                                     double stop_hz) {
  if (fs_in <= 0 || fs_out <= 0) throw ConfigError("lowpass_resample: rates must be positive");
  check_smoothing(pass_hz, stop_hz, static_cast<double>(std::min(fs_in, fs_out)));
  if (x.empty()) return {};
  const long g = std::gcd(fs_in, fs_out);
  const auto p = static_cast<std::size_t>(fs_in / g);
  const auto q = static_cast<std::size_t>(fs_out / g);
  const std::size_t n_in = fft::good_size(x.size() + static_cast<std::size_t>(fs_in / 2), p);
  const std::size_t n_out = n_in / p * q;
  const double bin_hz = static_cast<double>(fs_in) / static_cast<double>(n_in);
  auto y = spectral_resample(x, n_in, n_out, bin_hz, pass_hz, stop_hz);
  y.resize(x.size() * q / p);
  return y;
}

double high_gamma_gain(const HighGammaOptions& o, double freq_hz) {
  const double f = std::abs(freq_hz);
  const double lo_edge = o.low_hz - o.transition_hz;
  const double hi_edge = o.high_hz + o.transition_hz;
  if (f <= lo_edge || f >= hi_edge) return 0.0;
  if (f < o.low_hz) return 0.5 * (1.0 - std::cos(std::numbers::pi * (f - lo_edge) / o.transition_hz));
  if (f > o.high_hz) return 0.5 * (1.0 + std::cos(std::numbers::pi * (f - o.high_hz) / o.transition_hz));
  return 1.0;
}

EcogEnvelope high_gamma_envelope(const Tensor& raw, double sample_rate, const HighGammaOptions& o) {
  if (sample_rate < 300.0) {
    throw ConfigError("high_gamma_envelope: sample rate " + std::to_string(sample_rate) + " Hz is below 300 Hz");
  }
  if (raw.ndim() != 2) throw ShapeError("high_gamma_envelope: expected electrodes x samples, got " + shape_string(raw.shape()));
  if (!(o.transition_hz > 0.0) || !(o.low_hz > o.transition_hz) || !(o.high_hz > o.low_hz) ||
      o.high_hz + o.transition_hz >= sample_rate / 2.0) {
    throw ConfigError("high_gamma_envelope: invalid band edges for sample rate " + std::to_string(sample_rate));
  }
  const long fs = integer_rate(sample_rate, "ECoG sample rate");
  const long frame_rate = integer_rate(o.frame_rate, "frame rate");
  check_smoothing(o.smoothing_pass_hz, o.smoothing_stop_hz, static_cast<double>(frame_rate));

  const std::size_t electrodes = raw.dim(0), samples = raw.dim(1);
  const long g = std::gcd(fs, frame_rate);
  const auto p = static_cast<std::size_t>(fs / g);
  const auto q = static_cast<std::size_t>(frame_rate / g);
  const std::size_t frames = samples * q / p;
  if (frames == 0) throw Error("high_gamma_envelope: recording shorter than one frame");
  const std::size_t n = fft::good_size(samples + static_cast<std::size_t>(fs / 2), p);
  const std::size_t n_out = n / p * q;
  const double bin_hz = static_cast<double>(fs) / static_cast<double>(n);

  std::vector<double> gains(n / 2 + 1);
  for (std::size_t k = 0; k < gains.size(); ++k) gains[k] = high_gamma_gain(o, static_cast<double>(k) * bin_hz);

  std::vector<float> out(electrodes * frames);
  auto rv = raw.data();
  for (std::size_t e = 0; e < electrodes; ++e) {
    const std::span<const float> row(rv.data() + e * samples, samples);
    const auto spectrum = fft::rfft(to_double(row), n);
    std::vector<Complex> analytic(n, Complex{});
    for (std::size_t k = 1; k < (n + 1) / 2; ++k) analytic[k] = 2.0 * gains[k] * spectrum[k];
    const auto z = fft::ifft(analytic);
    std::vector<double> env(n);
    for (std::size_t i = 0; i < n; ++i) env[i] = std::abs(z[i]);
    const auto smooth = spectral_resample(env, n, n_out, bin_hz, o.smoothing_pass_hz, o.smoothing_stop_hz);
    for (std::size_t f = 0; f < frames; ++f) out[e * frames + f] = static_cast<float>(std::max(0.0, smooth[f]));
  }
  return EcogEnvelope{Tensor({electrodes, frames}, std::move(out)), static_cast<double>(frame_rate)};
}

namespace {

// Analytic subband analysis and least-squares resynthesis on a fixed n-point
// periodic grid. Each band occupies a narrow run of bins, so its subband is
// evaluated exactly at M_b equispaced instants via an M_b-point transform of
// the shifted bins. Weighting each band's error by n / M_b keeps the
// resynthesis objective identical to the full-rate one, so every iteration is
// an exact alternating projection and the error cannot increase.
class SubbandProjector {
 public:
  SubbandProjector(const FilterBankSpec& bank, long fs, std::size_t samples, const Spectrogram& target)
      : n_(fft::good_size(samples + static_cast<std::size_t>(fs / 2))), denom_(n_ / 2 + 1, 0.0) {
    const auto responses = design_filterbank(bank, n_, static_cast<double>(fs));
    const double hop = static_cast<double>(fs) / target.frame_rate;
    const auto frames = target.frames();
    const auto values = target.values.data();
    // Enough instants to resolve the target's frame rate as well as the band.
    const auto min_points = 2 * static_cast<std::size_t>(std::ceil(static_cast<double>(n_) / hop));
    for (std::size_t b = 0; b < responses.size(); ++b) {
      Band band;
      band.first = responses[b].first_bin;
      band.gain = responses[b].gain;
      band.points = std::min(n_, fft::good_size(std::max(2 * band.gain.size(), min_points)));
      band.weight = static_cast<double>(n_) / static_cast<double>(band.points);
      band.target.resize(band.points);
      const float* row = values.data() + b * frames;
      for (std::size_t j = 0; j < band.points; ++j) {
        const double t = static_cast<double>(j) * band.weight;
        if (t >= static_cast<double>(samples)) continue;
        const double pos = t / hop;
        const auto k = static_cast<std::size_t>(pos);
        if (k + 1 >= frames) {
          band.target[j] = row[frames - 1];
        } else {
          const double w = pos - static_cast<double>(k);
          band.target[j] = (1.0 - w) * row[k] + w * row[k + 1];
        }
      }
      for (std::size_t j = 0; j < band.gain.size(); ++j) denom_[band.first + j] += 2.0 * band.gain[j] * band.gain[j];
      bands_.push_back(std::move(band));
    }
    // The waveform lives on the bins the bank actually covers. Bins reached
    // only by the far tails would be amplified by 1 / gain while staying
    // invisible to the error, so they are excluded from the solution space.
    const double floor = kCoverageFloor * *std::max_element(denom_.begin(), denom_.end());
    for (auto& d : denom_) {
      if (d < floor) d = 0.0;
    }
  }

  /// Orthogonal projection of x onto the covered bins.
  void restrict(std::vector<double>& x) const {
    auto spectrum = fft::rfft(x, n_);
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
      if (denom_[k] == 0.0) spectrum[k] = Complex{};
    }
    x = fft::irfft(spectrum, n_);
  }

  std::size_t size() const { return n_; }

  /// Envelope error of x; if `update`, x becomes the least-squares waveform
  /// whose subbands best match the magnitude-corrected subbands.
  double step(std::vector<double>& x, bool update) const {
    const auto spectrum = fft::rfft(x, n_);
    std::vector<Complex> acc(update ? n_ / 2 + 1 : 0, Complex{});
    const double inv_n = 1.0 / static_cast<double>(n_);
    double error = 0.0;
    for (const auto& band : bands_) {
      const std::size_t m = band.points;
      std::vector<Complex> bins(m, Complex{});
      for (std::size_t j = 0; j < band.gain.size(); ++j) {
        bins[j % m] += 2.0 * band.gain[j] * spectrum[band.first + j];
      }
      // The M-point inverse times M / n gives the subband at its M instants.
      auto z = fft::ifft(bins);
      const double to_samples = static_cast<double>(m) * inv_n;
      double band_error = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        z[j] *= to_samples;
        const double mag = std::abs(z[j]);
        const double t = band.target[j];
        band_error += (mag - t) * (mag - t);
        z[j] = mag > 1e-12 ? z[j] * (t / mag) : Complex(t, 0.0);
      }
      error += band.weight * band_error;
      if (!update) continue;
      const auto projected = fft::fft(z);
      for (std::size_t j = 0; j < band.gain.size(); ++j) {
        acc[band.first + j] += band.gain[j] * band.weight * projected[j % m];
      }
    }
    if (update) {
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] = denom_[k] > 0.0 ? acc[k] / denom_[k] : Complex{};
      x = fft::irfft(acc, n_);
    }
    return error;
  }

 private:
  struct Band {
    std::size_t first = 0;
    std::vector<double> gain;
    std::size_t points = 0;
    double weight = 1.0;
    std::vector<double> target;
  };

  static constexpr double kCoverageFloor = 1e-3;

  std::size_t n_;
  std::vector<double> denom_;
  std::vector<Band> bands_;
};

Spectrogram full_bank_target(const Spectrogram& target, const FilterBankSpec& bank) {
  Spectrogram clipped{target.values.clone(), target.band_centers, target.frame_rate};
  for (auto& v : clipped.values.mutable_data()) v = std::max(v, 0.0f);
  if (clipped.bands() == bank.num_bands) return clipped;
  return upsample_bands(clipped, bank);
}

}  // namespace

InversionResult invert_spectrogram(const Spectrogram& target, const InversionOptions& options) {
  if (options.iterations < 1) throw ConfigError("invert_spectrogram: iterations must be >= 1");
  const long fs = integer_rate(options.sample_rate, "output sample rate");
  const long frame_rate = integer_rate(target.frame_rate, "spectrogram frame rate");
  if (fs % frame_rate != 0) throw ConfigError("invert_spectrogram: sample rate is not a multiple of the frame rate");
  options.filterbank.validate(static_cast<double>(fs));

  const auto full = full_bank_target(target, options.filterbank);
  const std::size_t samples = full.frames() * static_cast<std::size_t>(fs / frame_rate);
  InversionResult result;
  result.waveform.sample_rate = static_cast<double>(fs);

  const auto values = full.values.data();
  if (std::none_of(values.begin(), values.end(), [](float v) { return v > 0.0f; })) {
    log::warn("invert_spectrogram: target is all zero, returning silence");
    result.waveform.samples.assign(samples, 0.0f);
    result.error_history.push_back(0.0);
    result.silent = true;
    return result;
  }

  SubbandProjector projector(options.filterbank, fs, samples, full);
  std::vector<double> x(projector.size(), 0.0);
  Rng rng(options.seed);
  for (std::size_t i = 0; i < samples; ++i) x[i] = 0.1 * rng.normal();
  projector.restrict(x);

  for (std::size_t it = 0; it < options.iterations; ++it) {
    result.error_history.push_back(projector.step(x, true));
  }
  result.error_history.push_back(projector.step(x, false));

  result.waveform.samples.resize(samples);
  for (std::size_t i = 0; i < samples; ++i) result.waveform.samples[i] = static_cast<float>(x[i]);
  return result;
}

double envelope_error(const Waveform& wave, const Spectrogram& target, const FilterBankSpec& bank) {
  const long fs = integer_rate(wave.sample_rate, "waveform sample rate");
  const auto full = full_bank_target(target, bank);
  SubbandProjector projector(bank, fs, wave.samples.size(), full);
  std::vector<double> x(wave.samples.begin(), wave.samples.end());
  return projector.step(x, false);
}

}  // namespace c2s::dsp
