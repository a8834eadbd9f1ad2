#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "c2s/tensor.hpp"

namespace c2s::dsp {

struct Waveform {
  std::vector<float> samples;
  double sample_rate = 24000.0;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Log-spaced band-pass bank; band i sits at f_low * (f_high / f_low)^(i / (num_bands - 1)).
struct FilterBankSpec {
  std::size_t num_bands = 128;
  double f_low = 180.0;
  double f_high = 7000.0;
  double bandwidth_octaves = 1.0 / 12.0;  // -3 dB full width

  std::vector<double> center_freqs() const;
  /// Standard deviation of the Gaussian gain curve in octaves.
  double sigma_octaves() const;
  void validate(double sample_rate) const;
};

/// Amplitude gain of `band` at `freq_hz`: Gaussian in log2 frequency, unity at
/// the center and -3 dB at half the bandwidth on either side.
double band_gain(const FilterBankSpec& spec, std::size_t band, double freq_hz);

/// Gain of one band sampled on the rfft bins of an fft_size transform,
/// truncated where it falls below 1e-9.
struct BandResponse {
  std::size_t first_bin = 0;
  std::vector<double> gain;
};

std::vector<BandResponse> design_filterbank(const FilterBankSpec& spec, std::size_t fft_size, double sample_rate);

/// bands x frames magnitudes.
struct Spectrogram {
  Tensor values;
  std::vector<double> band_centers;
  double frame_rate = 100.0;

  std::size_t bands() const { return values.dim(0); }
  std::size_t frames() const { return values.dim(1); }
};

/// electrodes x frames high-gamma amplitude.
struct EcogEnvelope {
  Tensor values;
  double frame_rate = 100.0;

  std::size_t electrodes() const { return values.dim(0); }
  std::size_t frames() const { return values.dim(1); }
};

struct AnalysisOptions {
  double frame_rate = 100.0;
  // Envelope smoothing before decimation: flat to pass_hz, raised-cosine to zero at stop_hz.
  double smoothing_pass_hz = 40.0;
  double smoothing_stop_hz = 50.0;
};

/// Filterbank spectrogram: per band, frequency-domain filtering, analytic
/// envelope, low-pass and decimation to the frame rate.
Spectrogram analyze(const Waveform& wave, const FilterBankSpec& spec = {}, const AnalysisOptions& options = {});

/// Block mean over consecutive groups of `group` bands; centers become the
/// geometric mean of each group.
Spectrogram subsample_bands(const Spectrogram& spec, std::size_t group = 4);

/// Inverse of subsample_bands for display and inversion: linear interpolation
/// in band index onto the full bank.
Spectrogram upsample_bands(const Spectrogram& spec, const FilterBankSpec& bank);

/// Magnitude of the analytic signal (FFT Hilbert transform, no padding).
std::vector<double> hilbert_envelope(std::span<const double> x);

/// Band-limited rational resampling in the frequency domain: zero-phase
/// low-pass (flat to pass_hz, raised-cosine to stop_hz) followed by an exact
/// fs_out / fs_in rate change. Output length is floor(len * fs_out / fs_in).
std::vector<double> lowpass_resample(std::span<const double> x, long fs_in, long fs_out, double pass_hz,
                                     double stop_hz);

struct HighGammaOptions {
  double low_hz = 70.0;
  double high_hz = 150.0;
  double transition_hz = 5.0;
  double frame_rate = 100.0;
  double smoothing_pass_hz = 40.0;
  double smoothing_stop_hz = 50.0;
};

/// Gain of the high-gamma band-pass at `freq_hz`.
double high_gamma_gain(const HighGammaOptions& options, double freq_hz);

/// raw is electrodes x samples at sample_rate (integer-valued, >= 300 Hz).
EcogEnvelope high_gamma_envelope(const Tensor& raw, double sample_rate, const HighGammaOptions& options = {});

struct InversionOptions {
  std::size_t iterations = 100;
  std::uint64_t seed = 0;
  double sample_rate = 24000.0;
  FilterBankSpec filterbank;
};

struct InversionResult {
  Waveform waveform;
  /// Envelope-domain squared error before each iteration and after the last.
  std::vector<double> error_history;
  bool silent = false;
};

/// Iterative magnitude-projection inversion: starting from seeded noise,
/// alternately impose the target subband envelopes on the current analytic
/// subbands and resynthesize the least-squares consistent waveform.
/// Accepts a 32-band (upsampled internally) or full-bank target.
InversionResult invert_spectrogram(const Spectrogram& target, const InversionOptions& options);

/// Envelope-domain error sum_b (n / M_b) ||(|z_b(x)| - target_b)||^2 used by
/// the inversion, with each subband sampled at M_b instants of the n-point
/// grid (a quadrature of the full-rate error); exposed for verification.
double envelope_error(const Waveform& wave, const Spectrogram& target, const FilterBankSpec& bank);

}  // namespace c2s::dsp
