#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "c2s/dsp.hpp"
#include "c2s/stimuli.hpp"
#include "c2s/tensor.hpp"

namespace c2s {

/// Envelopes and target spectrogram on one timeline. The spectrogram has been
/// delayed by lag_frames; annotations stay on the stimulus timeline.
struct PairedRecording {
  dsp::EcogEnvelope ecog;
  dsp::Spectrogram spec;
  std::vector<WordAnnotation> annotations;
  std::size_t lag_frames = 0;

  std::size_t frames() const { return ecog.frames(); }
};

/// round(lag_seconds * rate).
std::size_t lag_samples(double lag_seconds, double rate);

/// Prepends `lag` zero frames along the last axis of a [C x T] tensor, keeping T.
Tensor delay_frames(const Tensor& x, std::size_t lag);

struct AlignOptions {
  double lag_seconds = 0.168;
  dsp::FilterBankSpec filterbank;
  dsp::AnalysisOptions analysis;
  dsp::HighGammaOptions high_gamma;
  std::size_t band_group = 4;
};

/// Delays the speech by round(lag * fs) samples, extracts the 32-band
/// spectrogram and the high-gamma envelopes, and truncates both to a common
/// frame count. ecog_raw is electrodes x samples at ecog_rate.
PairedRecording align(const dsp::Waveform& speech, const Tensor& ecog_raw, double ecog_rate,
                      const AlignOptions& options = {});

/// Frame-domain variant for features already at the common rate.
PairedRecording align_features(const dsp::EcogEnvelope& ecog, const dsp::Spectrogram& spec, std::size_t lag_frames);

/// Half-open frame interval.
struct FrameRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  bool overlaps(const FrameRange& o) const { return begin < o.end && o.begin < end; }
};

struct NormStats {
  std::vector<float> ecog_mean, ecog_std;
  std::vector<float> spec_mean, spec_std;

  /// [2 x (E + B)]: row 0 means, row 1 standard deviations, electrodes first.
  Tensor to_tensor() const;
  static NormStats from_tensor(const Tensor& t, std::size_t electrodes);
};

inline constexpr float kStdFloor = 1e-6f;

/// Per-channel mean and standard deviation over frames outside `exclude`.
/// Channels with std below kStdFloor are floored and reported with a warning.
NormStats compute_norm_stats(const PairedRecording& rec, std::span<const FrameRange> exclude = {});

PairedRecording normalize(const PairedRecording& rec, const NormStats& stats);
PairedRecording denormalize(const PairedRecording& rec, const NormStats& stats);
Tensor normalize_rows(const Tensor& x, std::span<const float> mean, std::span<const float> std);
Tensor denormalize_rows(const Tensor& x, std::span<const float> mean, std::span<const float> std);

/// Fixed-length windows over a recording. Window i covers target frames
/// [offsets[i], offsets[i] + length) and envelope input frames
/// [offsets[i] - context, offsets[i] + length).
struct SegmentSet {
  Tensor ecog;  // E x T, shared with the source
  Tensor spec;  // B x T
  std::vector<std::size_t> offsets;
  std::size_t length = 100;
  std::size_t context = 0;

  std::size_t size() const { return offsets.size(); }
  Tensor ecog_window(std::size_t i) const;  // E x (context + length)
  Tensor spec_window(std::size_t i) const;  // B x length
};

/// Every window of `length` frames at one-frame hop: frames - length + 1 windows.
SegmentSet segment(const PairedRecording& rec, std::size_t length = 100);

/// Stacks selected windows into [N x E x (context + length)] inputs and [N x B x length] targets.
struct Batch {
  Tensor input;
  Tensor target;
};
Batch gather(const Tensor& ecog, const Tensor& spec, std::span<const std::size_t> offsets, std::size_t length,
             std::size_t context);

struct FoldPlan {
  std::size_t k = 0;
  /// Indices into the recording's annotations, one list per fold.
  std::vector<std::vector<std::size_t>> test_utterances;
};

/// Fold i tests repetition i of every word. Throws unless every word has exactly k repetitions.
FoldPlan kfold_split(const PairedRecording& rec, std::size_t k);

struct WindowOptions {
  std::size_t length = 100;
  std::size_t context = 123;
  std::size_t train_hop = 1;
  double val_fraction = 0.1;
  std::size_t val_blocks = 10;

  void validate() const;
};

nlohmann::json to_json(const WindowOptions& w);
WindowOptions window_options_from_json(const nlohmann::json& j, const std::string& pointer = "");

struct FoldWindows {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;             // word-centered, one per test utterance
  std::vector<std::size_t> test_annotation;  // annotation index of each test window
  /// Frames owned by the test side: every test utterance (lag included) and the
  /// full input extent of every test window. No train or validation window touches them.
  std::vector<FrameRange> reserved;
};

/// Frames of utterance `a` on the aligned timeline, from stimulus onset until
/// the delayed target ends.
FrameRange utterance_span(const WordAnnotation& a, std::size_t lag_frames);

FoldWindows fold_windows(const PairedRecording& rec, const FoldPlan& plan, std::size_t fold,
                         const WindowOptions& options);

enum class TeacherMode { linear, gated };
enum class TeacherKernel { strf, diagonal };

/// Synthetic encoder from spectrogram to envelopes.
struct TeacherSpec {
  TeacherMode mode = TeacherMode::linear;
  TeacherKernel kernel = TeacherKernel::strf;
  std::size_t electrodes = 64;
  std::size_t taps = 12;
  double gain = 4.0;  // gated mode: y <- y * sigmoid(gain * y)
  double noise_std = 0.0;
  std::optional<double> snr_db;  // when set, noise std = clean std * 10^(-snr/20) per electrode
  std::uint64_t seed = 7;

  void validate() const;
};

std::string to_string(TeacherMode m);
std::string to_string(TeacherKernel k);
nlohmann::json to_json(const TeacherSpec& t);
TeacherSpec teacher_from_json(const nlohmann::json& j, const std::string& pointer = "");

/// [E x B x taps] kernel. diagonal: electrode e reads band e mod B at lag 0.
/// strf: a seeded spectro-temporal tuning per electrode with unit L2 norm.
Tensor make_teacher_kernel(const TeacherSpec& teacher, std::size_t bands);

/// y[e, t] = sum_{b, tau} kernel[e, b, tau] * spec[b, t - tau] (zero before the start),
/// then the gated nonlinearity and seeded noise as configured.
dsp::EcogEnvelope teacher_encode(const dsp::Spectrogram& spec, const Tensor& kernel, const TeacherSpec& teacher);
dsp::EcogEnvelope teacher_encode(const dsp::Spectrogram& spec, const TeacherSpec& teacher);

/// Rescales each electrode's kernel so its noiseless linear response to `spec` has unit std.
Tensor calibrate_teacher_kernel(const Tensor& kernel, const dsp::Spectrogram& spec);

struct SessionConfig {
  StimulusOptions stimuli;
  TeacherSpec teacher;
  dsp::FilterBankSpec filterbank;
  dsp::AnalysisOptions analysis;
  std::size_t band_group = 4;
  double lag_seconds = 0.168;

  void validate() const;
};

nlohmann::json to_json(const SessionConfig& c);

/// Stimuli -> spectrogram -> teacher envelopes (from the session-z-scored
/// spectrogram) -> frame alignment. A pure function of the config.
PairedRecording synth_session(const SessionConfig& config);

/// Writes ecog.ctsr, spec.ctsr, annotations.json and meta.json into dir.
void write_session(const std::filesystem::path& dir, const PairedRecording& rec, const nlohmann::json& meta);
PairedRecording read_session(const std::filesystem::path& dir);

}  // namespace c2s
