#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "c2s/dsp.hpp"

namespace c2s {

/// One spoken token. Frames are on the stimulus timeline at the feature frame rate;
/// offset_frame is exclusive.
struct WordAnnotation {
  std::size_t word_id = 0;
  std::size_t repetition = 0;
  std::size_t onset_frame = 0;
  std::size_t offset_frame = 0;
};

struct StimulusOptions {
  std::size_t words = 50;
  std::size_t reps = 3;
  std::uint64_t seed = 1;
  double sample_rate = 24000.0;
  double frame_rate = 100.0;
  double word_ms = 400.0;
  double gap_ms = 1000.0;
  double lead_ms = 1500.0;  // silence before the first token, so early words have full context

  void validate() const;
};

struct StimulusSet {
  dsp::Waveform wave;
  std::vector<WordAnnotation> annotations;  // in playback order
};

/// Formant-synthesized word list. Every word is three time-varying resonances
/// over a pitch-pulse-plus-aspiration source with fixed per-word trajectories.
/// Repetition r of all words is played as one block in a seeded order, each
/// token followed by silence.
StimulusSet synth_stimuli(const StimulusOptions& options);

}  // namespace c2s
