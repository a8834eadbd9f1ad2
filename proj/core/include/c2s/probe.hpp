#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "c2s/dataset.hpp"
#include "c2s/dsp.hpp"
#include "c2s/model.hpp"

namespace c2s {

struct ProbeOptions {
  std::size_t length = 100;
  std::size_t onset = 50;
  std::size_t width = 10;  // impulse covers frames onset .. onset + width - 1
};

/// [E x length] zeros with frames onset..onset+width-1 of electrode e set to amplitude.
Tensor make_impulse(std::size_t electrode, float amplitude, std::size_t electrodes = 64,
                    const ProbeOptions& options = {});

/// Eval-mode response to the impulse minus the response to an all-zero input,
/// in normalized units: [B x length].
Tensor impulse_response(Model& model, std::size_t electrode, float amplitude, const ProbeOptions& options = {});

/// Response scaled into spectrogram units (per-band std); it is a difference,
/// so band means do not enter.
Tensor display_response(const Tensor& response, const NormStats& norm);

struct ImpulseResponseMap {
  std::vector<Tensor> responses;  // one [B x length] per electrode, normalized units
  std::string checkpoint_id;
  float amplitude = 0.0f;
};

ImpulseResponseMap probe_all(Model& model, float amplitude, const std::string& checkpoint_id = {},
                             const ProbeOptions& options = {});

/// 8 x 8 tiling in electrode order (row-major from the top left), each tile
/// followed by `margin` background rows and columns. The array uses the PGM
/// convention of encode_pgm (row 0 drawn at the bottom), so the rendered image
/// is 8 * (B + margin) rows by 8 * (length + margin) columns.
Tensor montage(const std::vector<Tensor>& tiles, std::size_t margin = 2, std::size_t grid = 8);

/// Clips the response at zero and inverts it; an all-nonpositive response gives silence.
dsp::InversionResult sonify(const Tensor& response, const dsp::InversionOptions& options);

}  // namespace c2s
