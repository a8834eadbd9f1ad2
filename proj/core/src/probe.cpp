#include "c2s/probe.hpp"

#include <algorithm>
#include <limits>

#include "c2s/errors.hpp"
#include "c2s/ops.hpp"

namespace c2s {

Tensor make_impulse(std::size_t electrode, float amplitude, std::size_t electrodes, const ProbeOptions& o) {
  if (electrode >= electrodes) {
    throw ConfigError("electrode " + std::to_string(electrode) + " out of range [0, " + std::to_string(electrodes) +
                      ")");
  }
  if (o.onset + o.width > o.length) throw ConfigError("impulse extends past the probe window");
  Tensor x = Tensor::zeros({electrodes, o.length});
  auto d = x.mutable_data();
  for (std::size_t t = o.onset; t < o.onset + o.width; ++t) d[electrode * o.length + t] = amplitude;
  return x;
}

Tensor impulse_response(Model& model, std::size_t electrode, float amplitude, const ProbeOptions& o) {
  NoGradScope no_grad;
  const std::size_t e = model.config().in_channels;
  const Tensor probe = make_impulse(electrode, amplitude, e, o);
  const Tensor driven = model.forward(probe, Mode::eval);
  const Tensor baseline = model.forward(Tensor::zeros({e, o.length}), Mode::eval);
  std::vector<float> out(driven.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = driven.data()[i] - baseline.data()[i];
  return Tensor(driven.shape(), std::move(out));
}

Tensor display_response(const Tensor& response, const NormStats& norm) {
  const std::vector<float> zero(norm.spec_std.size(), 0.0f);
  return denormalize_rows(response, zero, norm.spec_std);
}

ImpulseResponseMap probe_all(Model& model, float amplitude, const std::string& checkpoint_id, const ProbeOptions& o) {
  ImpulseResponseMap map;
  map.checkpoint_id = checkpoint_id;
  map.amplitude = amplitude;
  for (std::size_t e = 0; e < model.config().in_channels; ++e) {
    map.responses.push_back(impulse_response(model, e, amplitude, o));
  }
  return map;
}

Tensor montage(const std::vector<Tensor>& tiles, std::size_t margin, std::size_t grid) {
  if (tiles.empty()) throw ConfigError("montage needs at least one tile");
  const std::size_t th = tiles.front().dim(0), tw = tiles.front().dim(1);
  if (tiles.size() > grid * grid) throw ConfigError("too many tiles for the montage grid");
  float lo = std::numeric_limits<float>::infinity();
  for (const auto& t : tiles) {
    if (t.shape() != tiles.front().shape()) throw ShapeError("montage tiles must share one shape");
    for (float v : t.data()) lo = std::min(lo, v);
  }
  const std::size_t rows = grid * (th + margin), cols = grid * (tw + margin);
  std::vector<float> img(rows * cols, lo);
  for (std::size_t k = 0; k < tiles.size(); ++k) {
    const std::size_t gr = k / grid, gc = k % grid;
    // Array rows are flipped on export: grid row 0 occupies the top of the array.
    const std::size_t base_row = (grid - 1 - gr) * (th + margin) + margin;
    const std::size_t base_col = gc * (tw + margin);
    auto d = tiles[k].data();
    for (std::size_t r = 0; r < th; ++r) {
      std::copy_n(d.begin() + r * tw, tw, img.begin() + (base_row + r) * cols + base_col);
    }
  }
  return Tensor({rows, cols}, std::move(img));
}

dsp::InversionResult sonify(const Tensor& response, const dsp::InversionOptions& options) {
  std::vector<float> clipped(response.data().begin(), response.data().end());
  for (float& v : clipped) v = std::max(v, 0.0f);
  dsp::Spectrogram s;
  s.values = Tensor(response.shape(), std::move(clipped));
  s.frame_rate = 100.0;
  return dsp::invert_spectrogram(s, options);
}

}  // namespace c2s
