#include "c2s/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "c2s/ctsr.hpp"
#include "c2s/errors.hpp"

namespace c2s {

std::vector<std::uint8_t> encode_pgm(const Tensor& values) {
  if (values.ndim() != 2 || values.numel() == 0) {
    throw ShapeError("PGM export needs a non-empty 2-d array, got " + shape_string(values.shape()));
  }
  const std::size_t rows = values.dim(0), cols = values.dim(1);
  auto d = values.data();
  for (float v : d) {
    if (!std::isfinite(v)) throw NumericError("PGM export: non-finite value");
  }
  const auto [lo_it, hi_it] = std::minmax_element(d.begin(), d.end());
  const double lo = *lo_it, hi = *hi_it;
  const std::string header = "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t src = rows - 1 - r;
    for (std::size_t c = 0; c < cols; ++c) {
      std::uint8_t px = 128;
      if (hi > lo) px = static_cast<std::uint8_t>(std::lround((d[src * cols + c] - lo) / (hi - lo) * 255.0));
      out.push_back(px);
    }
  }
  return out;
}

void export_pgm(const Tensor& values, const std::filesystem::path& path) { write_file_bytes(path, encode_pgm(values)); }

}  // namespace c2s
