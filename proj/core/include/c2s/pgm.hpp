#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "c2s/tensor.hpp"

namespace c2s {

/// Binary 8-bit PGM (P5) of a [rows x cols] array, min-max scaled to 0..255.
/// Array row 0 is drawn at the bottom, so band 0 of a spectrogram sits low
/// and the highest band is image row 0. A constant array renders mid-gray.
std::vector<std::uint8_t> encode_pgm(const Tensor& values);
void export_pgm(const Tensor& values, const std::filesystem::path& path);

}  // namespace c2s
