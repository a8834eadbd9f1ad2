#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "c2s/dsp.hpp"

namespace c2s {

// RIFF/WAVE, PCM 16-bit, mono. Samples map to [-1, 1) via x = q / 32768.
std::vector<std::uint8_t> encode_wav(const dsp::Waveform& wave);
dsp::Waveform decode_wav(std::span<const std::uint8_t> bytes);

void write_wav(const std::filesystem::path& path, const dsp::Waveform& wave);
dsp::Waveform read_wav(const std::filesystem::path& path);

}  // namespace c2s
