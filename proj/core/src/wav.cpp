#include "c2s/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "c2s/ctsr.hpp"
#include "c2s/errors.hpp"

namespace c2s {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}
std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

[[noreturn]] void fail(const std::string& what, std::size_t offset) {
  throw FormatError("WAV: " + what + " at byte offset " + std::to_string(offset));
}

}  // namespace

std::vector<std::uint8_t> encode_wav(const dsp::Waveform& wave) {
  const long rate = std::lround(wave.sample_rate);
  if (rate <= 0) throw ConfigError("WAV: sample rate must be positive");
  const auto data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(rate));
  put_u32(out, static_cast<std::uint32_t>(rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);
  for (float s : wave.samples) {
    const double scaled = std::round(static_cast<double>(s) * 32768.0);
    const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(q));
  }
  return out;
}

dsp::Waveform decode_wav(std::span<const std::uint8_t> b) {
  if (b.size() < 12) fail("truncated RIFF header", b.size());
  if (std::memcmp(b.data(), "RIFF", 4) != 0) fail("missing RIFF tag", 0);
  if (std::memcmp(b.data() + 8, "WAVE", 4) != 0) fail("missing WAVE tag", 8);

  std::size_t at = 12;
  bool have_fmt = false;
  std::uint32_t rate = 0;
  while (at + 8 <= b.size()) {
    const std::uint32_t size = get_u32(b, at + 4);
    const std::size_t body = at + 8;
    if (body + size > b.size()) fail("chunk extends past end of file", at);
    if (std::memcmp(b.data() + at, "fmt ", 4) == 0) {
      if (size < 16) fail("fmt chunk too short", at);
      const auto format = get_u16(b, body);
      const auto channels = get_u16(b, body + 2);
      rate = get_u32(b, body + 4);
      const auto bits = get_u16(b, body + 14);
      if (format != 1) fail("unsupported format tag " + std::to_string(format) + " (PCM only)", body);
      if (channels != 1) fail("expected mono, found " + std::to_string(channels) + " channels", body + 2);
      if (bits != 16) fail("expected 16-bit samples, found " + std::to_string(bits), body + 14);
      if (rate == 0) fail("zero sample rate", body + 4);
      have_fmt = true;
    } else if (std::memcmp(b.data() + at, "data", 4) == 0) {
      if (!have_fmt) fail("data chunk before fmt chunk", at);
      if (size == 0) fail("empty data chunk", at);
      if (size % 2 != 0) fail("odd data chunk length", at);
      dsp::Waveform w;
      w.sample_rate = static_cast<double>(rate);
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto q = static_cast<std::int16_t>(get_u16(b, body + 2 * i));
        w.samples[i] = static_cast<float>(q) / 32768.0f;
      }
      return w;
    }
    at = body + size + (size & 1);
  }
  fail(have_fmt ? "missing data chunk" : "missing fmt chunk", at);
}

void write_wav(const std::filesystem::path& path, const dsp::Waveform& wave) {
  write_file_bytes(path, encode_wav(wave));
}

dsp::Waveform read_wav(const std::filesystem::path& path) {
  try {
    return decode_wav(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace c2s
