#include "c2s/ctsr.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "c2s/errors.hpp"

namespace c2s {

namespace {

constexpr std::uint8_t kMagic[4] = {0x43, 0x54, 0x53, 0x52};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[at + i]) << (8 * i);
  return v;
}

[[noreturn]] void fail(const std::string& what, std::size_t offset) {
  throw FormatError("CTSR: " + what + " at byte offset " + std::to_string(offset));
}

}  // namespace

std::vector<std::uint8_t> encode_ctsr(const Tensor& tensor) {
  const auto& shape = tensor.shape();
  if (shape.size() > 255) throw ShapeError("CTSR supports at most 255 dimensions");
  std::vector<std::uint8_t> out;
  out.reserve(7 + 8 * shape.size() + 4 * tensor.numel());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kCtsrVersion);
  out.push_back(kCtsrDtypeF32);
  out.push_back(static_cast<std::uint8_t>(shape.size()));
  for (auto d : shape) put_u64(out, d);
  for (float v : tensor.data()) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  return out;
}

Tensor decode_ctsr(std::span<const std::uint8_t> b) {
  if (b.size() < 7) fail("truncated header", b.size());
  if (std::memcmp(b.data(), kMagic, 4) != 0) fail("bad magic bytes", 0);
  if (b[4] != kCtsrVersion) fail("unsupported version " + std::to_string(b[4]), 4);
  if (b[5] != kCtsrDtypeF32) fail("unsupported dtype " + std::to_string(b[5]), 5);
  const std::size_t ndim = b[6];
  if (ndim == 0) fail("zero-dimensional tensor", 6);
  std::size_t at = 7;
  if (b.size() < at + 8 * ndim) fail("truncated dimensions", b.size());
  Shape shape;
  std::size_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    const auto d = get_u64(b, at);
    if (d == 0) fail("zero dimension", at);
    if (d > (std::uint64_t{1} << 40) || count > (std::size_t{1} << 40) / d) fail("dimension too large", at);
    shape.push_back(static_cast<std::size_t>(d));
    count *= static_cast<std::size_t>(d);
    at += 8;
  }
  if (b.size() != at + 4 * count) {
    fail("payload length " + std::to_string(b.size() - at) + " != expected " + std::to_string(4 * count), at);
  }
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i, at += 4) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(b[at + k]) << (8 * k);
    data[i] = std::bit_cast<float>(bits);
  }
  return Tensor(std::move(shape), std::move(data));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void write_ctsr(const std::filesystem::path& path, const Tensor& tensor) {
  write_file_bytes(path, encode_ctsr(tensor));
}

Tensor read_ctsr(const std::filesystem::path& path) {
  try {
    return decode_ctsr(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  const std::string text = j.dump(2) + "\n";
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": invalid JSON at byte " + std::to_string(e.byte));
  }
}

}  // namespace c2s
