#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

#include "c2s/tensor.hpp"

namespace c2s {

// CTSR layout: "CTSR" | version 0x01 | dtype 0x01 (f32) | ndim (u8) |
// ndim x u64 LE dims | row-major f32 LE payload.
inline constexpr std::uint8_t kCtsrVersion = 1;
inline constexpr std::uint8_t kCtsrDtypeF32 = 1;

std::vector<std::uint8_t> encode_ctsr(const Tensor& tensor);
Tensor decode_ctsr(std::span<const std::uint8_t> bytes);

void write_ctsr(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_ctsr(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Pretty-printed JSON with a trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
/// Throws FormatError with the byte offset of a parse error.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace c2s
