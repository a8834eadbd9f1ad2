#pragma once

#include <stdexcept>
#include <string>

namespace c2s {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid hyperparameters, schedules, rates or other static configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor or signal dimensions that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed bytes in a CTSR, WAV or checkpoint file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Numerically invalid input or state (degenerate batch statistics, NaN loss).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Stable short name of an error's category: config, shape, format, io,
/// numeric, or internal for anything else.
inline const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const ShapeError*>(&e)) return "shape";
  if (dynamic_cast<const FormatError*>(&e)) return "format";
  if (dynamic_cast<const IoError*>(&e)) return "io";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric";
  return "internal";
}

}  // namespace c2s
