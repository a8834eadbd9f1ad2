#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include "c2s/errors.hpp"

namespace c2s {

/// Strict reader over one JSON object: every key must be consumed by a
/// read() call before finish(), and type errors name the JSON pointer.
class JsonReader {
 public:
  JsonReader(const nlohmann::json& object, std::string pointer) : j_(object), pointer_(std::move(pointer)) {
    if (!j_.is_object()) fail(pointer_.empty() ? "/" : pointer_, "expected an object");
  }

  template <typename T>
  bool read(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return false;
    convert(*it, pointer_ + "/" + key, out);
    return true;
  }

  const nlohmann::json* child(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const std::string& key) const { return pointer_ + "/" + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(pointer_ + "/" + it.key(), "unknown key");
    }
  }

  [[noreturn]] static void fail(const std::string& pointer, const std::string& what) {
    throw ConfigError("config " + pointer + ": " + what);
  }

 private:
  template <typename T>
  static void convert(const nlohmann::json& v, const std::string& ptr, T& out) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(ptr, "expected a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
        fail(ptr, "expected a non-negative integer");
      }
      out = static_cast<T>(v.get<std::uint64_t>());
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(ptr, "expected an integer");
      out = static_cast<T>(v.get<long long>());
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(ptr, "expected a number");
      out = static_cast<T>(v.get<double>());
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(ptr, "expected a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      if (!v.is_array()) fail(ptr, "expected an array of integers");
      out.clear();
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number_integer()) fail(ptr + "/" + std::to_string(i), "expected an integer");
        out.push_back(v[i].get<int>());
      }
    } else {
      static_assert(sizeof(T) == 0, "unsupported JSON field type");
    }
  }

  const nlohmann::json& j_;
  std::string pointer_;
  std::set<std::string> seen_;
};

}  // namespace c2s
