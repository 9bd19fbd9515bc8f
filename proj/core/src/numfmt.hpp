#pragma once

#include <charconv>
#include <span>
#include <string>
#include <system_error>

namespace specrcv::detail {

/// Shortest decimal form that parses back to the same double.
inline std::string shortest(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

inline std::string join(std::span<const double> values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += shortest(values[i]);
  }
  return out + "]";
}

}  // namespace specrcv::detail
