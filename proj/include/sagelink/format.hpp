#pragma once

#include <charconv>
#include <string>

namespace sagelink {

/// Shortest round-trip decimal form, locale-independent; identical doubles
/// always serialize to identical bytes.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace sagelink
