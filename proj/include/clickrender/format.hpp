#pragma once

#include <charconv>
#include <string>

namespace clickrender {

/// Shortest round-trip decimal for a double. Locale independent, so CSV and
/// JSON artifacts are byte-stable across runs.
inline std::string fmt_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace clickrender
