#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace shift {

// RFC 4180 quoting, applied only when the field needs it.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

// Round-trippable decimal; empty for missing or non-finite values.
inline std::string csv_number(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return {};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  return buf;
}

}  // namespace shift
