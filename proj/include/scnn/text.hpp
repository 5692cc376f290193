#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

namespace scnn {

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_real(double v) {
  if (v == 0.0) return "0";  // folds -0 as well
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Fixed-decimal text, e.g. for printed logits.
std::string format_fixed(double v, int decimals);

std::vector<std::string> split(std::string_view text, char sep);
std::string_view trim(std::string_view s) noexcept;

/// Strict number parsing: the whole string must be consumed.
bool parse_double(std::string_view s, double& out) noexcept;
bool parse_size(std::string_view s, std::size_t& out) noexcept;
bool parse_int(std::string_view s, long long& out) noexcept;

}  // namespace scnn
