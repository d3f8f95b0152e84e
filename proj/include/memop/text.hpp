#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>

#include "memop/error.hpp"

namespace memop {

// Shortest decimal that reads back to the same value (at most 17 significant digits).
template <class T>
std::string format_real(T v) {
  static_assert(std::is_floating_point_v<T>);
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_number(std::string_view s, std::string_view what) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw FormatError(std::string(what) + ": cannot parse '" + std::string(s) + "' as a number");
  }
  return v;
}

}  // namespace memop
