#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lobsim/error.hpp"

namespace lobsim::csv {

// Plain comma-separated fields; the formats used here never quote.
inline std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string where(std::size_t line) { return "line " + std::to_string(line) + ": "; }

inline std::int64_t to_int(const std::string& s, std::size_t line) {
  std::int64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end || s.empty())
    throw Error(Errc::ParseError, where(line) + "expected an integer, got '" + s + "'");
  return v;
}

inline double to_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::ParseError, where(line) + "expected a number, got '" + s + "'");
  }
}

// Empty field or "NA" reads as missing.
inline std::optional<double> to_optional(const std::string& s, std::size_t line) {
  if (s.empty() || s == "NA" || s == "nan") return std::nullopt;
  return to_double(s, line);
}

inline std::string format(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline std::string format(const std::optional<double>& v) { return v ? format(*v) : std::string(); }

// Reads a header-checked CSV; calls fn(fields, line_number) per data row.
template <class Fn>
void read(std::istream& in, std::string_view expected_header, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (!expected_header.empty() && line != expected_header)
        throw Error(Errc::ParseError, where(lineno) + "expected header '" + std::string(expected_header) + "'");
      continue;
    }
    fn(split(line), lineno);
  }
  if (header) throw Error(Errc::ParseError, "empty CSV input");
}

}  // namespace lobsim::csv
