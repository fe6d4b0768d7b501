// Copyright 2026 The theta-milstein Authors
// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

namespace theta_milstein::cli {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.push_back(trim(text.substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

// "2^-4" -> -4; anything else is not a power of two.
bool parse_power(const std::string& text, int& exponent) {
  if (text.rfind("2^", 0) != 0) return false;
  const std::string rest = text.substr(2);
  const auto* end = rest.data() + rest.size();
  const auto [ptr, ec] = std::from_chars(rest.data(), end, exponent);
  return ec == std::errc() && ptr == end;
}

double parse_step_item(const std::string& item) {
  int e = 0;
  if (parse_power(item, e)) return std::ldexp(1.0, e);
  return parse_number(item, "stepsize");
}

}  // namespace

std::vector<IniSection> parse_ini(std::istream& in, const std::string& source) {
  std::vector<IniSection> sections{{"", {}}};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#' || text[0] == ';') continue;
    const std::string where = source + ":" + std::to_string(lineno);
    if (text.front() == '[') {
      if (text.back() != ']') throw ConfigError(where + ": unterminated section header");
      sections.push_back({trim(text.substr(1, text.size() - 2)), {}});
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    std::string key = trim(text.substr(0, eq));
    std::string value = trim(text.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    sections.back().entries.emplace_back(std::move(key), std::move(value));
  }
  return sections;
}

double parse_number(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  double value = 0.0;
  const auto* end = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(t.data(), end, value);
  if (t.empty() || ec != std::errc() || ptr != end) throw ConfigError("invalid " + what + " '" + text + "'");
  return value;
}

std::vector<double> parse_stepsizes(const std::string& text) {
  const auto dots = text.find("..");
  std::vector<double> out;
  if (dots != std::string::npos) {
    int a = 0;
    int b = 0;
    if (!parse_power(trim(text.substr(0, dots)), a) || !parse_power(trim(text.substr(dots + 2)), b)) {
      throw ConfigError("stepsize range must look like 2^-a..2^-b, got '" + text + "'");
    }
    const int dir = b >= a ? 1 : -1;
    for (int e = a;; e += dir) {
      out.push_back(std::ldexp(1.0, e));
      if (e == b) break;
    }
    return out;
  }
  for (const auto& item : split(text, ',')) out.push_back(parse_step_item(item));
  return out;
}

std::vector<double> parse_grid(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() == 1) {
    std::vector<double> out;
    for (const auto& item : split(text, ',')) out.push_back(parse_number(item, "grid value"));
    return out;
  }
  if (parts.size() != 3) throw ConfigError("grid must be start:step:stop or a comma list, got '" + text + "'");
  const double start = parse_number(parts[0], "grid start");
  const double step = parse_number(parts[1], "grid step");
  const double stop = parse_number(parts[2], "grid stop");
  if (!(step > 0.0) || !(stop >= start)) throw ConfigError("grid '" + text + "' needs step > 0 and stop >= start");
  const double span = (stop - start) / step;
  if (span > 1e7) throw ConfigError("grid '" + text + "' has too many points");
  const auto count = static_cast<long>(std::floor(span + 1e-9)) + 1;
  std::vector<double> out;
  out.reserve(count);
  for (long i = 0; i < count; ++i) out.push_back(start + static_cast<double>(i) * step);
  return out;
}

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

std::string format_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_number(values[i]);
  }
  return out;
}

}  // namespace theta_milstein::cli
