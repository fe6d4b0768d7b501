// Copyright 2026 The theta-milstein Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <istream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace theta_milstein::cli {

/// Bad flags, config files or values. Maps to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IniSection {
  std::string name;
  std::vector<std::pair<std::string, std::string>> entries;  // file order
};

/// Flat INI: `[section]` headers, `key = value` lines, `#` or `;` comments.
/// Entries before the first header land in a section named "".
std::vector<IniSection> parse_ini(std::istream& in, const std::string& source);

/// "2^-4..2^-9", or a comma list whose items are numbers or 2^k.
std::vector<double> parse_stepsizes(const std::string& text);

/// "start:step:stop" (inclusive), or a comma list of numbers.
std::vector<double> parse_grid(const std::string& text);

double parse_number(const std::string& text, const std::string& what);

/// Shortest text that reads back to the same double.
std::string format_number(double value);
std::string format_list(const std::vector<double>& values);

}  // namespace theta_milstein::cli
