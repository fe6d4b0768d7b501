// Copyright 2026 The theta-milstein Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "theta_milstein/analysis.hpp"
#include "theta_milstein/noise.hpp"

namespace theta_milstein {

/// First line of every CSV the tools emit.
std::string csv_schema_line(const std::string& subcommand);

// JSON documents are returned as serialized text. Non-finite numbers are
// written as the strings "inf", "-inf" and "nan".
std::string to_json(const ConvergenceReport& report);
std::string to_json(const StabilityReport& report);
std::string to_json(const MomentBoundReport& report);
std::string to_json(const MomentReport& report);
std::string to_json(const std::vector<RegionRow>& rows);
std::string to_json(const Trajectory& trajectory);

// CSV tables, without the schema comment line.
void write_csv(const ConvergenceReport& report, std::ostream& out);  // dt,error,stderr,p,paths
void write_csv(const StabilityReport& report, std::ostream& out);    // t,second_moment,stderr
void write_csv(const std::vector<RegionRow>& rows, std::ostream& out);

}  // namespace theta_milstein
