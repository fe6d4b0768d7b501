// Copyright 2026 The theta-milstein Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace theta_milstein::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;  // selfcheck ran but a check failed
inline constexpr int kExitConfig = 2;       // flags, config file or value validation
inline constexpr int kExitRuntime = 3;      // divergence, non-convergence, guard, reference failure
inline constexpr int kExitIo = 4;
inline constexpr int kExitInternal = 5;

/// Runs one subcommand. `args` excludes the program name. The one-line
/// summary goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace theta_milstein::cli
