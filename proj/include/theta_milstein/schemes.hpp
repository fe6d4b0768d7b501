// Copyright 2026 The theta-milstein Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "theta_milstein/sde_core.hpp"

namespace theta_milstein {

enum class Scheme { kSstm, kStm };
enum class GuardPolicy { kStrict, kWarn, kOff };
enum class SolverMethod { kNewtonWithFixedPointFallback, kFixedPointOnly };

const char* to_string(Scheme scheme);
const char* to_string(GuardPolicy policy);
Scheme parse_scheme(const std::string& text);
GuardPolicy parse_guard_policy(const std::string& text);

/// States with a non-finite component or a norm above this are divergent.
inline constexpr double kDivergenceBound = 1e150;
bool is_divergent(const State& x);

struct ImplicitSolverConfig {
  double rel_tol = 1e-12;
  double abs_tol = 1e-14;
  int max_iters = 50;
  SolverMethod method = SolverMethod::kNewtonWithFixedPointFallback;

  void validate() const;
};

struct SchemeConfig {
  double theta = 1.0;
  double dt = 0.01;
  ImplicitSolverConfig solver;
  GuardPolicy guard = GuardPolicy::kWarn;

  void validate() const;
};

struct SolveStats {
  int iterations = 0;
  bool used_fallback = false;
  double residual = 0.0;
};

/// Solves y = z + theta*dt*f(y) for y.
///
/// Newton on y - theta*dt*f(y) - z with a backtracking line search, started
/// from the predictor z + theta*dt*f(z), or from z when z has the smaller
/// residual. The drift Jacobian comes from the
/// problem when it has one, otherwise from central differences. If Newton
/// fails (singular Jacobian, no progress, iteration cap) the fixed-point map
/// y <- z + theta*dt*f(y) is tried before NonConvergence is thrown.
///
/// Converged means |G(y)|_inf <= abs_tol + rel_tol*|y|_inf, where the bound is
/// widened to the rounding floor of evaluating G when that floor is larger.
State implicit_solve(const SdeProblem& problem, const State& z, double theta, double dt,
                     const ImplicitSolverConfig& cfg, SolveStats* stats = nullptr);

struct SstmStep {
  State z_next;
  State y;  // y_k = F(z_k)
};

/// One split-step theta-Milstein step from z_k.
SstmStep sstm_step(const SdeProblem& problem, const State& z_k, double dw, double theta, double dt,
                   const ImplicitSolverConfig& cfg, SolveStats* stats = nullptr);

/// One stochastic theta-Milstein step from y_k. Throws Divergence (step 0)
/// when the explicit part already leaves the finite range.
State stm_step(const SdeProblem& problem, const State& y_k, double dw, double theta, double dt,
               const ImplicitSolverConfig& cfg, SolveStats* stats = nullptr);

struct TrajectoryFlags {
  std::vector<std::string> guard_warnings;
  int max_solver_iters = 0;
  long total_solver_iters = 0;
  int fallback_count = 0;
};

struct Trajectory {
  Scheme scheme = Scheme::kStm;
  double dt = 0.0;
  std::vector<double> times;
  std::vector<State> y_states;
  std::optional<std::vector<State>> z_states;  // SSTM only
  TrajectoryFlags flags;
};

/// Threshold checks for `config` on `problem`. Returns the warnings; under
/// GuardPolicy::kStrict a violation throws GuardViolation instead.
std::vector<std::string> check_guards(const SdeProblem& problem, const SchemeConfig& config);

/// Runs `noise.size()` steps. Throws Divergence carrying the step index when
/// a state leaves the finite range.
Trajectory integrate(const SdeProblem& problem, Scheme scheme, const State& y0, std::span<const double> noise,
                     const SchemeConfig& config);

/// Columns t, y_1..y_n and, for SSTM, z_1..z_n.
void write_trajectory_csv(const Trajectory& trajectory, std::ostream& out);

}  // namespace theta_milstein
