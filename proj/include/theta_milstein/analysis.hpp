// Copyright 2026 The theta-milstein Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "theta_milstein/schemes.hpp"
#include "theta_milstein/sde_core.hpp"

namespace theta_milstein {

enum class ReferenceKind { kExactSolution, kFineGridSelf };
const char* to_string(ReferenceKind kind);

/// Settings shared by the Monte Carlo engines. Path `i` always draws its
/// noise from (seed, i), so results never depend on `workers`.
struct MonteCarloSetup {
  Scheme scheme = Scheme::kStm;
  double theta = 1.0;
  State y0;
  double t_end = 1.0;
  int paths = 1000;
  std::uint64_t seed = 0;
  int workers = 1;
  ImplicitSolverConfig solver;
  GuardPolicy guard = GuardPolicy::kWarn;
};

struct ConvergenceReport {
  std::string problem;
  Scheme scheme = Scheme::kStm;
  double theta = 0.0;
  std::vector<double> stepsizes;  // strictly decreasing
  std::vector<double> errors;     // (E[max_k |x(t_k) - y_k|^p])^(1/p)
  std::vector<double> standard_errors;
  std::vector<int> diverged_paths;  // per stepsize
  double fitted_order = 0.0;
  bool fitted_order_valid = false;  // false when some error is zero or infinite
  int p = 2;
  int paths = 0;
  ReferenceKind reference = ReferenceKind::kExactSolution;
  double reference_dt = 0.0;
  std::vector<std::string> guard_warnings;
};

/// Strong error at each stepsize against the exact solution when the problem
/// has one, else against a theta=1 STM run `refinement` times finer than the
/// smallest stepsize. One fine noise grid per path drives every level.
ConvergenceReport estimate_strong_order(const SdeProblem& problem, const MonteCarloSetup& setup,
                                        std::vector<double> stepsizes, int p, int refinement = 4);

struct MomentBoundReport {
  double dt = 0.0;
  double theta = 0.0;
  int p = 2;
  int paths = 0;
  double estimate = 0.0;  // E[max_k |y_k|^p] over paths that stayed finite
  double standard_error = 0.0;
  int divergent_paths = 0;
  bool finite = true;
  std::vector<std::string> guard_warnings;

  double divergent_fraction() const { return paths > 0 ? static_cast<double>(divergent_paths) / paths : 0.0; }
};

MomentBoundReport check_moment_bound(const SdeProblem& problem, const MonteCarloSetup& setup, double dt, int p);

enum class DecayStatus { kOk, kUnderflow, kDivergent };
const char* to_string(DecayStatus status);

struct StabilityReport {
  std::string problem;
  double dt = 0.0;
  double theta = 0.0;
  int paths = 0;
  std::vector<double> times;
  std::vector<double> second_moments;  // E|y_k|^2
  std::vector<double> standard_errors;
  double fitted_decay = 0.0;  // minus the slope of log E|y_k|^2 over the tail half
  double decay_standard_error = 0.0;
  int fit_points = 0;
  DecayStatus status = DecayStatus::kOk;
  int divergent_paths = 0;
  std::optional<double> predicted_gamma_delta;
  std::vector<std::string> guard_warnings;
};

StabilityReport estimate_ms_decay(const SdeProblem& problem, const MonteCarloSetup& setup, double dt);

/// Decay rate of the discrete second moment guaranteed for theta-Milstein
/// under 2<x,f(x)> + |g(x)|^2 <= -gamma |x|^2. theta <= 1/2 uses the
/// linear-growth branch and needs `k_linear`.
double gamma_delta(double theta, double dt, double gamma, std::optional<double> k_linear, double sigma);

/// Exact one-step multiplier of E|y_k|^2 for theta-Milstein on dx = mu x dt + c x dw.
double linear_amplification(double theta, double mu, double c, double dt);

/// Stepsize below which linear_amplification < 1: (-2mu - c^2) / (c^4/2 + (1-2theta) mu^2).
/// +inf when the denominator is not positive and 2mu + c^2 < 0; the value may
/// be negative, meaning no positive stepsize is stable.
double linear_critical_dt(double theta, double mu, double c);

enum class LinearRegime { kConditional, kUnconditional };
const char* to_string(LinearRegime regime);

/// theta > 1/2 with mu^2 >= c^4 / (2(2theta-1)) is unconditional; everything else conditional.
LinearRegime classify_linear(double theta, double mu, double c);

struct RegionRow {
  double theta = 0.0;
  double dt = 0.0;
  double mu = 0.0;
  double c = 0.0;
  double amplification = 0.0;  // NaN where theta*mu*dt == 1
  bool sde_stable = false;
  bool scheme_stable = false;
  LinearRegime regime = LinearRegime::kConditional;
  double critical_dt = 0.0;
};

std::vector<RegionRow> linear_region_scan(const std::vector<double>& thetas, const std::vector<double>& dts,
                                          const std::vector<double>& mus, const std::vector<double>& cs);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Unweighted least squares y = slope * x + intercept.
LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace theta_milstein
