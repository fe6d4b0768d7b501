// Copyright 2026 The theta-milstein Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>

namespace theta_milstein {

using State = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using VectorField = std::function<State(const State&)>;
using JacobianField = std::function<Matrix(const State&)>;
/// Pathwise solution x(t) given x(0) and the Brownian value w(t).
using ExactSolution = std::function<State(const State& x0, double t, double w)>;

using ParamMap = std::map<std::string, double>;

/// Regularity constants declared by whoever writes the problem. Nothing in the
/// library derives them; `spot_check_monotone` can sample them.
struct ProblemConstants {
  double mu = 0.0;     // one-sided Lipschitz constant of f
  double c = 0.0;      // |g(x)-g(y)|^2 <= c |x-y|^2
  double sigma = 0.0;  // |L1g(x)-L1g(y)|^2 <= sigma |x-y|^2
  std::optional<double> k_linear;  // |f(x)|^2 <= K |x|^2
  std::optional<double> gamma;     // 2<x,f(x)> + |g(x)|^2 <= -gamma |x|^2
  std::optional<double> d_poly;    // carried, never checked
  std::optional<double> q_poly;

  void validate() const;
};

/// dx = f(x) dt + g(x) dw with scalar Brownian motion w.
///
/// Immutable once built. Every evaluator checks that its argument has length
/// `dim()` and throws ContractViolation otherwise.
class SdeProblem {
 public:
  struct Definition {
    std::string name;
    int dim = 1;
    VectorField drift;
    VectorField diffusion;
    JacobianField diffusion_jacobian;
    JacobianField drift_jacobian;  // optional; Newton falls back to differences
    ProblemConstants constants;
    ExactSolution exact_solution;  // optional
  };

  explicit SdeProblem(Definition def);

  const std::string& name() const noexcept { return def_.name; }
  int dim() const noexcept { return def_.dim; }
  const ProblemConstants& constants() const noexcept { return def_.constants; }

  State drift(const State& x) const;
  State diffusion(const State& x) const;
  Matrix diffusion_jacobian(const State& x) const;

  bool has_drift_jacobian() const noexcept { return static_cast<bool>(def_.drift_jacobian); }
  Matrix drift_jacobian(const State& x) const;

  bool has_exact_solution() const noexcept { return static_cast<bool>(def_.exact_solution); }
  State exact_solution(const State& x0, double t, double w) const;

 private:
  void check_dim(const State& x, const char* what) const;

  Definition def_;
};

/// (dg/dx)(x) g(x), the direction of the Milstein correction.
State l1g(const SdeProblem& problem, const State& x);

struct MonotoneConstants {
  double alpha = 0.0;
  double beta = 0.0;
};

/// alpha = (|f(0)|^2 / 2) v (2 |g(0)|^2), beta = (mu + 1/2) v (2c).
MonotoneConstants monotone_constants(const SdeProblem& problem);

struct ThresholdSet {
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  double wellposed_max = kInf;     // theta mu dt < 1
  double moment_bound_max = kInf;  // dt < 1/(2 theta beta)
  std::optional<double> stability_max;
};

ThresholdSet stepsize_thresholds(const SdeProblem& problem, double theta);

/// Built-in problems: "linear" {mu, c}, "ginzburg_landau" {eta, lambda, s},
/// "cubic_additive" {a, s}. Every problem also takes an optional "dim"
/// (default 1); the coefficients then act componentwise.
SdeProblem builtin_problem(const std::string& name, const ParamMap& params);

/// Largest value of <x,f(x)> v |g(x)|^2 - (alpha + beta |x|^2) over `samples`
/// uniform draws in [lo, hi]^n. Non-positive means no violation was found.
double spot_check_monotone(const SdeProblem& problem, int samples, double lo, double hi,
                           std::uint64_t seed);

}  // namespace theta_milstein
