// Copyright 2026 The theta-milstein Authors
// SPDX-License-Identifier: Apache-2.0

#include "theta_milstein/sde_core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "theta_milstein/errors.hpp"
#include "theta_milstein/noise.hpp"

namespace theta_milstein {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_theta(double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw DomainError("theta must lie in [0, 1], got " + std::to_string(theta));
  }
}

double require(const ParamMap& params, const std::string& problem, const std::string& key) {
  const auto it = params.find(key);
  if (it == params.end()) throw DomainError(problem + ": missing parameter '" + key + "'");
  if (!std::isfinite(it->second)) throw DomainError(problem + ": parameter '" + key + "' is not finite");
  return it->second;
}

void reject_unknown(const ParamMap& params, const std::string& problem, std::set<std::string> allowed) {
  allowed.insert("dim");
  for (const auto& [key, value] : params) {
    if (!allowed.contains(key)) throw DomainError(problem + ": unknown parameter '" + key + "'");
  }
}

int dim_param(const ParamMap& params, const std::string& problem) {
  const auto it = params.find("dim");
  if (it == params.end()) return 1;
  const double d = it->second;
  if (!(d >= 1.0) || d != std::floor(d) || d > 1e6) {
    throw DomainError(problem + ": dim must be a positive integer");
  }
  return static_cast<int>(d);
}

SdeProblem make_linear(const ParamMap& params) {
  reject_unknown(params, "linear", {"mu", "c"});
  const double mu = require(params, "linear", "mu");
  const double c = require(params, "linear", "c");
  const int n = dim_param(params, "linear");

  SdeProblem::Definition def;
  def.name = "linear";
  def.dim = n;
  def.drift = [mu](const State& x) -> State { return mu * x; };
  def.diffusion = [c](const State& x) -> State { return c * x; };
  def.diffusion_jacobian = [c, n](const State&) -> Matrix { return c * Matrix::Identity(n, n); };
  def.drift_jacobian = [mu, n](const State&) -> Matrix { return mu * Matrix::Identity(n, n); };
  def.exact_solution = [mu, c](const State& x0, double t, double w) -> State {
    return x0 * std::exp((mu - 0.5 * c * c) * t + c * w);
  };
  def.constants.mu = mu;
  def.constants.c = c * c;
  def.constants.sigma = c * c * c * c;
  def.constants.k_linear = mu * mu;
  if (const double g = -(2.0 * mu + c * c); g > 0.0) def.constants.gamma = g;
  return SdeProblem(std::move(def));
}

SdeProblem make_ginzburg_landau(const ParamMap& params) {
  reject_unknown(params, "ginzburg_landau", {"eta", "lambda", "s"});
  const double eta = require(params, "ginzburg_landau", "eta");
  const double lambda = require(params, "ginzburg_landau", "lambda");
  const double s = require(params, "ginzburg_landau", "s");
  if (!(lambda > 0.0)) throw DomainError("ginzburg_landau: lambda must be positive");
  const int n = dim_param(params, "ginzburg_landau");
  const double linear = eta + 0.5 * s * s;

  SdeProblem::Definition def;
  def.name = "ginzburg_landau";
  def.dim = n;
  def.drift = [linear, lambda](const State& x) -> State {
    return (linear * x.array() - lambda * x.array().cube()).matrix();
  };
  def.diffusion = [s](const State& x) -> State { return s * x; };
  def.diffusion_jacobian = [s, n](const State&) -> Matrix { return s * Matrix::Identity(n, n); };
  def.drift_jacobian = [linear, lambda](const State& x) -> Matrix {
    return (linear - 3.0 * lambda * x.array().square()).matrix().asDiagonal();
  };
  def.constants.mu = linear;
  def.constants.c = s * s;
  def.constants.sigma = s * s * s * s;
  // 2<x,f(x)> + |g(x)|^2 = 2(eta + s^2)|x|^2 - 2 lambda sum x_i^4
  if (const double g = -2.0 * (eta + s * s); g > 0.0) def.constants.gamma = g;
  return SdeProblem(std::move(def));
}

SdeProblem make_cubic_additive(const ParamMap& params) {
  reject_unknown(params, "cubic_additive", {"a", "s"});
  const double a = require(params, "cubic_additive", "a");
  const double s = require(params, "cubic_additive", "s");
  const int n = dim_param(params, "cubic_additive");

  SdeProblem::Definition def;
  def.name = "cubic_additive";
  def.dim = n;
  def.drift = [a](const State& x) -> State { return (a * x.array() - x.array().cube()).matrix(); };
  def.diffusion = [s, n](const State&) -> State { return State::Constant(n, s); };
  def.diffusion_jacobian = [n](const State&) -> Matrix { return Matrix::Zero(n, n); };
  def.drift_jacobian = [a](const State& x) -> Matrix {
    return (a - 3.0 * x.array().square()).matrix().asDiagonal();
  };
  def.constants.mu = a;
  def.constants.c = 0.0;
  def.constants.sigma = 0.0;
  return SdeProblem(std::move(def));
}

}  // namespace

void ProblemConstants::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(mu)) throw DomainError("constant mu must be finite");
  if (!(c >= 0.0) || !finite(c)) throw DomainError("constant c must be finite and >= 0");
  if (!(sigma >= 0.0) || !finite(sigma)) throw DomainError("constant sigma must be finite and >= 0");
  if (k_linear && (!(*k_linear >= 0.0) || !finite(*k_linear))) {
    throw DomainError("constant k_linear must be finite and >= 0");
  }
  if (gamma && (!(*gamma > 0.0) || !finite(*gamma))) throw DomainError("constant gamma must be > 0");
}

SdeProblem::SdeProblem(Definition def) : def_(std::move(def)) {
  if (def_.dim < 1) throw ContractViolation("problem dimension must be >= 1");
  if (!def_.drift || !def_.diffusion || !def_.diffusion_jacobian) {
    throw ContractViolation("problem '" + def_.name + "' needs drift, diffusion and diffusion_jacobian");
  }
  def_.constants.validate();
}

void SdeProblem::check_dim(const State& x, const char* what) const {
  if (x.size() != def_.dim) {
    throw ContractViolation(std::string(what) + ": expected a state of length " + std::to_string(def_.dim) +
                            ", got " + std::to_string(x.size()));
  }
}

State SdeProblem::drift(const State& x) const {
  check_dim(x, "drift");
  State out = def_.drift(x);
  check_dim(out, "drift result");
  return out;
}

State SdeProblem::diffusion(const State& x) const {
  check_dim(x, "diffusion");
  State out = def_.diffusion(x);
  check_dim(out, "diffusion result");
  return out;
}

Matrix SdeProblem::diffusion_jacobian(const State& x) const {
  check_dim(x, "diffusion_jacobian");
  Matrix out = def_.diffusion_jacobian(x);
  if (out.rows() != def_.dim || out.cols() != def_.dim) {
    throw ContractViolation("diffusion_jacobian must return an n x n matrix");
  }
  return out;
}

Matrix SdeProblem::drift_jacobian(const State& x) const {
  if (!def_.drift_jacobian) throw ContractViolation("problem '" + def_.name + "' has no drift Jacobian");
  check_dim(x, "drift_jacobian");
  Matrix out = def_.drift_jacobian(x);
  if (out.rows() != def_.dim || out.cols() != def_.dim) {
    throw ContractViolation("drift_jacobian must return an n x n matrix");
  }
  return out;
}

State SdeProblem::exact_solution(const State& x0, double t, double w) const {
  if (!def_.exact_solution) throw ContractViolation("problem '" + def_.name + "' has no exact solution");
  check_dim(x0, "exact_solution");
  State out = def_.exact_solution(x0, t, w);
  check_dim(out, "exact_solution result");
  return out;
}

State l1g(const SdeProblem& problem, const State& x) {
  return problem.diffusion_jacobian(x) * problem.diffusion(x);
}

MonotoneConstants monotone_constants(const SdeProblem& problem) {
  const State zero = State::Zero(problem.dim());
  const double f0 = problem.drift(zero).squaredNorm();
  const double g0 = problem.diffusion(zero).squaredNorm();
  const auto& k = problem.constants();
  return {std::max(0.5 * f0, 2.0 * g0), std::max(k.mu + 0.5, 2.0 * k.c)};
}

ThresholdSet stepsize_thresholds(const SdeProblem& problem, double theta) {
  check_theta(theta);
  const auto& k = problem.constants();
  ThresholdSet out;
  if (theta > 0.0 && k.mu > 0.0) out.wellposed_max = 1.0 / (theta * k.mu);
  if (theta > 0.0) {
    const double beta = monotone_constants(problem).beta;
    out.moment_bound_max = beta > 0.0 ? 1.0 / (2.0 * theta * beta) : kInf;
  }

  if (!k.gamma) return out;
  if (theta <= 0.5) {
    if (!k.k_linear) return out;
    const double denom = (1.0 - 2.0 * theta) * *k.k_linear + 0.5 * k.sigma;
    const double branch = denom > 0.0 ? *k.gamma / denom : kInf;
    out.stability_max = std::min(branch, out.wellposed_max);
  } else {
    const double branch = k.sigma > 0.0 ? 2.0 * *k.gamma / k.sigma : kInf;
    out.stability_max = std::min(branch, out.wellposed_max);
  }
  return out;
}

SdeProblem builtin_problem(const std::string& name, const ParamMap& params) {
  if (name == "linear") return make_linear(params);
  if (name == "ginzburg_landau") return make_ginzburg_landau(params);
  if (name == "cubic_additive") return make_cubic_additive(params);
  throw DomainError("unknown built-in problem '" + name + "'");
}

double spot_check_monotone(const SdeProblem& problem, int samples, double lo, double hi, std::uint64_t seed) {
  if (samples < 1 || !(hi > lo)) throw DomainError("spot_check_monotone: need samples >= 1 and hi > lo");
  const auto [alpha, beta] = monotone_constants(problem);
  const CounterRng rng(seed, 0);
  const int n = problem.dim();
  double worst = -kInf;
  std::uint64_t block = 0;
  for (int s = 0; s < samples; ++s) {
    State x(n);
    for (int i = 0; i < n; i += 2) {
      const auto [u, v] = rng.uniform_pair(block++);
      x[i] = lo + (hi - lo) * u;
      if (i + 1 < n) x[i + 1] = lo + (hi - lo) * v;
    }
    const double lhs = std::max(x.dot(problem.drift(x)), problem.diffusion(x).squaredNorm());
    worst = std::max(worst, lhs - (alpha + beta * x.squaredNorm()));
  }
  return worst;
}

}  // namespace theta_milstein
