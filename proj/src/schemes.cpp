// Copyright 2026 The theta-milstein Authors
// SPDX-License-Identifier: Apache-2.0

#include "theta_milstein/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>

#include "format.hpp"
#include "theta_milstein/errors.hpp"

namespace theta_milstein {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct Resolvent {
  const SdeProblem& problem;
  const State& z;
  double h;  // theta * dt
  const ImplicitSolverConfig& cfg;

  // Residual y - h f(y) - z together with the rounding floor of computing it.
  State residual(const State& y, double* floor) const {
    const State hf = h * problem.drift(y);
    if (floor) {
      *floor = 8.0 * kEps * (y.lpNorm<Eigen::Infinity>() + hf.lpNorm<Eigen::Infinity>() +
                             z.lpNorm<Eigen::Infinity>());
    }
    return y - hf - z;
  }

  bool converged(const State& y, const State& r, double floor) const {
    const double bound = std::max(cfg.abs_tol + cfg.rel_tol * y.lpNorm<Eigen::Infinity>(), floor);
    return r.allFinite() && r.lpNorm<Eigen::Infinity>() <= bound;
  }

  Matrix jacobian(const State& y) const {
    const int n = problem.dim();
    Matrix df(n, n);
    if (problem.has_drift_jacobian()) {
      df = problem.drift_jacobian(y);
    } else {
      for (int j = 0; j < n; ++j) {
        const double step = std::sqrt(kEps) * (1.0 + std::abs(y[j]));
        State plus = y;
        State minus = y;
        plus[j] += step;
        minus[j] -= step;
        df.col(j) = (problem.drift(plus) - problem.drift(minus)) / (2.0 * step);
      }
    }
    return Matrix::Identity(n, n) - h * df;
  }

  // One extra Newton step once within tolerance. Convergence is quadratic
  // there, so this lands at the rounding floor and keeps per-step solver error
  // from accumulating along a trajectory.
  State polish(const State& y, const State& r, double floor) const {
    const double norm = r.lpNorm<Eigen::Infinity>();
    if (norm <= floor) return y;
    const Eigen::FullPivLU<Matrix> lu(jacobian(y));
    if (!lu.isInvertible()) return y;
    const State trial = y + lu.solve(-r);
    const State trial_r = residual(trial, nullptr);
    if (trial_r.allFinite() && trial_r.lpNorm<Eigen::Infinity>() < norm) return trial;
    return y;
  }

  // Returns the root or nullopt when Newton gives up; `best` tracks the
  // smallest residual seen.
  std::optional<State> newton(SolveStats& stats, double& best) const {
    State y = z + h * problem.drift(z);
    double floor = 0.0;
    State r = residual(y, &floor);
    {
      // For strongly nonlinear drift and large |z| the predictor can land far
      // past the root; start from z when that is closer.
      double z_floor = 0.0;
      const State z_r = residual(z, &z_floor);
      if (!r.allFinite() || (z_r.allFinite() && z_r.lpNorm<Eigen::Infinity>() < r.lpNorm<Eigen::Infinity>())) {
        y = z;
        r = z_r;
        floor = z_floor;
      }
    }
    for (int it = 0; it < cfg.max_iters; ++it) {
      if (!r.allFinite()) return std::nullopt;
      const double norm = r.lpNorm<Eigen::Infinity>();
      best = std::min(best, norm);
      if (converged(y, r, floor)) return polish(y, r, floor);

      const Eigen::FullPivLU<Matrix> lu(jacobian(y));
      if (!lu.isInvertible()) return std::nullopt;
      const State delta = lu.solve(-r);
      if (!delta.allFinite()) return std::nullopt;
      ++stats.iterations;

      double scale = 1.0;
      bool accepted = false;
      for (int halving = 0; halving < 40; ++halving, scale *= 0.5) {
        const State trial = y + scale * delta;
        double trial_floor = 0.0;
        const State trial_r = residual(trial, &trial_floor);
        if (trial_r.allFinite() &&
            (trial_r.lpNorm<Eigen::Infinity>() < norm || converged(trial, trial_r, trial_floor))) {
          y = trial;
          r = trial_r;
          floor = trial_floor;
          accepted = true;
          break;
        }
      }
      if (!accepted) return std::nullopt;
    }
    best = std::min(best, r.lpNorm<Eigen::Infinity>());
    if (converged(y, r, floor)) return polish(y, r, floor);
    return std::nullopt;
  }

  std::optional<State> fixed_point(SolveStats& stats, double& best) const {
    State y = z;
    for (int it = 0; it < cfg.max_iters; ++it) {
      double floor = 0.0;
      const State r = residual(y, &floor);
      if (!r.allFinite()) return std::nullopt;
      best = std::min(best, r.lpNorm<Eigen::Infinity>());
      if (converged(y, r, floor)) return y;
      y = z + h * problem.drift(y);
      ++stats.iterations;
    }
    double floor = 0.0;
    const State r = residual(y, &floor);
    if (r.allFinite()) best = std::min(best, r.lpNorm<Eigen::Infinity>());
    if (converged(y, r, floor)) return y;
    return std::nullopt;
  }
};

State explicit_noise_part(const SdeProblem& problem, const State& y, double dw, double dt) {
  return problem.diffusion(y) * dw + 0.5 * l1g(problem, y) * (dw * dw - dt);
}

void check_step_args(const SdeProblem& problem, const State& x, double theta, double dt) {
  if (x.size() != problem.dim()) throw ContractViolation("step: state has the wrong dimension");
  if (!(theta >= 0.0 && theta <= 1.0)) throw DomainError("theta must lie in [0, 1]");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("dt must be positive and finite");
}

}  // namespace

const char* to_string(Scheme scheme) { return scheme == Scheme::kSstm ? "sstm" : "stm"; }

const char* to_string(GuardPolicy policy) {
  switch (policy) {
    case GuardPolicy::kStrict:
      return "strict";
    case GuardPolicy::kWarn:
      return "warn";
    case GuardPolicy::kOff:
      return "off";
  }
  return "warn";
}

Scheme parse_scheme(const std::string& text) {
  if (text == "sstm" || text == "SSTM") return Scheme::kSstm;
  if (text == "stm" || text == "STM") return Scheme::kStm;
  throw DomainError("unknown scheme '" + text + "' (expected sstm or stm)");
}

GuardPolicy parse_guard_policy(const std::string& text) {
  if (text == "strict") return GuardPolicy::kStrict;
  if (text == "warn") return GuardPolicy::kWarn;
  if (text == "off") return GuardPolicy::kOff;
  throw DomainError("unknown guard policy '" + text + "' (expected strict, warn or off)");
}

bool is_divergent(const State& x) { return !x.allFinite() || x.norm() > kDivergenceBound; }

void ImplicitSolverConfig::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw DomainError("solver tolerances must be positive");
  if (max_iters < 1) throw DomainError("solver max_iters must be >= 1");
}

void SchemeConfig::validate() const {
  if (!(theta >= 0.0 && theta <= 1.0)) throw DomainError("theta must lie in [0, 1]");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("dt must be positive and finite");
  solver.validate();
}

State implicit_solve(const SdeProblem& problem, const State& z, double theta, double dt,
                     const ImplicitSolverConfig& cfg, SolveStats* stats) {
  if (z.size() != problem.dim()) throw ContractViolation("implicit_solve: z has the wrong dimension");
  if (!z.allFinite()) throw ContractViolation("implicit_solve: z must be finite");

  SolveStats local;
  SolveStats& s = stats ? *stats : local;
  s = SolveStats{};
  const double h = theta * dt;
  if (h == 0.0) return z;

  const Resolvent resolvent{problem, z, h, cfg};
  double best = std::numeric_limits<double>::infinity();
  if (cfg.method == SolverMethod::kNewtonWithFixedPointFallback) {
    if (auto y = resolvent.newton(s, best)) {
      s.residual = resolvent.residual(*y, nullptr).lpNorm<Eigen::Infinity>();
      return *y;
    }
  }
  s.used_fallback = cfg.method == SolverMethod::kNewtonWithFixedPointFallback;
  if (auto y = resolvent.fixed_point(s, best)) {
    s.residual = resolvent.residual(*y, nullptr).lpNorm<Eigen::Infinity>();
    return *y;
  }
  s.residual = best;
  throw NonConvergence("implicit solve did not converge in " + std::to_string(cfg.max_iters) +
                           " iterations (best residual " + detail::format_double(best) + ")",
                       best);
}

SstmStep sstm_step(const SdeProblem& problem, const State& z_k, double dw, double theta, double dt,
                   const ImplicitSolverConfig& cfg, SolveStats* stats) {
  check_step_args(problem, z_k, theta, dt);
  SstmStep out;
  out.y = implicit_solve(problem, z_k, theta, dt, cfg, stats);
  out.z_next = z_k + problem.drift(out.y) * dt + explicit_noise_part(problem, out.y, dw, dt);
  return out;
}

State stm_step(const SdeProblem& problem, const State& y_k, double dw, double theta, double dt,
               const ImplicitSolverConfig& cfg, SolveStats* stats) {
  check_step_args(problem, y_k, theta, dt);
  const State rhs = y_k + (1.0 - theta) * dt * problem.drift(y_k) + explicit_noise_part(problem, y_k, dw, dt);
  if (is_divergent(rhs)) throw Divergence("explicit stage left the finite range", 0);
  return implicit_solve(problem, rhs, theta, dt, cfg, stats);
}

std::vector<std::string> check_guards(const SdeProblem& problem, const SchemeConfig& config) {
  config.validate();
  std::vector<std::string> warnings;
  if (config.guard == GuardPolicy::kOff) return warnings;

  const ThresholdSet limits = stepsize_thresholds(problem, config.theta);
  if (config.dt >= limits.wellposed_max) {
    warnings.push_back("theta*mu*dt >= 1: dt " + detail::format_double(config.dt) + " >= " +
                       detail::format_double(limits.wellposed_max) + ", implicit stage may have several roots");
  }
  if (config.dt >= limits.moment_bound_max) {
    warnings.push_back("dt " + detail::format_double(config.dt) + " >= 1/(2*theta*beta) = " +
                       detail::format_double(limits.moment_bound_max) + ", moment bound not guaranteed");
  }
  if (config.guard == GuardPolicy::kStrict && !warnings.empty()) throw GuardViolation(warnings.front());
  return warnings;
}

Trajectory integrate(const SdeProblem& problem, Scheme scheme, const State& y0, std::span<const double> noise,
                     const SchemeConfig& config) {
  if (y0.size() != problem.dim()) throw ContractViolation("integrate: y0 has the wrong dimension");
  if (!y0.allFinite()) throw ContractViolation("integrate: y0 must be finite");

  Trajectory traj;
  traj.scheme = scheme;
  traj.dt = config.dt;
  traj.flags.guard_warnings = check_guards(problem, config);

  const std::size_t steps = noise.size();
  const double theta = config.theta;
  const double dt = config.dt;
  traj.times.resize(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) traj.times[k] = static_cast<double>(k) * dt;
  traj.y_states.reserve(steps + 1);
  traj.y_states.push_back(y0);

  auto record = [&](const SolveStats& s) {
    traj.flags.max_solver_iters = std::max(traj.flags.max_solver_iters, s.iterations);
    traj.flags.total_solver_iters += s.iterations;
    if (s.used_fallback) ++traj.flags.fallback_count;
  };
  auto check = [](const State& x, std::size_t k) {
    if (is_divergent(x)) throw Divergence("state diverged at step " + std::to_string(k), k);
  };

  SolveStats stats;
  if (scheme == Scheme::kStm) {
    for (std::size_t k = 0; k < steps; ++k) {
      State next;
      try {
        next = stm_step(problem, traj.y_states.back(), noise[k], theta, dt, config.solver, &stats);
      } catch (const Divergence&) {
        throw Divergence("state diverged at step " + std::to_string(k + 1), k + 1);
      }
      record(stats);
      check(next, k + 1);
      traj.y_states.push_back(std::move(next));
    }
    return traj;
  }

  std::vector<State> zs;
  zs.reserve(steps + 1);
  zs.push_back(y0 - theta * problem.drift(y0) * dt);
  check(zs.back(), 0);
  for (std::size_t k = 0; k < steps; ++k) {
    SstmStep step = sstm_step(problem, zs.back(), noise[k], theta, dt, config.solver, &stats);
    record(stats);
    check(step.z_next, k + 1);
    if (k > 0) traj.y_states.push_back(std::move(step.y));
    zs.push_back(std::move(step.z_next));
  }
  // closes y_N = F(z_N)
  if (steps > 0) {
    State last = implicit_solve(problem, zs.back(), theta, dt, config.solver, &stats);
    record(stats);
    check(last, steps);
    traj.y_states.push_back(std::move(last));
  }
  traj.z_states = std::move(zs);
  return traj;
}

void write_trajectory_csv(const Trajectory& trajectory, std::ostream& out) {
  const auto n = trajectory.y_states.empty() ? 0 : trajectory.y_states.front().size();
  out << "t";
  for (Eigen::Index i = 1; i <= n; ++i) out << ",y_" << i;
  if (trajectory.z_states) {
    for (Eigen::Index i = 1; i <= n; ++i) out << ",z_" << i;
  }
  out << '\n';
  for (std::size_t k = 0; k < trajectory.times.size(); ++k) {
    out << detail::format_double(trajectory.times[k]);
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << detail::format_double(trajectory.y_states[k][i]);
    if (trajectory.z_states) {
      for (Eigen::Index i = 0; i < n; ++i) out << ',' << detail::format_double((*trajectory.z_states)[k][i]);
    }
    out << '\n';
  }
}

}  // namespace theta_milstein
