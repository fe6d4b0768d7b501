// Copyright 2026 The theta-milstein Authors
// SPDX-License-Identifier: Apache-2.0

#include "theta_milstein/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "parallel.hpp"
#include "theta_milstein/errors.hpp"
#include "theta_milstein/noise.hpp"

namespace theta_milstein {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using detail::RunningMoments;

std::size_t steps_for(double t_end, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("stepsize must be positive and finite");
  const double ratio = t_end / dt;
  const double steps = std::round(ratio);
  if (steps < 1.0 || std::abs(steps - ratio) > 1e-9 * std::max(1.0, ratio)) {
    throw DomainError("stepsize " + std::to_string(dt) + " does not divide t_end " + std::to_string(t_end));
  }
  return static_cast<std::size_t>(steps);
}

void validate_setup(const SdeProblem& problem, const MonteCarloSetup& setup) {
  if (!(setup.theta >= 0.0 && setup.theta <= 1.0)) throw DomainError("theta must lie in [0, 1]");
  if (!(setup.t_end > 0.0) || !std::isfinite(setup.t_end)) throw DomainError("t_end must be positive");
  if (setup.y0.size() != problem.dim()) throw ContractViolation("y0 has the wrong dimension");
  if (!setup.y0.allFinite()) throw ContractViolation("y0 must be finite");
  if (setup.paths < 1) throw DomainError("path count must be positive");
  if (setup.workers < 1) throw DomainError("workers must be >= 1");
  setup.solver.validate();
}

void validate_even_p(int p) {
  if (p < 2 || p % 2 != 0) throw DomainError("moment order p must be an even integer >= 2");
}

SchemeConfig scheme_config(const MonteCarloSetup& setup, double dt) {
  SchemeConfig cfg;
  cfg.theta = setup.theta;
  cfg.dt = dt;
  cfg.solver = setup.solver;
  cfg.guard = setup.guard;
  return cfg;
}

void append_unique(std::vector<std::string>& into, const std::vector<std::string>& from) {
  for (const auto& w : from) {
    if (std::find(into.begin(), into.end(), w) == into.end()) into.push_back(w);
  }
}

double int_pow(double x, int p) {
  double out = 1.0;
  for (int i = 0; i < p; ++i) out *= x;
  return out;
}

}  // namespace

const char* to_string(ReferenceKind kind) {
  return kind == ReferenceKind::kExactSolution ? "exact_solution" : "fine_grid_self";
}

const char* to_string(DecayStatus status) {
  switch (status) {
    case DecayStatus::kOk:
      return "ok";
    case DecayStatus::kUnderflow:
      return "underflow";
    case DecayStatus::kDivergent:
      return "divergent";
  }
  return "ok";
}

const char* to_string(LinearRegime regime) {
  return regime == LinearRegime::kUnconditional ? "unconditional" : "conditional";
}

LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("least_squares needs two or more (x, y) pairs");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("least_squares: x values are all equal");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

ConvergenceReport estimate_strong_order(const SdeProblem& problem, const MonteCarloSetup& setup,
                                        std::vector<double> stepsizes, int p, int refinement) {
  validate_setup(problem, setup);
  validate_even_p(p);
  if (setup.paths < 100) throw DomainError("estimate_strong_order needs at least 100 paths");
  if (stepsizes.empty()) throw DomainError("no stepsizes given");
  if (refinement < 1) throw DomainError("reference refinement must be >= 1");
  std::sort(stepsizes.begin(), stepsizes.end(), std::greater<>());
  if (std::adjacent_find(stepsizes.begin(), stepsizes.end()) != stepsizes.end()) {
    throw DomainError("stepsizes must be distinct");
  }
  for (double dt : stepsizes) steps_for(setup.t_end, dt);

  ConvergenceReport report;
  report.problem = problem.name();
  report.scheme = setup.scheme;
  report.theta = setup.theta;
  report.stepsizes = stepsizes;
  report.p = p;
  report.paths = setup.paths;
  report.reference = problem.has_exact_solution() ? ReferenceKind::kExactSolution : ReferenceKind::kFineGridSelf;
  const int ref_factor = report.reference == ReferenceKind::kExactSolution ? 1 : refinement;
  const double fine_dt = stepsizes.back() / ref_factor;
  report.reference_dt = fine_dt;
  const std::size_t fine_steps = steps_for(setup.t_end, fine_dt);

  const std::size_t levels = stepsizes.size();
  std::vector<std::size_t> factors(levels);
  std::vector<SchemeConfig> configs(levels);
  for (std::size_t l = 0; l < levels; ++l) {
    const double ratio = stepsizes[l] / fine_dt;
    factors[l] = static_cast<std::size_t>(std::llround(ratio));
    if (factors[l] == 0 || std::abs(ratio - static_cast<double>(factors[l])) > 1e-9 * ratio) {
      throw DomainError("stepsize " + std::to_string(stepsizes[l]) + " is not a multiple of the finest grid");
    }
    configs[l] = scheme_config(setup, stepsizes[l]);
    append_unique(report.guard_warnings, check_guards(problem, configs[l]));
  }
  SchemeConfig ref_config;
  ref_config.theta = 1.0;
  ref_config.dt = fine_dt;
  ref_config.solver = setup.solver;
  ref_config.guard = GuardPolicy::kOff;

  struct Partial {
    std::vector<RunningMoments> moments;
    std::vector<int> diverged;
  };
  const std::size_t blocks = detail::block_count(static_cast<std::size_t>(setup.paths));
  std::vector<Partial> partials(blocks);

  detail::for_each_block(blocks, setup.workers, [&](std::size_t b) {
    Partial& part = partials[b];
    part.moments.assign(levels, {});
    part.diverged.assign(levels, 0);
    const std::size_t first = b * detail::kPathsPerBlock;
    const std::size_t last = std::min(first + detail::kPathsPerBlock, static_cast<std::size_t>(setup.paths));
    std::vector<State> reference(fine_steps + 1);

    for (std::size_t path = first; path < last; ++path) {
      const NoiseGrid grid = generate(setup.seed, path, setup.t_end, fine_steps);
      if (report.reference == ReferenceKind::kExactSolution) {
        double w = 0.0;
        reference[0] = problem.exact_solution(setup.y0, 0.0, 0.0);
        for (std::size_t k = 0; k < fine_steps; ++k) {
          w += grid.fine_increments[k];
          reference[k + 1] = problem.exact_solution(setup.y0, static_cast<double>(k + 1) * fine_dt, w);
        }
      } else {
        try {
          reference = integrate(problem, Scheme::kStm, setup.y0, grid.fine_increments, ref_config).y_states;
        } catch (const Divergence& e) {
          throw ReferenceFailure("fine-grid reference diverged on path " + std::to_string(path) + ": " + e.what());
        } catch (const NonConvergence& e) {
          throw ReferenceFailure("fine-grid reference solver failed on path " + std::to_string(path) + ": " +
                                 e.what());
        }
      }

      for (std::size_t l = 0; l < levels; ++l) {
        const std::vector<double> coarse = coarsen(grid, factors[l]);
        double worst = 0.0;
        try {
          const Trajectory traj = integrate(problem, setup.scheme, setup.y0, coarse, configs[l]);
          for (std::size_t k = 0; k < traj.y_states.size(); ++k) {
            worst = std::max(worst, (reference[k * factors[l]] - traj.y_states[k]).norm());
          }
        } catch (const Divergence&) {
          ++part.diverged[l];
          worst = kInf;
        }
        part.moments[l].add(int_pow(worst, p));
      }
    }
  });

  std::vector<RunningMoments> total(levels);
  report.diverged_paths.assign(levels, 0);
  for (const auto& part : partials) {
    for (std::size_t l = 0; l < levels; ++l) {
      total[l].merge(part.moments[l]);
      report.diverged_paths[l] += part.diverged[l];
    }
  }

  report.errors.resize(levels);
  report.standard_errors.resize(levels);
  bool fit_ok = levels >= 2;
  for (std::size_t l = 0; l < levels; ++l) {
    if (report.diverged_paths[l] > 0) {
      report.errors[l] = kInf;
      report.standard_errors[l] = kInf;
      fit_ok = false;
      continue;
    }
    const double mean = total[l].mean;
    const double err = std::pow(mean, 1.0 / p);
    report.errors[l] = err;
    // delta method for m^(1/p)
    report.standard_errors[l] = mean > 0.0 ? err / (p * mean) * total[l].standard_error() : 0.0;
    if (!(err > 0.0) || !std::isfinite(err)) fit_ok = false;
  }

  report.fitted_order_valid = fit_ok;
  if (fit_ok) {
    std::vector<double> lx(levels);
    std::vector<double> ly(levels);
    for (std::size_t l = 0; l < levels; ++l) {
      lx[l] = std::log(report.stepsizes[l]);
      ly[l] = std::log(report.errors[l]);
    }
    report.fitted_order = least_squares(lx, ly).slope;
  } else {
    report.fitted_order = kNaN;
  }
  return report;
}

MomentBoundReport check_moment_bound(const SdeProblem& problem, const MonteCarloSetup& setup, double dt, int p) {
  validate_setup(problem, setup);
  validate_even_p(p);
  const std::size_t steps = steps_for(setup.t_end, dt);
  const SchemeConfig cfg = scheme_config(setup, dt);

  MomentBoundReport report;
  report.dt = dt;
  report.theta = setup.theta;
  report.p = p;
  report.paths = setup.paths;
  report.guard_warnings = check_guards(problem, cfg);

  struct Partial {
    RunningMoments sup;
    int diverged = 0;
  };
  const std::size_t blocks = detail::block_count(static_cast<std::size_t>(setup.paths));
  std::vector<Partial> partials(blocks);
  detail::for_each_block(blocks, setup.workers, [&](std::size_t b) {
    const std::size_t first = b * detail::kPathsPerBlock;
    const std::size_t last = std::min(first + detail::kPathsPerBlock, static_cast<std::size_t>(setup.paths));
    for (std::size_t path = first; path < last; ++path) {
      const NoiseGrid grid = generate(setup.seed, path, setup.t_end, steps);
      try {
        const Trajectory traj = integrate(problem, setup.scheme, setup.y0, grid.fine_increments, cfg);
        double sup = 0.0;
        for (const auto& y : traj.y_states) sup = std::max(sup, int_pow(y.norm(), p));
        partials[b].sup.add(sup);
      } catch (const Divergence&) {
        ++partials[b].diverged;
      }
    }
  });

  RunningMoments total;
  for (const auto& part : partials) {
    total.merge(part.sup);
    report.divergent_paths += part.diverged;
  }
  report.estimate = total.count > 0.0 ? total.mean : kNaN;
  report.standard_error = total.standard_error();
  report.finite = report.divergent_paths == 0 && std::isfinite(report.estimate);
  return report;
}

StabilityReport estimate_ms_decay(const SdeProblem& problem, const MonteCarloSetup& setup, double dt) {
  validate_setup(problem, setup);
  if (setup.paths < 1000) throw DomainError("estimate_ms_decay needs at least 1000 paths");
  const std::size_t steps = steps_for(setup.t_end, dt);
  if (steps < 20) throw DomainError("estimate_ms_decay needs at least 20 steps");
  const SchemeConfig cfg = scheme_config(setup, dt);

  StabilityReport report;
  report.problem = problem.name();
  report.dt = dt;
  report.theta = setup.theta;
  report.paths = setup.paths;
  report.guard_warnings = check_guards(problem, cfg);

  const std::size_t tail_start = steps / 2;
  const auto tail = static_cast<Eigen::Index>(steps + 1 - tail_start);

  struct Partial {
    std::vector<RunningMoments> moments;
    Matrix cross;  // sum over paths of a a^T on the tail
    int diverged = 0;
  };
  const std::size_t blocks = detail::block_count(static_cast<std::size_t>(setup.paths));
  std::vector<Partial> partials(blocks);
  detail::for_each_block(blocks, setup.workers, [&](std::size_t b) {
    Partial& part = partials[b];
    part.moments.assign(steps + 1, {});
    part.cross = Matrix::Zero(tail, tail);
    const std::size_t first = b * detail::kPathsPerBlock;
    const std::size_t last = std::min(first + detail::kPathsPerBlock, static_cast<std::size_t>(setup.paths));
    Eigen::VectorXd a(tail);
    for (std::size_t path = first; path < last; ++path) {
      const NoiseGrid grid = generate(setup.seed, path, setup.t_end, steps);
      try {
        const Trajectory traj = integrate(problem, setup.scheme, setup.y0, grid.fine_increments, cfg);
        for (std::size_t k = 0; k <= steps; ++k) {
          const double sq = traj.y_states[k].squaredNorm();
          part.moments[k].add(sq);
          if (k >= tail_start) a[static_cast<Eigen::Index>(k - tail_start)] = sq;
        }
        part.cross.noalias() += a * a.transpose();
      } catch (const Divergence&) {
        ++part.diverged;
      }
    }
  });

  std::vector<RunningMoments> total(steps + 1);
  Matrix cross = Matrix::Zero(tail, tail);
  for (const auto& part : partials) {
    for (std::size_t k = 0; k <= steps; ++k) total[k].merge(part.moments[k]);
    cross += part.cross;
    report.divergent_paths += part.diverged;
  }

  report.times.resize(steps + 1);
  report.second_moments.resize(steps + 1);
  report.standard_errors.resize(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    report.times[k] = static_cast<double>(k) * dt;
    report.second_moments[k] = total[k].mean;
    report.standard_errors[k] = total[k].standard_error();
  }
  report.fit_points = static_cast<int>(tail);

  if (const auto limits = stepsize_thresholds(problem, setup.theta);
      limits.stability_max && dt < *limits.stability_max) {
    const auto& k = problem.constants();
    try {
      report.predicted_gamma_delta = gamma_delta(setup.theta, dt, *k.gamma, k.k_linear, k.sigma);
    } catch (const Error&) {
      report.predicted_gamma_delta.reset();
    }
  }

  if (report.divergent_paths > 0) {
    report.status = DecayStatus::kDivergent;
    report.fitted_decay = -kInf;
    report.decay_standard_error = kNaN;
    return report;
  }
  std::vector<double> tx;
  std::vector<double> ty;
  for (std::size_t k = tail_start; k <= steps; ++k) {
    if (!(report.second_moments[k] > 0.0)) {
      report.status = DecayStatus::kUnderflow;
      report.fitted_decay = kInf;
      report.decay_standard_error = kNaN;
      return report;
    }
    tx.push_back(report.times[k]);
    ty.push_back(std::log(report.second_moments[k]));
  }
  report.fitted_decay = -least_squares(tx, ty).slope;

  // delta method: slope = sum_k w_k log m_k, so var = w' D^-1 Cov D^-1 w / M
  const double mt = std::accumulate(tx.begin(), tx.end(), 0.0) / static_cast<double>(tx.size());
  double sxx = 0.0;
  for (double t : tx) sxx += (t - mt) * (t - mt);
  const double m = static_cast<double>(setup.paths);
  Eigen::VectorXd u(tail);
  Eigen::VectorXd mean(tail);
  for (Eigen::Index i = 0; i < tail; ++i) {
    mean[i] = report.second_moments[tail_start + static_cast<std::size_t>(i)];
    u[i] = (tx[static_cast<std::size_t>(i)] - mt) / sxx / mean[i];
  }
  const Matrix cov = cross / m - mean * mean.transpose();
  report.decay_standard_error = std::sqrt(std::max(0.0, u.dot(cov * u) / m));
  return report;
}

double gamma_delta(double theta, double dt, double gamma, std::optional<double> k_linear, double sigma) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw DomainError("theta must lie in [0, 1]");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("dt must be positive");
  if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
  if (!(sigma >= 0.0)) throw DomainError("sigma must be >= 0");

  double x = 0.0;
  if (theta <= 0.5) {
    if (!k_linear) throw MissingConstant("gamma_delta for theta <= 1/2 needs the linear growth constant K");
    const double k = *k_linear;
    if (!(k >= 0.0)) throw DomainError("K must be >= 0");
    const double denom = (1.0 - 2.0 * theta) * k + 0.5 * sigma;
    const double limit = denom > 0.0 ? gamma / denom : kInf;
    if (dt >= limit) throw DomainError("dt is not below gamma / ((1-2theta)K + sigma/2)");
    const double shrink = 1.0 + theta * dt * std::sqrt(k);
    x = (gamma - (1.0 - 2.0 * theta) * k * dt - 0.5 * sigma * dt) * dt / (shrink * shrink);
  } else {
    const double limit = sigma > 0.0 ? 2.0 * gamma / sigma : kInf;
    if (dt >= limit) throw DomainError("dt is not below 2 gamma / sigma");
    const double a = (gamma - 0.5 * sigma * dt) * dt;
    x = (2.0 * theta - 1.0) * a / (2.0 * theta - 1.0 + a * theta * theta);
  }
  if (!(x < 1.0)) throw DomainError("decay factor leaves (0, 1); dt too large");
  return -std::log1p(-x) / dt;
}

double linear_amplification(double theta, double mu, double c, double dt) {
  const double implicit = 1.0 - theta * mu * dt;
  if (implicit == 0.0) throw SingularityError("theta*mu*dt == 1: the implicit stage is singular");
  const double explicit_part = 1.0 + (1.0 - theta) * mu * dt;
  const double c2 = c * c;
  return (explicit_part * explicit_part + c2 * dt + 0.5 * c2 * c2 * dt * dt) / (implicit * implicit);
}

double linear_critical_dt(double theta, double mu, double c) {
  const double drive = 2.0 * mu + c * c;
  const double slope = 0.5 * c * c * c * c + (1.0 - 2.0 * theta) * mu * mu;
  if (slope > 0.0) return -drive / slope;
  if (drive < 0.0) return kInf;
  // stable set is empty or unbounded above; not of the form (0, dt*)
  return kNaN;
}

LinearRegime classify_linear(double theta, double mu, double c) {
  if (theta > 0.5 && mu * mu >= c * c * c * c / (2.0 * (2.0 * theta - 1.0))) return LinearRegime::kUnconditional;
  return LinearRegime::kConditional;
}

std::vector<RegionRow> linear_region_scan(const std::vector<double>& thetas, const std::vector<double>& dts,
                                          const std::vector<double>& mus, const std::vector<double>& cs) {
  std::vector<RegionRow> rows;
  rows.reserve(thetas.size() * dts.size() * mus.size() * cs.size());
  for (double theta : thetas) {
    for (double dt : dts) {
      for (double mu : mus) {
        for (double c : cs) {
          RegionRow row;
          row.theta = theta;
          row.dt = dt;
          row.mu = mu;
          row.c = c;
          row.sde_stable = 2.0 * mu + c * c < 0.0;
          try {
            row.amplification = linear_amplification(theta, mu, c, dt);
          } catch (const SingularityError&) {
            row.amplification = kNaN;
          }
          row.scheme_stable = row.amplification < 1.0;
          row.regime = classify_linear(theta, mu, c);
          row.critical_dt = linear_critical_dt(theta, mu, c);
          rows.push_back(row);
        }
      }
    }
  }
  return rows;
}

}  // namespace theta_milstein
