// Copyright 2026 The theta-milstein Authors
// SPDX-License-Identifier: Apache-2.0

#include "theta_milstein/theta_milstein.h"

#include <cstring>
#include <fstream>
#include <map>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "format.hpp"
#include "theta_milstein/analysis.hpp"
#include "theta_milstein/errors.hpp"
#include "theta_milstein/noise.hpp"
#include "theta_milstein/report_io.hpp"
#include "theta_milstein/schemes.hpp"
#include "theta_milstein/sde_core.hpp"

namespace tmil = theta_milstein;

struct tm_problem {
  tmil::SdeProblem problem;
};

struct tm_trajectory {
  tmil::Trajectory trajectory;
};

struct tm_report {
  std::string kind;
  std::map<std::string, double> scalars;
  std::map<std::string, std::vector<double>> columns;
  std::string json;
  std::string csv;
};

namespace {

thread_local std::string g_last_error;
thread_local std::size_t g_divergence_step = 0;

struct NullArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

tm_status map_code(tmil::Error::Code code) {
  switch (code) {
    case tmil::Error::Code::kContractViolation:
      return TM_ERR_CONTRACT;
    case tmil::Error::Code::kDomain:
      return TM_ERR_DOMAIN;
    case tmil::Error::Code::kNonConvergence:
      return TM_ERR_NONCONVERGENCE;
    case tmil::Error::Code::kDivergence:
      return TM_ERR_DIVERGENCE;
    case tmil::Error::Code::kGuardViolation:
      return TM_ERR_GUARD;
    case tmil::Error::Code::kReferenceFailure:
      return TM_ERR_REFERENCE;
    case tmil::Error::Code::kMissingConstant:
      return TM_ERR_MISSING_CONSTANT;
    case tmil::Error::Code::kSingularity:
      return TM_ERR_SINGULAR;
    case tmil::Error::Code::kIo:
      return TM_ERR_IO;
  }
  return TM_ERR_INTERNAL;
}

template <class Fn>
tm_status guarded(Fn&& fn) {
  try {
    fn();
    return TM_OK;
  } catch (const tmil::Divergence& e) {
    g_last_error = e.what();
    g_divergence_step = e.step();
    return TM_ERR_DIVERGENCE;
  } catch (const tmil::Error& e) {
    g_last_error = e.what();
    return map_code(e.code());
  } catch (const NullArgument& e) {
    g_last_error = e.what();
    return TM_ERR_NULL_ARGUMENT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return TM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return TM_ERR_INTERNAL;
  }
}

template <class T>
T* need(T* p, const char* what) {
  if (!p) throw NullArgument(std::string(what) + " must not be NULL");
  return p;
}

tmil::State to_state(const double* x, std::size_t n) {
  need(x, "state");
  return Eigen::Map<const tmil::State>(x, static_cast<Eigen::Index>(n));
}

void copy_state(const tmil::State& x, double* out) {
  need(out, "output");
  std::copy(x.data(), x.data() + x.size(), out);
}

tmil::ImplicitSolverConfig solver_of(double rel_tol, double abs_tol, int max_iters, tm_solver_method method) {
  tmil::ImplicitSolverConfig s;
  s.rel_tol = rel_tol;
  s.abs_tol = abs_tol;
  s.max_iters = max_iters;
  s.method = method == TM_SOLVER_FIXED_POINT ? tmil::SolverMethod::kFixedPointOnly
                                             : tmil::SolverMethod::kNewtonWithFixedPointFallback;
  return s;
}

tmil::GuardPolicy guard_of(tm_guard_policy g) {
  switch (g) {
    case TM_GUARD_STRICT:
      return tmil::GuardPolicy::kStrict;
    case TM_GUARD_OFF:
      return tmil::GuardPolicy::kOff;
    case TM_GUARD_WARN:
      break;
  }
  return tmil::GuardPolicy::kWarn;
}

tmil::SchemeConfig config_of(const tm_scheme_config* c) {
  need(c, "config");
  tmil::SchemeConfig cfg;
  cfg.theta = c->theta;
  cfg.dt = c->dt;
  cfg.solver = solver_of(c->rel_tol, c->abs_tol, c->max_iters, c->method);
  cfg.guard = guard_of(c->guard);
  cfg.validate();
  return cfg;
}

tmil::MonteCarloSetup setup_of(const tmil::SdeProblem& problem, const tm_mc_setup* s) {
  need(s, "setup");
  tmil::MonteCarloSetup setup;
  setup.scheme = s->scheme == TM_SCHEME_SSTM ? tmil::Scheme::kSstm : tmil::Scheme::kStm;
  setup.theta = s->theta;
  setup.y0 = to_state(s->y0, static_cast<std::size_t>(problem.dim()));
  setup.t_end = s->t_end;
  setup.paths = s->paths;
  setup.seed = s->seed;
  setup.workers = s->workers;
  setup.solver = solver_of(s->rel_tol, s->abs_tol, s->max_iters, s->method);
  setup.guard = guard_of(s->guard);
  return setup;
}

std::vector<double> as_doubles(const std::vector<int>& v) { return {v.begin(), v.end()}; }

std::string csv_of(auto const& report) {
  std::ostringstream out;
  tmil::write_csv(report, out);
  return out.str();
}

tm_report* make_report(const tmil::ConvergenceReport& r) {
  auto* out = new tm_report;
  out->kind = "convergence";
  out->scalars = {{"fitted_order", r.fitted_order},
                  {"fitted_order_valid", r.fitted_order_valid ? 1.0 : 0.0},
                  {"theta", r.theta},
                  {"p", r.p},
                  {"paths", r.paths},
                  {"reference_is_exact", r.reference == tmil::ReferenceKind::kExactSolution ? 1.0 : 0.0},
                  {"reference_dt", r.reference_dt}};
  out->columns = {{"stepsizes", r.stepsizes},
                  {"errors", r.errors},
                  {"standard_errors", r.standard_errors},
                  {"diverged_paths", as_doubles(r.diverged_paths)}};
  out->json = tmil::to_json(r);
  out->csv = csv_of(r);
  return out;
}

tm_report* make_report(const tmil::StabilityReport& r) {
  auto* out = new tm_report;
  out->kind = "stability";
  out->scalars = {{"fitted_decay", r.fitted_decay},
                  {"decay_standard_error", r.decay_standard_error},
                  {"has_predicted_gamma_delta", r.predicted_gamma_delta ? 1.0 : 0.0},
                  {"predicted_gamma_delta", r.predicted_gamma_delta.value_or(std::nan(""))},
                  {"status", static_cast<double>(r.status)},
                  {"divergent_paths", r.divergent_paths},
                  {"fit_points", r.fit_points},
                  {"dt", r.dt},
                  {"theta", r.theta},
                  {"paths", r.paths}};
  out->columns = {{"times", r.times}, {"second_moments", r.second_moments}, {"standard_errors", r.standard_errors}};
  out->json = tmil::to_json(r);
  out->csv = csv_of(r);
  return out;
}

tm_report* make_report(const tmil::MomentBoundReport& r) {
  auto* out = new tm_report;
  out->kind = "moment_bound";
  out->scalars = {{"estimate", r.estimate},
                  {"standard_error", r.standard_error},
                  {"divergent_paths", r.divergent_paths},
                  {"divergent_fraction", r.divergent_fraction()},
                  {"finite", r.finite ? 1.0 : 0.0},
                  {"paths", r.paths},
                  {"p", r.p},
                  {"dt", r.dt},
                  {"theta", r.theta}};
  out->json = tmil::to_json(r);
  std::ostringstream csv;
  csv << "dt,p,paths,estimate,stderr,divergent_paths\n"
      << tmil::detail::format_double(r.dt) << ',' << r.p << ',' << r.paths << ','
      << tmil::detail::format_double(r.estimate) << ',' << tmil::detail::format_double(r.standard_error) << ','
      << r.divergent_paths << '\n';
  out->csv = csv.str();
  return out;
}

tm_report* make_report(const std::vector<tmil::RegionRow>& rows) {
  auto* out = new tm_report;
  out->kind = "linear_region";
  out->scalars = {{"rows", static_cast<double>(rows.size())}};
  auto& cols = out->columns;
  for (const auto& row : rows) {
    cols["theta"].push_back(row.theta);
    cols["dt"].push_back(row.dt);
    cols["mu"].push_back(row.mu);
    cols["c"].push_back(row.c);
    cols["R"].push_back(row.amplification);
    cols["sde_stable"].push_back(row.sde_stable ? 1.0 : 0.0);
    cols["scheme_stable"].push_back(row.scheme_stable ? 1.0 : 0.0);
    cols["unconditional"].push_back(row.regime == tmil::LinearRegime::kUnconditional ? 1.0 : 0.0);
    cols["critical_dt"].push_back(row.critical_dt);
  }
  out->json = tmil::to_json(rows);
  out->csv = csv_of(rows);
  return out;
}

std::string render(const tm_report& r, tm_format format, const char* schema_tag) {
  if (format == TM_FORMAT_JSON) return r.json;
  std::string text;
  if (schema_tag) text = tmil::csv_schema_line(schema_tag) + "\n";
  return text + r.csv;
}

void write_file(const char* path, const std::string& text) {
  std::ofstream out(need(path, "path"), std::ios::binary | std::ios::trunc);
  if (!out) throw tmil::IoError(std::string("cannot open ") + path + " for writing");
  out << text;
  if (!out) throw tmil::IoError(std::string("write failed for ") + path);
}

}  // namespace

extern "C" {

const char* tm_version(void) { return "1.0.0"; }

const char* tm_status_name(tm_status status) {
  switch (status) {
    case TM_OK:
      return "ok";
    case TM_ERR_CONTRACT:
      return "contract_violation";
    case TM_ERR_DOMAIN:
      return "domain_error";
    case TM_ERR_NONCONVERGENCE:
      return "non_convergence";
    case TM_ERR_DIVERGENCE:
      return "divergence";
    case TM_ERR_GUARD:
      return "guard_violation";
    case TM_ERR_REFERENCE:
      return "reference_failure";
    case TM_ERR_MISSING_CONSTANT:
      return "missing_constant";
    case TM_ERR_SINGULAR:
      return "singularity";
    case TM_ERR_IO:
      return "io_error";
    case TM_ERR_NULL_ARGUMENT:
      return "null_argument";
    case TM_ERR_INTERNAL:
      return "internal_error";
  }
  return "unknown";
}

const char* tm_last_error(void) { return g_last_error.c_str(); }

size_t tm_last_divergence_step(void) { return g_divergence_step; }

tm_status tm_problem_builtin(const char* name, const char* const* keys, const double* values, size_t count,
                             tm_problem** out) {
  return guarded([&] {
    need(name, "name");
    need(out, "out");
    tmil::ParamMap params;
    for (size_t i = 0; i < count; ++i) {
      const std::string key = need(need(keys, "keys")[i], "key");
      if (!params.emplace(key, need(values, "values")[i]).second) {
        throw tmil::DomainError("parameter '" + key + "' given twice");
      }
    }
    *out = new tm_problem{tmil::builtin_problem(name, params)};
  });
}

tm_status tm_problem_custom(const char* name, const tm_problem_callbacks* callbacks,
                            const tm_problem_constants* constants, tm_problem** out) {
  return guarded([&] {
    need(out, "out");
    need(constants, "constants");
    const tm_problem_callbacks cb = *need(callbacks, "callbacks");
    if (cb.dim < 1 || !cb.drift || !cb.diffusion || !cb.diffusion_jacobian) {
      throw tmil::ContractViolation("custom problem needs dim >= 1, drift, diffusion and diffusion_jacobian");
    }
    const auto n = static_cast<Eigen::Index>(cb.dim);
    auto vector_field = [n, user = cb.user](tm_vector_fn fn) {
      return [n, user, fn](const tmil::State& x) {
        tmil::State out(n);
        fn(x.data(), out.data(), static_cast<size_t>(n), user);
        return out;
      };
    };
    auto matrix_field = [n, user = cb.user](tm_matrix_fn fn) {
      return [n, user, fn](const tmil::State& x) {
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(n, n);
        fn(x.data(), out.data(), static_cast<size_t>(n), user);
        return tmil::Matrix(out);
      };
    };

    tmil::SdeProblem::Definition def;
    def.name = name ? name : "custom";
    def.dim = static_cast<int>(cb.dim);
    def.drift = vector_field(cb.drift);
    def.diffusion = vector_field(cb.diffusion);
    def.diffusion_jacobian = matrix_field(cb.diffusion_jacobian);
    if (cb.drift_jacobian) def.drift_jacobian = matrix_field(cb.drift_jacobian);
    def.constants.mu = constants->mu;
    def.constants.c = constants->c;
    def.constants.sigma = constants->sigma;
    if (constants->has_k_linear) def.constants.k_linear = constants->k_linear;
    if (constants->has_gamma) def.constants.gamma = constants->gamma;
    *out = new tm_problem{tmil::SdeProblem(std::move(def))};
  });
}

void tm_problem_free(tm_problem* problem) { delete problem; }

size_t tm_problem_dim(const tm_problem* problem) {
  return problem ? static_cast<size_t>(problem->problem.dim()) : 0;
}

int tm_problem_has_exact_solution(const tm_problem* problem) {
  return problem && problem->problem.has_exact_solution() ? 1 : 0;
}

tm_status tm_problem_get_constants(const tm_problem* problem, tm_problem_constants* out) {
  return guarded([&] {
    const auto& k = need(problem, "problem")->problem.constants();
    *need(out, "out") = tm_problem_constants{k.mu,
                                             k.c,
                                             k.sigma,
                                             k.k_linear ? 1 : 0,
                                             k.k_linear.value_or(0.0),
                                             k.gamma ? 1 : 0,
                                             k.gamma.value_or(0.0)};
  });
}

tm_status tm_l1g(const tm_problem* problem, const double* x, double* out) {
  return guarded([&] {
    const auto& p = need(problem, "problem")->problem;
    copy_state(tmil::l1g(p, to_state(x, static_cast<size_t>(p.dim()))), out);
  });
}

tm_status tm_monotone_constants(const tm_problem* problem, double* alpha, double* beta) {
  return guarded([&] {
    const auto k = tmil::monotone_constants(need(problem, "problem")->problem);
    *need(alpha, "alpha") = k.alpha;
    *need(beta, "beta") = k.beta;
  });
}

tm_status tm_stepsize_thresholds(const tm_problem* problem, double theta, tm_thresholds* out) {
  return guarded([&] {
    const auto t = tmil::stepsize_thresholds(need(problem, "problem")->problem, theta);
    *need(out, "out") = tm_thresholds{t.wellposed_max, t.moment_bound_max, t.stability_max ? 1 : 0,
                                      t.stability_max.value_or(0.0)};
  });
}

tm_status tm_noise_generate(uint64_t seed, uint64_t path_index, double t_end, size_t fine_steps, double* out) {
  return guarded([&] {
    need(out, "out");
    const auto grid = tmil::generate(seed, path_index, t_end, fine_steps);
    std::copy(grid.fine_increments.begin(), grid.fine_increments.end(), out);
  });
}

tm_status tm_noise_coarsen(const double* fine, size_t count, size_t factor, double* out) {
  return guarded([&] {
    const auto coarse = tmil::coarsen(std::span<const double>(need(fine, "fine"), count), factor);
    std::copy(coarse.begin(), coarse.end(), need(out, "out"));
  });
}

tm_status tm_noise_moment_check(uint64_t seed, uint64_t path_index, double t_end, size_t fine_steps,
                                tm_moment_report* out) {
  return guarded([&] {
    need(out, "out");
    const auto r = tmil::moment_check(tmil::generate(seed, path_index, t_end, fine_steps));
    auto conv = [](const tmil::MomentEstimate& m) {
      return tm_moment_estimate{m.estimate, m.standard_error, m.target};
    };
    *out = tm_moment_report{r.dt, r.count, conv(r.second), conv(r.fourth), conv(r.centered_square), conv(r.sixth)};
  });
}

tm_status tm_noise_save(const char* path, uint64_t seed, uint64_t path_index, double t_end, size_t fine_steps) {
  return guarded([&] { tmil::save_noise(tmil::generate(seed, path_index, t_end, fine_steps), need(path, "path")); });
}

tm_status tm_noise_load(const char* path, double* out, size_t capacity, size_t* count, uint64_t* seed,
                        uint64_t* path_index, double* t_end) {
  return guarded([&] {
    const auto grid = tmil::load_noise(need(path, "path"));
    *need(count, "count") = grid.fine_steps;
    if (seed) *seed = grid.seed;
    if (path_index) *path_index = grid.path_index;
    if (t_end) *t_end = grid.t_end;
    if (out && capacity >= grid.fine_steps) {
      std::copy(grid.fine_increments.begin(), grid.fine_increments.end(), out);
    }
  });
}

void tm_scheme_config_init(tm_scheme_config* config) {
  if (!config) return;
  const tmil::SchemeConfig d;
  *config = tm_scheme_config{d.theta, d.dt, d.solver.rel_tol, d.solver.abs_tol, d.solver.max_iters,
                             TM_SOLVER_NEWTON_FALLBACK, TM_GUARD_WARN};
}

tm_status tm_implicit_solve(const tm_problem* problem, const double* z, const tm_scheme_config* config, double* y,
                            int* iterations) {
  return guarded([&] {
    const auto& p = need(problem, "problem")->problem;
    const auto cfg = config_of(config);
    tmil::SolveStats stats;
    copy_state(tmil::implicit_solve(p, to_state(z, static_cast<size_t>(p.dim())), cfg.theta, cfg.dt, cfg.solver,
                                  &stats),
               y);
    if (iterations) *iterations = stats.iterations;
  });
}

tm_status tm_sstm_step(const tm_problem* problem, const double* z, double dw, const tm_scheme_config* config,
                       double* z_next, double* y) {
  return guarded([&] {
    const auto& p = need(problem, "problem")->problem;
    const auto cfg = config_of(config);
    const auto step = tmil::sstm_step(p, to_state(z, static_cast<size_t>(p.dim())), dw, cfg.theta, cfg.dt, cfg.solver);
    copy_state(step.z_next, z_next);
    copy_state(step.y, y);
  });
}

tm_status tm_stm_step(const tm_problem* problem, const double* y, double dw, const tm_scheme_config* config,
                      double* y_next) {
  return guarded([&] {
    const auto& p = need(problem, "problem")->problem;
    const auto cfg = config_of(config);
    copy_state(tmil::stm_step(p, to_state(y, static_cast<size_t>(p.dim())), dw, cfg.theta, cfg.dt, cfg.solver), y_next);
  });
}

tm_status tm_integrate(const tm_problem* problem, tm_scheme scheme, const double* y0, const double* noise,
                       size_t steps, const tm_scheme_config* config, tm_trajectory** out) {
  return guarded([&] {
    need(out, "out");
    const auto& p = need(problem, "problem")->problem;
    if (steps > 0) need(noise, "noise");
    auto traj = tmil::integrate(p, scheme == TM_SCHEME_SSTM ? tmil::Scheme::kSstm : tmil::Scheme::kStm,
                              to_state(y0, static_cast<size_t>(p.dim())), std::span<const double>(noise, steps),
                              config_of(config));
    *out = new tm_trajectory{std::move(traj)};
  });
}

void tm_trajectory_free(tm_trajectory* trajectory) { delete trajectory; }

size_t tm_trajectory_points(const tm_trajectory* t) { return t ? t->trajectory.times.size() : 0; }

size_t tm_trajectory_dim(const tm_trajectory* t) {
  return t && !t->trajectory.y_states.empty() ? static_cast<size_t>(t->trajectory.y_states.front().size()) : 0;
}

const double* tm_trajectory_times(const tm_trajectory* t) { return t ? t->trajectory.times.data() : nullptr; }

tm_status tm_trajectory_y(const tm_trajectory* t, size_t k, double* out) {
  return guarded([&] {
    const auto& ys = need(t, "trajectory")->trajectory.y_states;
    if (k >= ys.size()) throw tmil::ContractViolation("trajectory index out of range");
    copy_state(ys[k], out);
  });
}

int tm_trajectory_has_z(const tm_trajectory* t) { return t && t->trajectory.z_states ? 1 : 0; }

tm_status tm_trajectory_z(const tm_trajectory* t, size_t k, double* out) {
  return guarded([&] {
    const auto& zs = need(t, "trajectory")->trajectory.z_states;
    if (!zs) throw tmil::ContractViolation("trajectory has no z states (not an SSTM run)");
    if (k >= zs->size()) throw tmil::ContractViolation("trajectory index out of range");
    copy_state((*zs)[k], out);
  });
}

int tm_trajectory_max_solver_iters(const tm_trajectory* t) { return t ? t->trajectory.flags.max_solver_iters : 0; }

size_t tm_trajectory_warning_count(const tm_trajectory* t) {
  return t ? t->trajectory.flags.guard_warnings.size() : 0;
}

const char* tm_trajectory_warning(const tm_trajectory* t, size_t index) {
  if (!t || index >= t->trajectory.flags.guard_warnings.size()) return nullptr;
  return t->trajectory.flags.guard_warnings[index].c_str();
}

tm_status tm_trajectory_write(const tm_trajectory* t, const char* path, tm_format format) {
  return guarded([&] {
    const auto& traj = need(t, "trajectory")->trajectory;
    if (format == TM_FORMAT_JSON) {
      write_file(path, tmil::to_json(traj));
    } else {
      std::ostringstream out;
      tmil::write_trajectory_csv(traj, out);
      write_file(path, out.str());
    }
  });
}

void tm_mc_setup_init(tm_mc_setup* setup) {
  if (!setup) return;
  const tmil::MonteCarloSetup d;
  *setup = tm_mc_setup{TM_SCHEME_STM,     d.theta,        nullptr,
                       d.t_end,           d.paths,        d.seed,
                       d.workers,         d.solver.rel_tol, d.solver.abs_tol,
                       d.solver.max_iters, TM_SOLVER_NEWTON_FALLBACK, TM_GUARD_WARN};
}

tm_status tm_estimate_strong_order(const tm_problem* problem, const tm_mc_setup* setup, const double* stepsizes,
                                   size_t count, int p, int refinement, tm_report** out) {
  return guarded([&] {
    need(out, "out");
    const auto& prob = need(problem, "problem")->problem;
    std::vector<double> dts(need(stepsizes, "stepsizes"), stepsizes + count);
    *out = make_report(tmil::estimate_strong_order(prob, setup_of(prob, setup), std::move(dts), p, refinement));
  });
}

tm_status tm_check_moment_bound(const tm_problem* problem, const tm_mc_setup* setup, double dt, int p,
                                tm_report** out) {
  return guarded([&] {
    need(out, "out");
    const auto& prob = need(problem, "problem")->problem;
    *out = make_report(tmil::check_moment_bound(prob, setup_of(prob, setup), dt, p));
  });
}

tm_status tm_estimate_ms_decay(const tm_problem* problem, const tm_mc_setup* setup, double dt, tm_report** out) {
  return guarded([&] {
    need(out, "out");
    const auto& prob = need(problem, "problem")->problem;
    *out = make_report(tmil::estimate_ms_decay(prob, setup_of(prob, setup), dt));
  });
}

tm_status tm_linear_region_scan(const double* thetas, size_t n_thetas, const double* dts, size_t n_dts,
                                const double* mus, size_t n_mus, const double* cs, size_t n_cs, tm_report** out) {
  return guarded([&] {
    need(out, "out");
    auto vec = [](const double* p, size_t n, const char* what) {
      if (n == 0) throw tmil::DomainError(std::string(what) + " grid is empty");
      return std::vector<double>(need(p, what), p + n);
    };
    *out = make_report(tmil::linear_region_scan(vec(thetas, n_thetas, "theta"), vec(dts, n_dts, "dt"),
                                              vec(mus, n_mus, "mu"), vec(cs, n_cs, "c")));
  });
}

tm_status tm_gamma_delta(double theta, double dt, double gamma, int has_k_linear, double k_linear, double sigma,
                         double* out) {
  return guarded([&] {
    *need(out, "out") = tmil::gamma_delta(theta, dt, gamma,
                                        has_k_linear ? std::optional<double>(k_linear) : std::nullopt, sigma);
  });
}

tm_status tm_linear_amplification(double theta, double mu, double c, double dt, double* out) {
  return guarded([&] { *need(out, "out") = tmil::linear_amplification(theta, mu, c, dt); });
}

tm_status tm_linear_critical_dt(double theta, double mu, double c, double* out) {
  return guarded([&] { *need(out, "out") = tmil::linear_critical_dt(theta, mu, c); });
}

void tm_report_free(tm_report* report) { delete report; }

const char* tm_report_kind(const tm_report* report) { return report ? report->kind.c_str() : nullptr; }

tm_status tm_report_scalar(const tm_report* report, const char* key, double* out) {
  return guarded([&] {
    const auto& scalars = need(report, "report")->scalars;
    const auto it = scalars.find(need(key, "key"));
    if (it == scalars.end()) throw tmil::ContractViolation(std::string("report has no scalar '") + key + "'");
    *need(out, "out") = it->second;
  });
}

tm_status tm_report_column(const tm_report* report, const char* key, double* out, size_t capacity,
                           size_t* length) {
  return guarded([&] {
    const auto& columns = need(report, "report")->columns;
    const auto it = columns.find(need(key, "key"));
    if (it == columns.end()) throw tmil::ContractViolation(std::string("report has no column '") + key + "'");
    *need(length, "length") = it->second.size();
    if (out) {
      if (capacity < it->second.size()) throw tmil::ContractViolation("column buffer too small");
      std::copy(it->second.begin(), it->second.end(), out);
    }
  });
}

tm_status tm_report_render(const tm_report* report, tm_format format, const char* schema_tag, char* buffer,
                           size_t capacity, size_t* needed) {
  return guarded([&] {
    const std::string text = render(*need(report, "report"), format, schema_tag);
    *need(needed, "needed") = text.size();
    if (buffer && capacity > 0) {
      const size_t n = std::min(capacity - 1, text.size());
      std::memcpy(buffer, text.data(), n);
      buffer[n] = '\0';
    }
  });
}

tm_status tm_report_write(const tm_report* report, const char* path, tm_format format, const char* schema_tag) {
  return guarded([&] { write_file(path, render(*need(report, "report"), format, schema_tag)); });
}

}  // extern "C"
