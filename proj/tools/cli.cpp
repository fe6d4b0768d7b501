// Copyright 2026 The theta-milstein Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "config.hpp"
#include "theta_milstein/theta_milstein.h"

namespace theta_milstein::cli {
namespace {

constexpr const char* kSeedEnv = "THETA_MILSTEIN_SEED";

// Error raised while running a subcommand, with the exit status it maps to.
class Failure : public std::runtime_error {
 public:
  Failure(int code, std::string kind, const std::string& what)
      : std::runtime_error(what), code_(code), kind_(std::move(kind)) {}
  int code() const { return code_; }
  const std::string& kind() const { return kind_; }

 private:
  int code_;
  std::string kind_;
};

int exit_code_for(tm_status status) {
  switch (status) {
    case TM_OK:
      return kExitOk;
    case TM_ERR_CONTRACT:
    case TM_ERR_DOMAIN:
    case TM_ERR_MISSING_CONSTANT:
    case TM_ERR_SINGULAR:
    case TM_ERR_NULL_ARGUMENT:
      return kExitConfig;
    case TM_ERR_NONCONVERGENCE:
    case TM_ERR_DIVERGENCE:
    case TM_ERR_GUARD:
    case TM_ERR_REFERENCE:
      return kExitRuntime;
    case TM_ERR_IO:
      return kExitIo;
    case TM_ERR_INTERNAL:
      break;
  }
  return kExitInternal;
}

void check(tm_status status, const std::string& context = {}) {
  if (status == TM_OK) return;
  std::string what = tm_last_error();
  if (!context.empty()) what = context + ": " + what;
  throw Failure(exit_code_for(status), tm_status_name(status), what);
}

struct ProblemDeleter {
  void operator()(tm_problem* p) const { tm_problem_free(p); }
};
struct TrajectoryDeleter {
  void operator()(tm_trajectory* t) const { tm_trajectory_free(t); }
};
struct ReportDeleter {
  void operator()(tm_report* r) const { tm_report_free(r); }
};
using ProblemPtr = std::unique_ptr<tm_problem, ProblemDeleter>;
using TrajectoryPtr = std::unique_ptr<tm_trajectory, TrajectoryDeleter>;
using ReportPtr = std::unique_ptr<tm_report, ReportDeleter>;

// ---- options --------------------------------------------------------------

struct Options {
  std::string command;
  std::string config_path;
  bool dump_config = false;

  // common
  std::string output;
  std::string format = "csv";
  std::string guard = "warn";
  int workers = 1;

  // problem
  std::string problem = "linear";
  std::optional<double> mu, c, eta, lambda, s, a;
  int dim = 1;

  // scheme and Monte Carlo
  std::string scheme = "stm";
  double theta = 1.0;
  std::string y0 = "1";
  std::optional<double> t_end;
  std::uint64_t seed = 1;
  double rel_tol = 1e-12;
  double abs_tol = 1e-14;
  int max_iters = 50;
  std::string solver = "newton";
  std::optional<double> dt;
  std::optional<int> paths;

  // convergence
  std::string stepsizes = "2^-4..2^-9";
  int p = 2;
  int refinement = 4;

  // linear-region
  std::string theta_grid = "1";
  std::string mu_grid = "-4";
  std::string c_grid = "1";
  std::string dt_grid = "0.01:0.01:1";
};

const std::vector<std::string> kCommands{"simulate", "convergence", "stability", "linear-region", "selfcheck"};

bool uses_problem(const std::string& cmd) {
  return cmd == "simulate" || cmd == "convergence" || cmd == "stability";
}

bool uses_seed(const std::string& cmd) { return cmd != "linear-region"; }

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("-o,--output", o.output, "output file (default <subcommand>.<format>)");
  sub->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  sub->add_option("--guard", o.guard, "stepsize guard policy: strict, warn or off")
      ->check(CLI::IsMember({"strict", "warn", "off"}));
  sub->add_option("--workers", o.workers, "worker threads for path batches")->check(CLI::Range(1, 1024));
  sub->add_option("--config", o.config_path, "INI file with a section per subcommand; flags win");
  sub->add_flag("--dump-config", o.dump_config, "print the resolved configuration as INI and exit");
}

void add_problem(CLI::App* sub, Options& o) {
  sub->add_option("--problem", o.problem, "linear, ginzburg_landau or cubic_additive")
      ->check(CLI::IsMember({"linear", "ginzburg_landau", "cubic_additive"}));
  sub->add_option("--mu", o.mu, "linear: drift coefficient");
  sub->add_option("--c", o.c, "linear: diffusion coefficient");
  sub->add_option("--eta", o.eta, "ginzburg_landau: linear drift coefficient");
  sub->add_option("--lambda", o.lambda, "ginzburg_landau: cubic coefficient (> 0)");
  sub->add_option("--s", o.s, "ginzburg_landau, cubic_additive: noise intensity");
  sub->add_option("--a", o.a, "cubic_additive: linear drift coefficient");
  sub->add_option("--dim", o.dim, "state dimension (componentwise copies)")->check(CLI::Range(1, 1 << 20));
}

void add_run(CLI::App* sub, Options& o) {
  sub->add_option("--scheme", o.scheme, "sstm or stm")->check(CLI::IsMember({"sstm", "stm"}));
  sub->add_option("--theta", o.theta, "implicitness in [0, 1]")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--y0", o.y0, "initial state: one value or a comma list of dim values");
  sub->add_option("--t-end", o.t_end, "time horizon");
  sub->add_option("--rel-tol", o.rel_tol, "implicit solver relative tolerance");
  sub->add_option("--abs-tol", o.abs_tol, "implicit solver absolute tolerance");
  sub->add_option("--max-iters", o.max_iters, "implicit solver iteration cap");
  sub->add_option("--solver", o.solver, "newton or fixed-point")->check(CLI::IsMember({"newton", "fixed-point"}));
}

// ---- problem parameters ---------------------------------------------------

struct ParamSpec {
  std::string key;
  std::optional<double> Options::*field;
  double fallback;
};

const std::map<std::string, std::vector<ParamSpec>>& problem_params() {
  static const std::map<std::string, std::vector<ParamSpec>> table{
      {"linear", {{"mu", &Options::mu, -2.0}, {"c", &Options::c, 1.0}}},
      {"ginzburg_landau", {{"eta", &Options::eta, 0.5}, {"lambda", &Options::lambda, 1.0}, {"s", &Options::s, 0.5}}},
      {"cubic_additive", {{"a", &Options::a, 1.0}, {"s", &Options::s, 0.5}}},
  };
  return table;
}

// Fills defaults for the chosen problem and rejects parameters of other problems.
void resolve_problem(Options& o) {
  const auto& specs = problem_params().at(o.problem);
  const std::vector<std::pair<std::string, std::optional<double> Options::*>> all{
      {"mu", &Options::mu}, {"c", &Options::c},   {"eta", &Options::eta},
      {"lambda", &Options::lambda}, {"s", &Options::s}, {"a", &Options::a}};
  for (const auto& [key, field] : all) {
    const bool relevant = std::any_of(specs.begin(), specs.end(), [&](const ParamSpec& p) { return p.key == key; });
    if (!relevant && (o.*field)) throw ConfigError("--" + key + " does not apply to problem " + o.problem);
  }
  for (const auto& spec : specs) {
    if (!(o.*spec.field)) o.*spec.field = spec.fallback;
  }
}

ProblemPtr make_problem(const Options& o) {
  std::vector<std::string> keys;
  std::vector<double> values;
  for (const auto& spec : problem_params().at(o.problem)) {
    keys.push_back(spec.key);
    values.push_back(*(o.*spec.field));
  }
  keys.emplace_back("dim");
  values.push_back(o.dim);
  std::vector<const char*> key_ptrs;
  for (const auto& k : keys) key_ptrs.push_back(k.c_str());
  tm_problem* p = nullptr;
  check(tm_problem_builtin(o.problem.c_str(), key_ptrs.data(), values.data(), keys.size(), &p), "problem");
  return ProblemPtr(p);
}

std::vector<double> parse_y0(const Options& o) {
  std::vector<double> y0 = parse_grid(o.y0);
  if (y0.size() == 1) y0.assign(static_cast<std::size_t>(o.dim), y0.front());
  if (y0.size() != static_cast<std::size_t>(o.dim)) {
    throw ConfigError("--y0 has " + std::to_string(y0.size()) + " values but dim is " + std::to_string(o.dim));
  }
  for (double v : y0) {
    if (!std::isfinite(v)) throw ConfigError("--y0 must be finite");
  }
  return y0;
}

// Validates everything that does not need the library, and fills defaults.
void resolve(Options& o) {
  const std::string ext = o.format == "json" ? "json" : "csv";
  if (o.output.empty()) o.output = o.command + "." + ext;

  if (uses_problem(o.command)) {
    resolve_problem(o);
    if (!o.t_end) o.t_end = o.command == "stability" ? 5.0 : 1.0;
    if (!(*o.t_end > 0.0) || !std::isfinite(*o.t_end)) throw ConfigError("--t-end must be positive and finite");
    if (!(o.rel_tol > 0.0) || !(o.abs_tol > 0.0)) throw ConfigError("solver tolerances must be positive");
    if (o.max_iters < 1) throw ConfigError("--max-iters must be >= 1");
    parse_y0(o);
  }
  if (o.command == "simulate") {
    if (!o.dt) o.dt = 0.01;
    if (!o.paths) o.paths = 1;
  } else if (o.command == "stability") {
    if (!o.dt) o.dt = 0.1;
    if (!o.paths) o.paths = 1000;
  } else if (o.command == "convergence") {
    if (!o.paths) o.paths = 1000;
    if (o.p < 2 || o.p % 2 != 0) throw ConfigError("--p must be an even integer >= 2");
    if (o.refinement < 1) throw ConfigError("--refinement must be >= 1");
    const auto dts = parse_stepsizes(o.stepsizes);
    if (dts.empty()) throw ConfigError("--stepsizes is empty");
    for (double dt : dts) {
      const double steps = *o.t_end / dt;
      if (!(dt > 0.0) || std::abs(steps - std::round(steps)) > 1e-9 * steps) {
        throw ConfigError("stepsize " + format_number(dt) + " does not divide t-end " + format_number(*o.t_end));
      }
    }
  } else if (o.command == "selfcheck") {
    if (!o.paths) o.paths = 100;
  } else if (o.command == "linear-region") {
    for (const auto* grid : {&o.theta_grid, &o.mu_grid, &o.c_grid, &o.dt_grid}) {
      if (parse_grid(*grid).empty()) throw ConfigError("linear-region grids must be non-empty");
    }
    for (double t : parse_grid(o.theta_grid)) {
      if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("--theta values must lie in [0, 1]");
    }
    for (double dt : parse_grid(o.dt_grid)) {
      if (!(dt > 0.0)) throw ConfigError("--dt-grid values must be positive");
    }
  }
  if (o.dt && (!(*o.dt > 0.0) || !std::isfinite(*o.dt))) throw ConfigError("--dt must be positive and finite");
  if (o.paths && *o.paths < 1) throw ConfigError("--paths must be >= 1");
}

std::size_t step_count(double t_end, double dt) {
  const double steps = t_end / dt;
  const double rounded = std::round(steps);
  if (rounded < 1.0 || std::abs(steps - rounded) > 1e-9 * steps) {
    throw ConfigError("--dt " + format_number(dt) + " does not divide t-end " + format_number(t_end));
  }
  return static_cast<std::size_t>(rounded);
}

// ---- canonical config -----------------------------------------------------

std::string dump_config(const Options& o) {
  std::ostringstream out;
  auto line = [&](const std::string& key, const std::string& value) { out << key << " = " << value << '\n'; };
  out << '[' << o.command << "]\n";
  line("output", o.output);
  line("format", o.format);
  line("guard", o.guard);
  line("workers", std::to_string(o.workers));
  if (uses_problem(o.command)) {
    line("problem", o.problem);
    for (const auto& spec : problem_params().at(o.problem)) line(spec.key, format_number(*(o.*spec.field)));
    line("dim", std::to_string(o.dim));
    line("scheme", o.scheme);
    line("theta", format_number(o.theta));
    line("y0", format_list(parse_grid(o.y0)));
    line("t-end", format_number(*o.t_end));
    line("rel-tol", format_number(o.rel_tol));
    line("abs-tol", format_number(o.abs_tol));
    line("max-iters", std::to_string(o.max_iters));
    line("solver", o.solver);
  }
  if (uses_seed(o.command)) line("seed", std::to_string(o.seed));
  if (o.command == "simulate" || o.command == "stability") line("dt", format_number(*o.dt));
  if (o.command == "convergence") {
    line("stepsizes", format_list(parse_stepsizes(o.stepsizes)));
    line("p", std::to_string(o.p));
    line("refinement", std::to_string(o.refinement));
  }
  if (o.paths) line("paths", std::to_string(*o.paths));
  if (o.command == "linear-region") {
    line("theta", format_list(parse_grid(o.theta_grid)));
    line("mu-grid", format_list(parse_grid(o.mu_grid)));
    line("c-grid", format_list(parse_grid(o.c_grid)));
    line("dt-grid", format_list(parse_grid(o.dt_grid)));
  }
  return out.str();
}

// ---- shared setup ---------------------------------------------------------

tm_guard_policy guard_of(const std::string& g) {
  if (g == "strict") return TM_GUARD_STRICT;
  if (g == "off") return TM_GUARD_OFF;
  return TM_GUARD_WARN;
}

tm_format format_of(const Options& o) { return o.format == "json" ? TM_FORMAT_JSON : TM_FORMAT_CSV; }

tm_mc_setup mc_setup(const Options& o, const std::vector<double>& y0) {
  tm_mc_setup s;
  tm_mc_setup_init(&s);
  s.scheme = o.scheme == "sstm" ? TM_SCHEME_SSTM : TM_SCHEME_STM;
  s.theta = o.theta;
  s.y0 = y0.data();
  s.t_end = *o.t_end;
  s.paths = *o.paths;
  s.seed = o.seed;
  s.workers = o.workers;
  s.rel_tol = o.rel_tol;
  s.abs_tol = o.abs_tol;
  s.max_iters = o.max_iters;
  s.method = o.solver == "fixed-point" ? TM_SOLVER_FIXED_POINT : TM_SOLVER_NEWTON_FALLBACK;
  s.guard = guard_of(o.guard);
  return s;
}

tm_scheme_config scheme_config(const Options& o, double dt) {
  tm_scheme_config cfg;
  tm_scheme_config_init(&cfg);
  cfg.theta = o.theta;
  cfg.dt = dt;
  cfg.rel_tol = o.rel_tol;
  cfg.abs_tol = o.abs_tol;
  cfg.max_iters = o.max_iters;
  cfg.method = o.solver == "fixed-point" ? TM_SOLVER_FIXED_POINT : TM_SOLVER_NEWTON_FALLBACK;
  cfg.guard = guard_of(o.guard);
  return cfg;
}

double report_scalar(const tm_report* r, const char* key) {
  double v = 0.0;
  check(tm_report_scalar(r, key, &v), key);
  return v;
}

std::vector<double> report_column(const tm_report* r, const char* key) {
  std::size_t n = 0;
  check(tm_report_column(r, key, nullptr, 0, &n), key);
  std::vector<double> v(n);
  check(tm_report_column(r, key, v.data(), v.size(), &n), key);
  return v;
}

void write_report(const tm_report* r, const Options& o) {
  check(tm_report_write(r, o.output.c_str(), format_of(o), o.command.c_str()), "writing " + o.output);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Failure(kExitIo, "io", "cannot open '" + path + "' for writing");
  file << text;
  if (!file.flush()) throw Failure(kExitIo, "io", "failed writing '" + path + "'");
}

std::string fmt(double v) { return format_number(v); }

// ---- subcommands ----------------------------------------------------------

struct PathResult {
  TrajectoryPtr trajectory;
  tm_status status = TM_OK;
  std::string message;
  std::size_t divergence_step = 0;
};

int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  const auto problem = make_problem(o);
  const auto y0 = parse_y0(o);
  const double dt = *o.dt;
  const std::size_t steps = step_count(*o.t_end, dt);
  const tm_scheme_config cfg = scheme_config(o, dt);
  const tm_scheme scheme = o.scheme == "sstm" ? TM_SCHEME_SSTM : TM_SCHEME_STM;
  const int paths = *o.paths;

  std::vector<PathResult> results(paths);
  auto work = [&](int first, int stride) {
    std::vector<double> noise(steps);
    for (int m = first; m < paths; m += stride) {
      auto& r = results[m];
      r.status = tm_noise_generate(o.seed, static_cast<std::uint64_t>(m), *o.t_end, steps, noise.data());
      tm_trajectory* t = nullptr;
      if (r.status == TM_OK) r.status = tm_integrate(problem.get(), scheme, y0.data(), noise.data(), steps, &cfg, &t);
      r.trajectory.reset(t);
      if (r.status != TM_OK) {
        r.message = tm_last_error();
        r.divergence_step = tm_last_divergence_step();
      }
    }
  };
  {
    const int workers = std::min(o.workers, paths);
    std::vector<std::jthread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work, w, workers);
    work(0, workers);
  }
  for (int m = 0; m < paths; ++m) {
    const auto& r = results[m];
    if (r.status != TM_OK) {
      std::string what = "path " + std::to_string(m) + ": " + r.message;
      throw Failure(exit_code_for(r.status), tm_status_name(r.status), what);
    }
  }

  const tm_trajectory* first = results.front().trajectory.get();
  for (std::size_t i = 0; i < tm_trajectory_warning_count(first); ++i) {
    err << "warning: " << tm_trajectory_warning(first, i) << '\n';
  }
  const std::size_t dim = tm_trajectory_dim(first);
  const std::size_t points = tm_trajectory_points(first);
  const bool has_z = tm_trajectory_has_z(first) != 0;

  std::vector<double> state(dim);
  std::ostringstream text;
  if (o.format == "json") {
    nlohmann::ordered_json doc;
    doc["schema"] = "theta-milstein v1 simulate";
    doc["problem"] = o.problem;
    doc["scheme"] = o.scheme;
    doc["theta"] = o.theta;
    doc["dt"] = dt;
    doc["seed"] = o.seed;
    doc["paths"] = nlohmann::ordered_json::array();
    for (int m = 0; m < paths; ++m) {
      const tm_trajectory* t = results[m].trajectory.get();
      nlohmann::ordered_json path;
      path["path"] = m;
      path["t"] = std::vector<double>(tm_trajectory_times(t), tm_trajectory_times(t) + points);
      auto& ys = path["y"] = nlohmann::ordered_json::array();
      for (std::size_t k = 0; k < points; ++k) {
        check(tm_trajectory_y(t, k, state.data()));
        ys.push_back(state);
      }
      if (has_z) {
        auto& zs = path["z"] = nlohmann::ordered_json::array();
        for (std::size_t k = 0; k < points; ++k) {
          check(tm_trajectory_z(t, k, state.data()));
          zs.push_back(state);
        }
      }
      doc["paths"].push_back(std::move(path));
    }
    text << doc.dump(2) << '\n';
  } else {
    text << "# theta-milstein v1 simulate\npath,t";
    for (std::size_t i = 1; i <= dim; ++i) text << ",y_" << i;
    if (has_z) {
      for (std::size_t i = 1; i <= dim; ++i) text << ",z_" << i;
    }
    text << '\n';
    for (int m = 0; m < paths; ++m) {
      const tm_trajectory* t = results[m].trajectory.get();
      const double* times = tm_trajectory_times(t);
      for (std::size_t k = 0; k < points; ++k) {
        text << m << ',' << fmt(times[k]);
        check(tm_trajectory_y(t, k, state.data()));
        for (double v : state) text << ',' << fmt(v);
        if (has_z) {
          check(tm_trajectory_z(t, k, state.data()));
          for (double v : state) text << ',' << fmt(v);
        }
        text << '\n';
      }
    }
  }
  write_text(o.output, text.str());

  double terminal = 0.0;
  for (int m = 0; m < paths; ++m) {
    check(tm_trajectory_y(results[m].trajectory.get(), points - 1, state.data()));
    terminal += state[0];
  }
  out << "simulate: problem=" << o.problem << " scheme=" << o.scheme << " theta=" << fmt(o.theta)
      << " paths=" << paths << " steps=" << steps << " mean_terminal_y1=" << fmt(terminal / paths)
      << " warnings=" << tm_trajectory_warning_count(first) << " -> " << o.output << '\n';
  return kExitOk;
}

int cmd_convergence(const Options& o, std::ostream& out, std::ostream&) {
  const auto problem = make_problem(o);
  const auto y0 = parse_y0(o);
  const auto dts = parse_stepsizes(o.stepsizes);
  const tm_mc_setup setup = mc_setup(o, y0);
  tm_report* raw = nullptr;
  check(tm_estimate_strong_order(problem.get(), &setup, dts.data(), dts.size(), o.p, o.refinement, &raw),
        "convergence");
  const ReportPtr report(raw);
  write_report(report.get(), o);

  const auto diverged = report_column(report.get(), "diverged_paths");
  const double total_diverged = std::accumulate(diverged.begin(), diverged.end(), 0.0);
  out << "convergence: problem=" << o.problem << " scheme=" << o.scheme << " theta=" << fmt(o.theta)
      << " fitted_order=" << fmt(report_scalar(report.get(), "fitted_order"))
      << " valid=" << (report_scalar(report.get(), "fitted_order_valid") != 0.0 ? "true" : "false")
      << " reference=" << (report_scalar(report.get(), "reference_is_exact") != 0.0 ? "exact" : "fine-grid")
      << " levels=" << dts.size() << " paths=" << *o.paths << " p=" << o.p
      << " diverged=" << static_cast<long>(total_diverged) << " -> " << o.output << '\n';
  return kExitOk;
}

int cmd_stability(const Options& o, std::ostream& out, std::ostream&) {
  const auto problem = make_problem(o);
  const auto y0 = parse_y0(o);
  const tm_mc_setup setup = mc_setup(o, y0);
  tm_report* raw = nullptr;
  check(tm_estimate_ms_decay(problem.get(), &setup, *o.dt, &raw), "stability");
  const ReportPtr report(raw);
  write_report(report.get(), o);

  static const char* const kStatus[] = {"ok", "underflow", "divergent"};
  const int status = static_cast<int>(report_scalar(report.get(), "status"));
  out << "stability: problem=" << o.problem << " scheme=" << o.scheme << " theta=" << fmt(o.theta)
      << " dt=" << fmt(*o.dt) << " fitted_decay=" << fmt(report_scalar(report.get(), "fitted_decay"))
      << " stderr=" << fmt(report_scalar(report.get(), "decay_standard_error"))
      << " status=" << kStatus[std::clamp(status, 0, 2)];
  if (report_scalar(report.get(), "has_predicted_gamma_delta") != 0.0) {
    out << " predicted_gamma_delta=" << fmt(report_scalar(report.get(), "predicted_gamma_delta"));
  }
  out << " divergent_paths=" << static_cast<long>(report_scalar(report.get(), "divergent_paths")) << " -> "
      << o.output << '\n';
  return kExitOk;
}

int cmd_linear_region(const Options& o, std::ostream& out, std::ostream&) {
  const auto thetas = parse_grid(o.theta_grid);
  const auto dts = parse_grid(o.dt_grid);
  const auto mus = parse_grid(o.mu_grid);
  const auto cs = parse_grid(o.c_grid);
  tm_report* raw = nullptr;
  check(tm_linear_region_scan(thetas.data(), thetas.size(), dts.data(), dts.size(), mus.data(), mus.size(),
                              cs.data(), cs.size(), &raw),
        "linear-region");
  const ReportPtr report(raw);
  write_report(report.get(), o);

  auto count = [&](const char* key) {
    const auto col = report_column(report.get(), key);
    return std::count(col.begin(), col.end(), 1.0);
  };
  out << "linear-region: rows=" << static_cast<long>(report_scalar(report.get(), "rows"))
      << " scheme_stable=" << count("scheme_stable") << " sde_stable=" << count("sde_stable")
      << " unconditional=" << count("unconditional") << " -> " << o.output << '\n';
  return kExitOk;
}

struct CheckRow {
  std::string name;
  double value;
  double threshold;
  bool pass;
};

int cmd_selfcheck(const Options& o, std::ostream& out, std::ostream&) {
  std::vector<CheckRow> rows;

  // noise moments at N = 10^6, dt = 0.01
  tm_moment_report m{};
  check(tm_noise_moment_check(o.seed, 0, 1e4, 1000000, &m), "moment check");
  auto z = [](const tm_moment_estimate& e) { return std::abs(e.estimate - e.target) / e.standard_error; };
  rows.push_back({"noise_second_moment_z", z(m.second), 3.0, z(m.second) <= 3.0});
  rows.push_back({"noise_fourth_moment_z", z(m.fourth), 3.0, z(m.fourth) <= 3.0});
  rows.push_back({"noise_centered_square_z", z(m.centered_square), 3.0, z(m.centered_square) <= 3.0});

  // dyadic coarsening
  std::vector<double> fine(1024), half(512), quarter(256), twice(256);
  check(tm_noise_generate(o.seed, 0, 1.0, fine.size(), fine.data()));
  check(tm_noise_coarsen(fine.data(), fine.size(), 2, half.data()));
  check(tm_noise_coarsen(half.data(), half.size(), 2, twice.data()));
  check(tm_noise_coarsen(fine.data(), fine.size(), 4, quarter.data()));
  const bool coarsen_ok = twice == quarter;
  rows.push_back({"coarsen_identity_mismatches",
                  static_cast<double>(quarter.size() - std::inner_product(quarter.begin(), quarter.end(),
                                                                          twice.begin(), std::size_t{0},
                                                                          std::plus<>(), std::equal_to<>())),
                  0.0, coarsen_ok});

  // SSTM / STM equivalence on linear(mu=-2, c=1)
  Options lin = o;
  lin.problem = "linear";
  lin.mu = -2.0;
  lin.c = 1.0;
  lin.dim = 1;
  const auto problem = make_problem(lin);
  const double y0 = 1.0;
  const std::size_t steps = 100;
  std::vector<double> noise(steps), a(1), b(1);
  double worst = 0.0;
  for (double theta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    tm_scheme_config cfg = scheme_config(o, 0.01);
    cfg.theta = theta;
    cfg.guard = TM_GUARD_OFF;
    for (int path = 0; path < *o.paths; ++path) {
      check(tm_noise_generate(o.seed, static_cast<std::uint64_t>(path), 1.0, steps, noise.data()));
      tm_trajectory* ts = nullptr;
      tm_trajectory* tz = nullptr;
      check(tm_integrate(problem.get(), TM_SCHEME_STM, &y0, noise.data(), steps, &cfg, &ts));
      const TrajectoryPtr stm(ts);
      check(tm_integrate(problem.get(), TM_SCHEME_SSTM, &y0, noise.data(), steps, &cfg, &tz));
      const TrajectoryPtr sstm(tz);
      double diff = 0.0, scale = 0.0;
      for (std::size_t k = 0; k <= steps; ++k) {
        check(tm_trajectory_y(stm.get(), k, a.data()));
        check(tm_trajectory_y(sstm.get(), k, b.data()));
        diff = std::max(diff, std::abs(a[0] - b[0]));
        scale = std::max(scale, std::abs(a[0]));
      }
      worst = std::max(worst, diff / (1.0 + scale));
    }
  }
  rows.push_back({"sstm_stm_max_relative_gap", worst, 1e-9, worst <= 1e-9});

  const bool all = std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; });
  std::ostringstream text;
  if (o.format == "json") {
    nlohmann::ordered_json doc;
    doc["schema"] = "theta-milstein v1 selfcheck";
    doc["seed"] = o.seed;
    doc["pass"] = all;
    doc["checks"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      doc["checks"].push_back({{"check", r.name}, {"value", r.value}, {"threshold", r.threshold}, {"pass", r.pass}});
    }
    text << doc.dump(2) << '\n';
  } else {
    text << "# theta-milstein v1 selfcheck\ncheck,value,threshold,pass\n";
    for (const auto& r : rows) {
      text << r.name << ',' << fmt(r.value) << ',' << fmt(r.threshold) << ',' << (r.pass ? "true" : "false") << '\n';
    }
  }
  write_text(o.output, text.str());

  out << "selfcheck: " << (all ? "PASS" : "FAIL");
  for (const auto& r : rows) out << ' ' << r.name << '=' << fmt(r.value);
  out << " -> " << o.output << '\n';
  return all ? kExitOk : kExitCheckFailed;
}

// ---- argument assembly ----------------------------------------------------

std::optional<std::string> find_flag_value(const std::vector<std::string>& args, const std::string& flag) {
  std::optional<std::string> value;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == flag && i + 1 < args.size()) {
      value = args[i + 1];
    } else if (args[i].rfind(flag + "=", 0) == 0) {
      value = args[i].substr(flag.size() + 1);
    }
  }
  return value;
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(),
                     [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

// Config entries for `command` as --key=value arguments. [common] applies to
// every subcommand, the subcommand's own section after it.
std::vector<std::string> config_args(const std::string& path, const std::string& command) {
  std::ifstream file(path);
  if (!file) throw ConfigError("cannot read config file '" + path + "'");
  const auto sections = parse_ini(file, path);
  std::set<std::string> known(kCommands.begin(), kCommands.end());
  known.insert("common");
  std::vector<std::string> args;
  for (const char* wanted : {"common", command.c_str()}) {
    for (const auto& section : sections) {
      if (section.name.empty()) {
        if (!section.entries.empty()) throw ConfigError(path + ": key '" + section.entries.front().first +
                                                         "' appears before any [section]");
        continue;
      }
      if (!known.count(section.name)) throw ConfigError(path + ": unknown section [" + section.name + "]");
      if (section.name != wanted) continue;
      for (auto [key, value] : section.entries) {
        std::replace(key.begin(), key.end(), '_', '-');
        if (key == "config" || key == "dump-config") {
          throw ConfigError(path + ": '" + key + "' is not allowed in a config file");
        }
        args.push_back("--" + key + "=" + value);
      }
    }
  }
  return args;
}

int run_impl(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Split-step and stochastic theta-Milstein schemes: simulation and experiments", "theta_milstein"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tm_version()));

  auto* simulate = app.add_subcommand("simulate", "integrate sample paths and write them as long-format tables");
  auto* convergence = app.add_subcommand("convergence", "estimate the strong convergence order");
  auto* stability = app.add_subcommand("stability", "estimate the mean-square decay rate");
  auto* region = app.add_subcommand("linear-region", "mean-square stability table for the linear test equation");
  auto* selfcheck = app.add_subcommand("selfcheck", "noise moments, coarsening and SSTM/STM equivalence");

  for (auto* sub : {simulate, convergence, stability}) {
    add_common(sub, o);
    add_problem(sub, o);
    add_run(sub, o);
    sub->add_option("--seed", o.seed, "base seed; path i uses stream i");
    sub->add_option("--paths", o.paths, "Monte Carlo paths");
  }
  simulate->add_option("--dt", o.dt, "stepsize (default 0.01)");
  stability->add_option("--dt", o.dt, "stepsize (default 0.1)");
  convergence->add_option("--stepsizes", o.stepsizes, "2^-a..2^-b or a comma list");
  convergence->add_option("--p", o.p, "moment order (even)");
  convergence->add_option("--refinement", o.refinement, "reference grid refinement when no exact solution");

  add_common(region, o);
  region->add_option("--theta", o.theta_grid, "theta grid");
  region->add_option("--mu,--mu-grid", o.mu_grid, "mu grid: start:step:stop or comma list");
  region->add_option("--c,--c-grid", o.c_grid, "c grid");
  region->add_option("--dt,--dt-grid", o.dt_grid, "stepsize grid");

  add_common(selfcheck, o);
  selfcheck->add_option("--seed", o.seed, "seed");
  selfcheck->add_option("--paths", o.paths, "paths per theta for the equivalence check");

  // Assemble: subcommand, config-file entries, environment seed, then flags.
  std::vector<std::string> full = args;
  const auto pos = std::find_if(args.begin(), args.end(), [](const std::string& a) {
    return std::find(kCommands.begin(), kCommands.end(), a) != kCommands.end();
  });
  if (pos != args.end()) {
    o.command = *pos;
    const std::vector<std::string> user(pos + 1, args.end());
    std::vector<std::string> injected;
    if (const auto path = find_flag_value(user, "--config")) injected = config_args(*path, o.command);
    if (const char* env = std::getenv(kSeedEnv); env && *env && uses_seed(o.command) && !has_flag(user, "--seed")) {
      std::uint64_t seed = 0;
      const std::string text(env);
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
      if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ConfigError(std::string(kSeedEnv) + " must be an unsigned integer, got '" + text + "'");
      }
      injected.push_back("--seed=" + text);
    }
    full.assign(args.begin(), pos + 1);
    full.insert(full.end(), injected.begin(), injected.end());
    full.insert(full.end(), user.begin(), user.end());
  }

  try {
    std::vector<std::string> reversed(full.rbegin(), full.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: config: " << e.what() << '\n';
    return kExitConfig;
  }

  resolve(o);
  if (o.dump_config) {
    out << dump_config(o);
    return kExitOk;
  }
  if (o.command == "simulate") return cmd_simulate(o, out, err);
  if (o.command == "convergence") return cmd_convergence(o, out, err);
  if (o.command == "stability") return cmd_stability(o, out, err);
  if (o.command == "linear-region") return cmd_linear_region(o, out, err);
  return cmd_selfcheck(o, out, err);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return run_impl(args, out, err);
  } catch (const ConfigError& e) {
    err << "error: config: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Failure& e) {
    err << "error: " << e.kind() << ": " << e.what() << '\n';
    return e.code();
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace theta_milstein::cli
