// Copyright 2026 The theta-milstein Authors
// SPDX-License-Identifier: Apache-2.0

#include "theta_milstein/report_io.hpp"

#include <json.hpp>
#include <ostream>

#include "format.hpp"

namespace theta_milstein {

namespace {

using nlohmann::ordered_json;

ordered_json number(double v) {
  if (std::isfinite(v)) return v;
  return detail::format_double(v);
}

ordered_json numbers(const std::vector<double>& values) {
  ordered_json out = ordered_json::array();
  for (double v : values) out.push_back(number(v));
  return out;
}

ordered_json moment(const MomentEstimate& m) {
  return {{"estimate", number(m.estimate)}, {"standard_error", number(m.standard_error)}, {"target", number(m.target)}};
}

ordered_json state(const State& x) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < x.size(); ++i) out.push_back(number(x[i]));
  return out;
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace

std::string csv_schema_line(const std::string& subcommand) { return "# theta-milstein v1 " + subcommand; }

std::string to_json(const ConvergenceReport& r) {
  ordered_json j;
  j["kind"] = "convergence";
  j["problem"] = r.problem;
  j["scheme"] = to_string(r.scheme);
  j["theta"] = number(r.theta);
  j["p"] = r.p;
  j["paths"] = r.paths;
  j["reference"] = to_string(r.reference);
  j["reference_dt"] = number(r.reference_dt);
  j["stepsizes"] = numbers(r.stepsizes);
  j["errors"] = numbers(r.errors);
  j["standard_errors"] = numbers(r.standard_errors);
  j["diverged_paths"] = r.diverged_paths;
  j["fitted_order"] = number(r.fitted_order);
  j["fitted_order_valid"] = r.fitted_order_valid;
  j["guard_warnings"] = r.guard_warnings;
  return dump(j);
}

std::string to_json(const StabilityReport& r) {
  ordered_json j;
  j["kind"] = "stability";
  j["problem"] = r.problem;
  j["theta"] = number(r.theta);
  j["dt"] = number(r.dt);
  j["paths"] = r.paths;
  j["status"] = to_string(r.status);
  j["fitted_decay"] = number(r.fitted_decay);
  j["decay_standard_error"] = number(r.decay_standard_error);
  j["fit_points"] = r.fit_points;
  j["divergent_paths"] = r.divergent_paths;
  j["predicted_gamma_delta"] = r.predicted_gamma_delta ? number(*r.predicted_gamma_delta) : ordered_json(nullptr);
  j["times"] = numbers(r.times);
  j["second_moments"] = numbers(r.second_moments);
  j["standard_errors"] = numbers(r.standard_errors);
  j["guard_warnings"] = r.guard_warnings;
  return dump(j);
}

std::string to_json(const MomentBoundReport& r) {
  ordered_json j;
  j["kind"] = "moment_bound";
  j["theta"] = number(r.theta);
  j["dt"] = number(r.dt);
  j["p"] = r.p;
  j["paths"] = r.paths;
  j["estimate"] = number(r.estimate);
  j["standard_error"] = number(r.standard_error);
  j["divergent_paths"] = r.divergent_paths;
  j["finite"] = r.finite;
  j["guard_warnings"] = r.guard_warnings;
  return dump(j);
}

std::string to_json(const MomentReport& r) {
  ordered_json j;
  j["kind"] = "noise_moments";
  j["dt"] = number(r.dt);
  j["count"] = r.count;
  j["second"] = moment(r.second);
  j["fourth"] = moment(r.fourth);
  j["centered_square"] = moment(r.centered_square);
  j["sixth"] = moment(r.sixth);
  return dump(j);
}

std::string to_json(const std::vector<RegionRow>& rows) {
  ordered_json j;
  j["kind"] = "linear_region";
  ordered_json list = ordered_json::array();
  for (const auto& row : rows) {
    list.push_back({{"theta", number(row.theta)},
                    {"dt", number(row.dt)},
                    {"mu", number(row.mu)},
                    {"c", number(row.c)},
                    {"R", number(row.amplification)},
                    {"sde_stable", row.sde_stable},
                    {"scheme_stable", row.scheme_stable},
                    {"regime", to_string(row.regime)},
                    {"critical_dt", number(row.critical_dt)}});
  }
  j["rows"] = std::move(list);
  return dump(j);
}

std::string to_json(const Trajectory& t) {
  ordered_json j;
  j["kind"] = "trajectory";
  j["scheme"] = to_string(t.scheme);
  j["dt"] = number(t.dt);
  j["times"] = numbers(t.times);
  ordered_json ys = ordered_json::array();
  for (const auto& y : t.y_states) ys.push_back(state(y));
  j["y"] = std::move(ys);
  if (t.z_states) {
    ordered_json zs = ordered_json::array();
    for (const auto& z : *t.z_states) zs.push_back(state(z));
    j["z"] = std::move(zs);
  }
  j["flags"] = {{"guard_warnings", t.flags.guard_warnings},
                {"max_solver_iters", t.flags.max_solver_iters},
                {"total_solver_iters", t.flags.total_solver_iters},
                {"fallback_count", t.flags.fallback_count}};
  return dump(j);
}

void write_csv(const ConvergenceReport& r, std::ostream& out) {
  out << "dt,error,stderr,p,paths\n";
  for (std::size_t l = 0; l < r.stepsizes.size(); ++l) {
    out << detail::format_double(r.stepsizes[l]) << ',' << detail::format_double(r.errors[l]) << ','
        << detail::format_double(r.standard_errors[l]) << ',' << r.p << ',' << r.paths << '\n';
  }
}

void write_csv(const StabilityReport& r, std::ostream& out) {
  out << "t,second_moment,stderr\n";
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    out << detail::format_double(r.times[k]) << ',' << detail::format_double(r.second_moments[k]) << ','
        << detail::format_double(r.standard_errors[k]) << '\n';
  }
}

void write_csv(const std::vector<RegionRow>& rows, std::ostream& out) {
  out << "theta,dt,mu,c,R,sde_stable,scheme_stable,regime\n";
  for (const auto& row : rows) {
    out << detail::format_double(row.theta) << ',' << detail::format_double(row.dt) << ','
        << detail::format_double(row.mu) << ',' << detail::format_double(row.c) << ','
        << detail::format_double(row.amplification) << ',' << (row.sde_stable ? "true" : "false") << ','
        << (row.scheme_stable ? "true" : "false") << ',' << to_string(row.regime) << '\n';
  }
}

}  // namespace theta_milstein
