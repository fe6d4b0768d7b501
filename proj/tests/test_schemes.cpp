// Copyright 2026 The theta-milstein Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "test_support.hpp"
#include "theta_milstein/errors.hpp"
#include "theta_milstein/noise.hpp"
#include "theta_milstein/schemes.hpp"

using namespace theta_milstein;
using theta_milstein::testing::builtin_catalog;
using theta_milstein::testing::scalar;

namespace {

// Scalar problem with drift f and no noise. No drift Jacobian, so Newton uses
// finite differences.
SdeProblem drift_only(std::function<double(double)> f, std::optional<std::function<double(double)>> df = {}) {
  SdeProblem::Definition def;
  def.name = "drift_only";
  def.dim = 1;
  def.drift = [f](const State& x) -> State { return scalar(f(x[0])); };
  def.diffusion = [](const State&) -> State { return scalar(0.0); };
  def.diffusion_jacobian = [](const State&) -> Matrix { return Matrix::Zero(1, 1); };
  if (df) def.drift_jacobian = [g = *df](const State& x) -> Matrix { return Matrix::Constant(1, 1, g(x[0])); };
  def.constants.mu = 0.0;
  return SdeProblem(std::move(def));
}

double bisect(const std::function<double(double)>& g, double lo, double hi, double tol) {
  double glo = g(lo);
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if ((gm < 0) == (glo < 0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<double> brownian(std::uint64_t seed, std::uint64_t path, double t_end, std::size_t steps) {
  return generate(seed, path, t_end, steps).fine_increments;
}

}  // namespace

TEST_CASE("implicit_solve: worked examples") {
  const ImplicitSolverConfig cfg;
  const auto linear = builtin_problem("linear", {{"mu", -2.0}, {"c", 1.0}});
  CHECK(implicit_solve(linear, scalar(1.2), 1.0, 0.1, cfg)[0] == doctest::Approx(1.0).epsilon(1e-15));

  for (double z : {-3.0, 0.0, 0.7}) CHECK(implicit_solve(linear, scalar(z), 0.0, 0.5, cfg)[0] == z);

  // f(y) = -y^3, theta = 0.5, dt = 0.1: y + 0.05 y^3 = 1
  const auto cubic = builtin_problem("cubic_additive", {{"a", 0.0}, {"s", 1.0}});
  const double oracle = bisect([](double y) { return y + 0.05 * y * y * y - 1.0; }, 0.0, 1.0, 1e-12);
  SolveStats stats;
  const double y = implicit_solve(cubic, scalar(1.0), 0.5, 0.1, cfg, &stats)[0];
  CHECK(std::abs(y - oracle) <= 1e-10);
  CHECK(stats.iterations >= 1);
  CHECK(stats.iterations <= cfg.max_iters);
  CHECK_FALSE(stats.used_fallback);

  // f(y) = y - y^3 fixes 0 for any valid theta*dt
  const auto odd = builtin_problem("cubic_additive", {{"a", 1.0}, {"s", 1.0}});
  for (double dt : {0.01, 0.3, 0.9}) CHECK(implicit_solve(odd, scalar(0.0), 1.0, dt, cfg)[0] == 0.0);
}

TEST_CASE("implicit_solve: linear resolvent to ulp scale") {
  const ImplicitSolverConfig cfg;
  for (double mu : {-5.0, -0.5, 0.3, 2.0}) {
    const auto p = builtin_problem("linear", {{"mu", mu}, {"c", 0.2}, {"dim", 2.0}});
    for (double theta : {0.25, 0.5, 1.0}) {
      for (double dt : {0.01, 0.1, 0.4}) {
        if (theta * mu * dt >= 1.0) continue;
        State z(2);
        z << 1.7, -0.3;
        const State y = implicit_solve(p, z, theta, dt, cfg);
        const State expected = z / (1.0 - theta * mu * dt);
        for (int i = 0; i < 2; ++i) CHECK(std::abs(y[i] - expected[i]) <= 8 * 2.2e-16 * std::abs(expected[i]));
      }
    }
  }
}

TEST_CASE("implicit_solve: finite-difference Jacobian and fixed-point only agree with the oracle") {
  const auto p = drift_only([](double y) { return -y * y * y; });
  const double oracle = bisect([](double y) { return y + 0.05 * y * y * y - 1.0; }, 0.0, 1.0, 1e-12);
  ImplicitSolverConfig cfg;
  CHECK(std::abs(implicit_solve(p, scalar(1.0), 0.5, 0.1, cfg)[0] - oracle) <= 1e-10);
  cfg.method = SolverMethod::kFixedPointOnly;
  cfg.max_iters = 200;
  SolveStats stats;
  CHECK(std::abs(implicit_solve(p, scalar(1.0), 0.5, 0.1, cfg, &stats)[0] - oracle) <= 1e-10);
  CHECK_FALSE(stats.used_fallback);
}

TEST_CASE("implicit_solve: singular Newton system falls back to fixed point") {
  // f(y) = -y with a Jacobian that lies: 1 - theta*dt*J = 0 at theta*dt = 0.1
  const auto p = drift_only([](double y) { return -y; }, [](double) { return 10.0; });
  SolveStats stats;
  const double y = implicit_solve(p, scalar(1.1), 1.0, 0.1, ImplicitSolverConfig{}, &stats)[0];
  CHECK(y == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(stats.used_fallback);
}

TEST_CASE("implicit_solve: no root means NonConvergence with a best residual") {
  // y - 0.1*(10 y + 1) - z = -0.1 - z never vanishes for z = 0
  const auto p = drift_only([](double y) { return 10.0 * y + 1.0; });
  ImplicitSolverConfig cfg;
  cfg.max_iters = 20;
  try {
    implicit_solve(p, scalar(0.0), 1.0, 0.1, cfg);
    FAIL("expected NonConvergence");
  } catch (const NonConvergence& e) {
    CHECK(e.best_residual() > 0.0);
    CHECK(e.code() == Error::Code::kNonConvergence);
  }
  CHECK_THROWS_AS(implicit_solve(p, scalar(std::nan("")), 1.0, 0.1, cfg), ContractViolation);
  cfg.max_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("sstm_step: worked examples") {
  const ImplicitSolverConfig cfg;
  const auto p0 = builtin_problem("linear", {{"mu", 0.0}, {"c", 1.0}});
  for (double theta : {0.0, 0.5, 1.0}) {
    const auto step = sstm_step(p0, scalar(1.0), 0.5, theta, 0.25, cfg);
    CHECK(step.y[0] == 1.0);
    CHECK(step.z_next[0] == 1.5);
  }

  const auto p = builtin_problem("linear", {{"mu", -2.0}, {"c", 1.0}});
  const auto step = sstm_step(p, scalar(1.0), -0.2, 1.0, 0.1, cfg);
  const double yk = 1.0 / 1.2;
  CHECK(step.y[0] == doctest::Approx(yk).epsilon(1e-15));
  CHECK(step.z_next[0] == doctest::Approx(0.6416666666666665).epsilon(1e-14));

  // additive noise: split-step theta-Euler
  const auto add = builtin_problem("cubic_additive", {{"a", 1.0}, {"s", 0.7}});
  const auto s2 = sstm_step(add, scalar(0.4), 0.3, 0.5, 0.1, cfg);
  const double y = s2.y[0];
  CHECK(s2.z_next[0] == 0.4 + (y - y * y * y) * 0.1 + 0.7 * 0.3);
}

TEST_CASE("stm_step: theta = 0 is classical Milstein, bitwise") {
  const ImplicitSolverConfig cfg;
  for (const auto& entry : builtin_catalog()) {
    const auto p = builtin_problem(entry.name, entry.params);
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
      const State y = theta_milstein::testing::random_state(rng, p.dim(), -2.0, 2.0);
      const double dw = std::normal_distribution<double>(0.0, 0.3)(rng);
      const double dt = 0.09;
      const State f = p.drift(y);
      const State g = p.diffusion(y);
      const State lg = l1g(p, y);
      State expected(p.dim());
      for (int i = 0; i < p.dim(); ++i) {
        const double drift_part = (1.0 * dt) * f[i];
        const double noise_part = g[i] * dw + (0.5 * lg[i]) * (dw * dw - dt);
        expected[i] = (y[i] + drift_part) + noise_part;
      }
      const State got = stm_step(p, y, dw, 0.0, dt, cfg);
      for (int i = 0; i < p.dim(); ++i) CHECK(got[i] == expected[i]);
    }
  }
}

TEST_CASE("stm_step: linear theta = 1 closed form") {
  const double mu = -1.5, c = 0.8, dt = 0.05, dw = 0.13, yk = 2.0;
  const auto p = builtin_problem("linear", {{"mu", mu}, {"c", c}});
  const double expected = (yk + c * yk * dw + 0.5 * c * c * yk * (dw * dw - dt)) / (1.0 - mu * dt);
  CHECK(stm_step(p, scalar(yk), dw, 1.0, dt, ImplicitSolverConfig{})[0] ==
        doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("stm_step: additive noise is bit-identical to theta-Euler") {
  const ImplicitSolverConfig cfg;
  const auto p = builtin_problem("cubic_additive", {{"a", 1.0}, {"s", 0.6}, {"dim", 2.0}});
  const auto dws = brownian(3, 0, 1.0, 100);
  for (double theta : {0.0, 0.5, 1.0}) {
    State a = State::Constant(2, 0.8);
    State b = a;
    for (double dw : dws) {
      a = stm_step(p, a, dw, theta, 0.01, cfg);
      const State rhs = b + (1.0 - theta) * 0.01 * p.drift(b) + p.diffusion(b) * dw;
      b = implicit_solve(p, rhs, theta, 0.01, cfg);
      REQUIRE(a == b);
    }
  }
}

TEST_CASE("SSTM and STM produce the same y-iterates") {
  const std::vector<double> thetas{0.0, 0.25, 0.5, 0.75, 1.0};
  for (const auto& entry : builtin_catalog()) {
    const auto p = builtin_problem(entry.name, entry.params);
    for (double theta : thetas) {
      SchemeConfig cfg;
      cfg.theta = theta;
      cfg.dt = 0.01;
      cfg.guard = GuardPolicy::kOff;
      for (std::uint64_t path = 0; path < 5; ++path) {
        const auto dws = brownian(11, path, 1.0, 100);
        const State y0 = State::Constant(p.dim(), 0.9);
        const auto stm = integrate(p, Scheme::kStm, y0, dws, cfg);
        const auto sstm = integrate(p, Scheme::kSstm, y0, dws, cfg);
        REQUIRE(stm.y_states.size() == sstm.y_states.size());
        double diff = 0.0, scale = 0.0;
        for (std::size_t k = 0; k < stm.y_states.size(); ++k) {
          diff = std::max(diff, (stm.y_states[k] - sstm.y_states[k]).lpNorm<Eigen::Infinity>());
          scale = std::max(scale, stm.y_states[k].lpNorm<Eigen::Infinity>());
        }
        CAPTURE(entry.name);
        CAPTURE(theta);
        CHECK(diff <= 10.0 * cfg.solver.rel_tol * (1.0 + scale));
      }
    }
  }
}

TEST_CASE("integrate: trajectory shape and SSTM z invariant") {
  const auto p = builtin_problem("ginzburg_landau", {{"eta", 0.5}, {"lambda", 1.0}, {"s", 0.5}});
  SchemeConfig cfg;
  cfg.theta = 0.75;
  cfg.dt = 0.02;
  const auto dws = brownian(5, 0, 1.0, 50);
  const auto traj = integrate(p, Scheme::kSstm, scalar(1.3), dws, cfg);
  REQUIRE(traj.times.size() == 51);
  REQUIRE(traj.y_states.size() == 51);
  REQUIRE(traj.z_states);
  REQUIRE(traj.z_states->size() == 51);
  CHECK(traj.y_states[0][0] == 1.3);
  for (std::size_t k = 0; k <= 50; ++k) {
    CHECK(traj.times[k] == doctest::Approx(0.02 * k).epsilon(1e-15));
    const State lhs = (*traj.z_states)[k];
    const State rhs = traj.y_states[k] - cfg.theta * cfg.dt * p.drift(traj.y_states[k]);
    CHECK(std::abs(lhs[0] - rhs[0]) <= 1e-12 * (1.0 + std::abs(traj.y_states[k][0])));
  }
  CHECK(traj.flags.max_solver_iters >= 1);
  CHECK(traj.flags.total_solver_iters >= 51);

  const auto again = integrate(p, Scheme::kSstm, scalar(1.3), dws, cfg);
  CHECK(again.y_states == traj.y_states);
  CHECK(*again.z_states == *traj.z_states);

  const auto stm = integrate(p, Scheme::kStm, scalar(1.3), dws, cfg);
  CHECK_FALSE(stm.z_states);
}

TEST_CASE("integrate: zero noise and no dynamics give a constant trajectory") {
  const std::vector<double> zeros(40, 0.0);
  SchemeConfig cfg;
  for (const auto& [name, params] : std::vector<std::pair<std::string, ParamMap>>{
           {"linear", {{"mu", 0.0}, {"c", 0.0}, {"dim", 2.0}}}, {"cubic_additive", {{"a", 0.0}, {"s", 0.0}}}}) {
    const auto p = builtin_problem(name, params);
    State y0 = State::Constant(p.dim(), 0.0);
    if (name == "linear") y0 << 2.5, -1.0;
    for (Scheme scheme : {Scheme::kStm, Scheme::kSstm}) {
      const auto traj = integrate(p, scheme, y0, zeros, cfg);
      for (const auto& y : traj.y_states) CHECK(y == y0);
    }
  }
}

TEST_CASE("integrate: GBM terminal mean matches the exact solution") {
  const double mu = -2.0, c = 1.0;
  const auto p = builtin_problem("linear", {{"mu", mu}, {"c", c}});
  SchemeConfig cfg;
  cfg.theta = 1.0;
  cfg.dt = 0.01;
  const int paths = 10000;
  double sum = 0.0, sum_sq = 0.0;
  for (int m = 0; m < paths; ++m) {
    const auto dws = brownian(2718, m, 1.0, 100);
    const double y = integrate(p, Scheme::kStm, scalar(1.0), dws, cfg).y_states.back()[0];
    sum += y;
    sum_sq += y * y;
  }
  const double mean = sum / paths;
  const double se = std::sqrt((sum_sq / paths - mean * mean) / (paths - 1));
  CHECK(std::abs(mean - std::exp(mu)) <= 3.0 * se);
}

TEST_CASE("integrate: explicit blow-up versus implicit stability") {
  const auto p = builtin_problem("ginzburg_landau", {{"eta", 0.5}, {"lambda", 1.0}, {"s", 0.5}});
  const auto dws = brownian(8, 0, 1.0, 10);
  SchemeConfig cfg;
  cfg.dt = 0.1;
  cfg.theta = 0.0;
  for (Scheme scheme : {Scheme::kStm, Scheme::kSstm}) {
    try {
      integrate(p, scheme, scalar(1e3), dws, cfg);
      FAIL("expected Divergence");
    } catch (const Divergence& e) {
      CHECK(e.step() >= 1);
      CHECK(e.step() <= 10);
    }
  }
  cfg.theta = 1.0;
  for (Scheme scheme : {Scheme::kStm, Scheme::kSstm}) {
    const auto traj = integrate(p, scheme, scalar(1e3), dws, cfg);
    for (const auto& y : traj.y_states) CHECK(std::isfinite(y[0]));
    CHECK(std::abs(traj.y_states.back()[0]) < 10.0);
  }
}

TEST_CASE("guards") {
  const auto p = builtin_problem("linear", {{"mu", 0.5}, {"c", 1.0}});
  SchemeConfig cfg;
  cfg.theta = 1.0;
  cfg.dt = 0.1;
  CHECK(check_guards(p, cfg).empty());

  cfg.dt = 2.5;  // theta*mu*dt = 1.25
  cfg.guard = GuardPolicy::kStrict;
  CHECK_THROWS_AS(check_guards(p, cfg), GuardViolation);
  CHECK_THROWS_AS(integrate(p, Scheme::kStm, scalar(1.0), std::vector<double>(2, 0.0), cfg), GuardViolation);
  cfg.guard = GuardPolicy::kWarn;
  CHECK_FALSE(check_guards(p, cfg).empty());
  cfg.guard = GuardPolicy::kOff;
  CHECK(check_guards(p, cfg).empty());

  // beta = max(mu + 1/2, 2c) = 2, so 1/(2*theta*beta) = 0.25 binds before 1/(theta*mu) = 2
  cfg.dt = 0.5;
  cfg.guard = GuardPolicy::kStrict;
  CHECK_THROWS_AS(check_guards(p, cfg), GuardViolation);
  cfg.guard = GuardPolicy::kWarn;
  const auto warnings = check_guards(p, cfg);
  CHECK(warnings.size() == 1);

  cfg.theta = 1.5;
  CHECK_THROWS_AS(check_guards(p, cfg), DomainError);
}

TEST_CASE("trajectory CSV columns") {
  const auto p = builtin_problem("linear", {{"mu", -1.0}, {"c", 0.5}, {"dim", 2.0}});
  SchemeConfig cfg;
  cfg.dt = 0.5;
  std::ostringstream sstm_out, stm_out;
  write_trajectory_csv(integrate(p, Scheme::kSstm, State::Constant(2, 1.0), std::vector<double>{0.1, -0.2}, cfg),
                       sstm_out);
  write_trajectory_csv(integrate(p, Scheme::kStm, State::Constant(2, 1.0), std::vector<double>{0.1, -0.2}, cfg),
                       stm_out);
  std::istringstream sstm_in(sstm_out.str());
  std::string header;
  std::getline(sstm_in, header);
  CHECK(header == "t,y_1,y_2,z_1,z_2");
  std::string row;
  std::getline(sstm_in, row);
  CHECK(row.rfind("0,1,1,", 0) == 0);
  int rows = 1;
  while (std::getline(sstm_in, row)) ++rows;
  CHECK(rows == 3);
  CHECK(stm_out.str().rfind("t,y_1,y_2\n0,1,1\n", 0) == 0);
}

TEST_CASE("parse helpers") {
  CHECK(parse_scheme("sstm") == Scheme::kSstm);
  CHECK(parse_scheme("STM") == Scheme::kStm);
  CHECK_THROWS_AS(parse_scheme("euler"), DomainError);
  CHECK(parse_guard_policy("strict") == GuardPolicy::kStrict);
  CHECK_THROWS_AS(parse_guard_policy("loud"), DomainError);
  CHECK(std::string(to_string(GuardPolicy::kOff)) == "off");
  CHECK(is_divergent(scalar(1e151)));
  CHECK(is_divergent(scalar(INFINITY)));
  CHECK_FALSE(is_divergent(scalar(1e149)));
}
