// Copyright 2026 The theta-milstein Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "test_support.hpp"
#include "theta_milstein/analysis.hpp"
#include "theta_milstein/errors.hpp"
#include "theta_milstein/noise.hpp"

using namespace theta_milstein;
using theta_milstein::testing::scalar;

namespace {

// R from the closed form, evaluated independently of the library.
double amplification_oracle(double theta, double mu, double c, double dt) {
  const double num = std::pow(1 + (1 - theta) * mu * dt, 2) + c * c * dt + std::pow(c, 4) * dt * dt / 2;
  return num / std::pow(1 - theta * mu * dt, 2);
}

MonteCarloSetup setup_for(double theta, double y0, double t_end, int paths, std::uint64_t seed) {
  MonteCarloSetup s;
  s.theta = theta;
  s.y0 = scalar(y0);
  s.t_end = t_end;
  s.paths = paths;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("gamma_delta: worked values") {
  CHECK(gamma_delta(0.0, 0.1, 3.0, 4.0, 2.0) == doctest::Approx(2.876820724517809).epsilon(1e-14));
  CHECK(gamma_delta(1.0, 0.1, 3.0, std::nullopt, 2.0) == doctest::Approx(2.5464221837358068).epsilon(1e-14));
  // theta = 1/2 takes branch (i), where (1-2theta)K vanishes
  const double half = gamma_delta(0.5, 0.1, 3.0, 4.0, 2.0);
  CHECK(half == doctest::Approx(-10.0 * std::log(1.0 - 2.9 * 0.1 / std::pow(1.0 + 0.05 * 2.0, 2))).epsilon(1e-14));
}

TEST_CASE("gamma_delta: errors") {
  CHECK_THROWS_AS(gamma_delta(0.25, 0.1, 3.0, std::nullopt, 2.0), MissingConstant);
  // branch (i) stability_max = 3/(4 + 1) = 0.6
  CHECK_THROWS_AS(gamma_delta(0.0, 0.6, 3.0, 4.0, 2.0), DomainError);
  CHECK_NOTHROW(gamma_delta(0.0, 0.59, 3.0, 4.0, 2.0));
  // branch (ii) stability_max = 2*3/2 = 3
  CHECK_THROWS_AS(gamma_delta(1.0, 3.0, 3.0, std::nullopt, 2.0), DomainError);
  CHECK_THROWS_AS(gamma_delta(1.5, 0.1, 3.0, 4.0, 2.0), DomainError);
  CHECK_THROWS_AS(gamma_delta(1.0, 0.1, -1.0, 4.0, 2.0), DomainError);
}

TEST_CASE("gamma_delta: converges to gamma at first order as dt -> 0") {
  for (double theta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    std::vector<double> log_dt, log_gap;
    for (int j = 3; j <= 10; ++j) {
      const double dt = std::ldexp(1.0, -j);
      const double g = gamma_delta(theta, dt, 3.0, 4.0, 2.0);
      CHECK(g > 0.0);
      log_dt.push_back(std::log(dt));
      log_gap.push_back(std::log(std::abs(g - 3.0)));
    }
    CAPTURE(theta);
    CHECK(least_squares(log_dt, log_gap).slope >= 0.9);
    CHECK(gamma_delta(theta, 1e-9, 3.0, 4.0, 2.0) == doctest::Approx(3.0).epsilon(1e-7));
  }
}

TEST_CASE("linear_amplification: closed form") {
  CHECK(linear_amplification(1.0, -2.0, 1.0, 0.1) == doctest::Approx(0.7673611111111112).epsilon(1e-15));
  for (double mu : {-3.0, -0.2, 0.4}) {
    const double dt = 0.05;
    const double expected = std::pow(1 + 0.5 * mu * dt, 2) / std::pow(1 - 0.5 * mu * dt, 2);
    CHECK(linear_amplification(0.5, mu, 0.0, dt) == doctest::Approx(expected).epsilon(1e-14));
  }
  CHECK_THROWS_AS(linear_amplification(1.0, 2.0, 1.0, 0.5), SingularityError);
}

TEST_CASE("linear_amplification: R < 1 iff the Theorem 5.3 inequality holds") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> theta_d(0.0, 1.0), mu_d(-5.0, 2.0), c_d(0.0, 2.5), dt_d(0.001, 2.0);
  int checked = 0;
  for (int i = 0; i < 5000; ++i) {
    const double theta = theta_d(rng), mu = mu_d(rng), c = c_d(rng), dt = dt_d(rng);
    if (std::abs(1.0 - theta * mu * dt) < 1e-6) continue;
    const double lhs = (2 * mu + c * c) + 0.5 * std::pow(c, 4) * dt + (1 - 2 * theta) * mu * mu * dt;
    if (std::abs(lhs) < 1e-9) continue;
    const double r = linear_amplification(theta, mu, c, dt);
    CHECK(r == doctest::Approx(amplification_oracle(theta, mu, c, dt)).epsilon(1e-12));
    CHECK((r < 1.0) == (lhs < 0.0));
    ++checked;
  }
  CHECK(checked > 4900);
}

TEST_CASE("linear_amplification: one-step Monte Carlo ratio") {
  const double theta = 1.0, mu = -2.0, c = 1.0, dt = 0.1;
  const auto p = builtin_problem("linear", {{"mu", mu}, {"c", c}});
  const std::size_t n = 200000;
  const auto dws = generate(31, 0, dt * n, n).fine_increments;
  double sum = 0.0, sum_sq = 0.0;
  for (double dw : dws) {
    const double y1 = stm_step(p, scalar(1.0), dw, theta, dt, ImplicitSolverConfig{})[0];
    sum += y1 * y1;
    sum_sq += y1 * y1 * y1 * y1;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum_sq / n - mean * mean) / (n - 1));
  CHECK(std::abs(mean - linear_amplification(theta, mu, c, dt)) <= 3.0 * se);
}

TEST_CASE("linear_critical_dt and classification") {
  CHECK(linear_critical_dt(0.0, -2.0, 1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(linear_amplification(0.0, -2.0, 1.0, 0.5) < 1.0);
  CHECK(linear_amplification(0.0, -2.0, 1.0, 0.7) > 1.0);

  CHECK(classify_linear(1.0, -4.0, 1.0) == LinearRegime::kUnconditional);
  CHECK(std::isinf(linear_critical_dt(1.0, -4.0, 1.0)));
  for (double dt : {0.01, 0.3, 1.0, 10.0, 1000.0}) CHECK(linear_amplification(1.0, -4.0, 1.0, dt) < 1.0);

  // mu^2 = 1 < c^4/2 = 8: diffusion dominated
  CHECK(classify_linear(1.0, -1.0, 2.0) == LinearRegime::kConditional);
  CHECK(linear_critical_dt(1.0, -1.0, 2.0) == doctest::Approx(-2.0 / 7.0).epsilon(1e-15));
  CHECK(classify_linear(1.0, -2.5, 2.0) == LinearRegime::kConditional);
  const double critical = linear_critical_dt(1.0, -2.5, 2.0);
  CHECK(critical == doctest::Approx(4.0 / 7.0).epsilon(1e-15));
  CHECK(linear_amplification(1.0, -2.5, 2.0, 0.99 * critical) < 1.0);
  CHECK(linear_amplification(1.0, -2.5, 2.0, 1.01 * critical) > 1.0);

  CHECK(classify_linear(0.5, -10.0, 0.1) == LinearRegime::kConditional);
  CHECK(classify_linear(0.75, -1.0, 1.0) == LinearRegime::kUnconditional);  // 1 >= 1/1
}

TEST_CASE("linear_region_scan: rows and consistency") {
  const std::vector<double> thetas{0.0, 0.5, 0.75, 1.0};
  const std::vector<double> dts{1e-7, 0.1, 0.5, 1.0};
  const std::vector<double> mus{-4.0, -2.0, -1.0, 0.0, 0.5};
  const std::vector<double> cs{0.0, 1.0, 2.0};
  const auto rows = linear_region_scan(thetas, dts, mus, cs);
  CHECK(rows.size() == thetas.size() * dts.size() * mus.size() * cs.size());
  for (const auto& row : rows) {
    CHECK(row.sde_stable == (2 * row.mu + row.c * row.c < 0));
    if (std::abs(1.0 - row.theta * row.mu * row.dt) > 1e-12) {
      CHECK(row.amplification == doctest::Approx(amplification_oracle(row.theta, row.mu, row.c, row.dt)));
      CHECK(row.scheme_stable == (row.amplification < 1.0));
    }
    CHECK(row.regime == classify_linear(row.theta, row.mu, row.c));
    // dt -> 0 consistency
    if (row.dt == 1e-7 && 2 * row.mu + row.c * row.c != 0.0) CHECK(row.scheme_stable == row.sde_stable);
  }
  CHECK(linear_region_scan({}, dts, mus, cs).empty());
}

TEST_CASE("least_squares") {
  const auto fit = least_squares({0.0, 1.0, 2.0, 3.0}, {1.0, 3.0, 5.0, 7.0});
  CHECK(fit.slope == doctest::Approx(2.0));
  CHECK(fit.intercept == doctest::Approx(1.0));
  CHECK_THROWS_AS(least_squares({1.0}, {2.0}), DomainError);
  CHECK_THROWS_AS(least_squares({1.0, 2.0}, {2.0}), DomainError);
}

TEST_CASE("estimate_strong_order: linear problem, order one") {
  const auto p = builtin_problem("linear", {{"mu", -2.0}, {"c", 1.0}});
  auto setup = setup_for(1.0, 1.0, 1.0, 400, 77);
  std::vector<double> dts;
  for (int j = 3; j <= 7; ++j) dts.push_back(std::ldexp(1.0, -j));
  const auto report = estimate_strong_order(p, setup, dts, 2);
  CHECK(report.reference == ReferenceKind::kExactSolution);
  REQUIRE(report.errors.size() == 5);
  for (std::size_t i = 0; i + 1 < report.errors.size(); ++i) {
    CHECK(report.stepsizes[i] > report.stepsizes[i + 1]);
    const double ratio = report.errors[i] / report.errors[i + 1];
    CHECK(ratio >= 1.6);
    CHECK(ratio <= 2.6);
  }
  CHECK(report.fitted_order_valid);
  CHECK(report.fitted_order >= 0.8);
  CHECK(report.fitted_order <= 1.2);
  for (double se : report.standard_errors) CHECK(se > 0.0);
}

TEST_CASE("estimate_strong_order: independent of worker count, bitwise") {
  const auto p = builtin_problem("ginzburg_landau", {{"eta", 0.5}, {"lambda", 1.0}, {"s", 0.5}});
  auto setup = setup_for(1.0, 1.0, 1.0, 200, 3);
  const std::vector<double> dts{0.125, 0.0625, 0.03125};
  setup.workers = 1;
  const auto one = estimate_strong_order(p, setup, dts, 2);
  setup.workers = 3;
  const auto three = estimate_strong_order(p, setup, dts, 2);
  CHECK(one.reference == ReferenceKind::kFineGridSelf);
  CHECK(one.reference_dt == doctest::Approx(0.03125 / 4));
  CHECK(one.errors == three.errors);
  CHECK(one.standard_errors == three.standard_errors);
  CHECK(one.fitted_order == three.fitted_order);
}

TEST_CASE("estimate_strong_order: degenerate problem reports NaN with flag") {
  const auto p = builtin_problem("linear", {{"mu", 0.0}, {"c", 0.0}});
  const auto report = estimate_strong_order(p, setup_for(1.0, 1.0, 1.0, 100, 1), {0.5, 0.25, 0.125}, 2);
  for (double e : report.errors) CHECK(e == 0.0);
  CHECK(std::isnan(report.fitted_order));
  CHECK_FALSE(report.fitted_order_valid);
}

TEST_CASE("estimate_strong_order: contract checks") {
  const auto p = builtin_problem("linear", {{"mu", -1.0}, {"c", 1.0}});
  const auto s = setup_for(1.0, 1.0, 1.0, 100, 1);
  CHECK_THROWS_AS(estimate_strong_order(p, s, {0.5, 0.25}, 3), DomainError);
  CHECK_THROWS_AS(estimate_strong_order(p, s, {0.5, 0.25}, 0), DomainError);
  CHECK_THROWS_AS(estimate_strong_order(p, s, {0.3, 0.1}, 2), DomainError);
  CHECK_THROWS_AS(estimate_strong_order(p, setup_for(1.0, 1.0, 1.0, 99, 1), {0.5, 0.25}, 2), DomainError);
}

TEST_CASE("check_moment_bound: Ginzburg-Landau") {
  const auto p = builtin_problem("ginzburg_landau", {{"eta", 0.5}, {"lambda", 1.0}, {"s", 1.0}});
  const auto bounded = check_moment_bound(p, setup_for(1.0, 1.0, 1.0, 1000, 12), 0.01, 4);
  CHECK(bounded.finite);
  CHECK(bounded.divergent_paths == 0);
  CHECK(std::isfinite(bounded.estimate));
  CHECK(bounded.estimate >= 1.0);  // k = 0 contributes |y0|^4

  const auto blown = check_moment_bound(p, setup_for(0.0, 100.0, 1.0, 200, 12), 0.1, 2);
  CHECK(blown.divergent_fraction() > 0.0);
  CHECK_FALSE(blown.finite);
}

TEST_CASE("check_moment_bound: stable under doubling the path count") {
  const auto p = builtin_problem("linear", {{"mu", -1.0}, {"c", 0.5}});
  const auto small = check_moment_bound(p, setup_for(0.5, 1.0, 1.0, 1000, 4), 0.01, 2);
  const auto large = check_moment_bound(p, setup_for(0.5, 1.0, 1.0, 2000, 4), 0.01, 2);
  CHECK(std::abs(small.estimate - large.estimate) <=
        3.0 * std::sqrt(small.standard_error * small.standard_error + large.standard_error * large.standard_error));
}

TEST_CASE("estimate_ms_decay: linear problem against -log(R)/dt") {
  const auto p = builtin_problem("linear", {{"mu", -2.0}, {"c", 1.0}});
  // |y_k|^2 has relative variance growing like 1.47^k here, so the horizon is
  // kept at the 20-step minimum and the path count is large.
  const auto report = estimate_ms_decay(p, setup_for(1.0, 1.0, 2.0, 40000, 21), 0.1);
  CHECK(report.status == DecayStatus::kOk);
  CHECK(report.fit_points >= 10);
  REQUIRE(report.second_moments.size() == 21);
  CHECK(report.second_moments[0] == 1.0);
  const double oracle = -std::log(amplification_oracle(1.0, -2.0, 1.0, 0.1)) / 0.1;
  CHECK(report.decay_standard_error > 0.0);
  CHECK(std::abs(report.fitted_decay - oracle) <= 3.0 * report.decay_standard_error);
  REQUIRE(report.predicted_gamma_delta);
  CHECK(*report.predicted_gamma_delta > 0.0);
}

TEST_CASE("estimate_ms_decay: dissipative Ginzburg-Landau decays") {
  const auto p = builtin_problem("ginzburg_landau", {{"eta", -2.0}, {"lambda", 1.0}, {"s", 1.0}});
  REQUIRE(p.constants().gamma);
  CHECK(*p.constants().gamma == doctest::Approx(2.0));
  const auto report = estimate_ms_decay(p, setup_for(1.0, 1.0, 2.0, 1000, 8), 0.05);
  CHECK(report.status == DecayStatus::kOk);
  CHECK(report.fitted_decay > 0.0);
}

TEST_CASE("estimate_ms_decay: underflow and divergence statuses") {
  const auto p = builtin_problem("linear", {{"mu", -2.0}, {"c", 1.0}});
  const auto zero = estimate_ms_decay(p, setup_for(1.0, 0.0, 2.0, 1000, 1), 0.1);
  CHECK(zero.status == DecayStatus::kUnderflow);
  CHECK(zero.fitted_decay == std::numeric_limits<double>::infinity());

  const auto gl = builtin_problem("ginzburg_landau", {{"eta", 0.5}, {"lambda", 1.0}, {"s", 1.0}});
  auto s = setup_for(0.0, 100.0, 2.0, 1000, 1);
  const auto blown = estimate_ms_decay(gl, s, 0.1);
  CHECK(blown.status == DecayStatus::kDivergent);
  CHECK(blown.divergent_paths > 0);
  CHECK(blown.fitted_decay < 0.0);

  CHECK_THROWS_AS(estimate_ms_decay(p, setup_for(1.0, 1.0, 2.0, 999, 1), 0.1), DomainError);
  CHECK_THROWS_AS(estimate_ms_decay(p, setup_for(1.0, 1.0, 1.0, 1000, 1), 0.1), DomainError);
}
