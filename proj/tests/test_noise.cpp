// Copyright 2026 The theta-milstein Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "theta_milstein/errors.hpp"
#include "theta_milstein/noise.hpp"

using namespace theta_milstein;

TEST_CASE("philox4x32-10 known-answer vectors") {
  using Block = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == Block{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        Block{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        Block{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("generate is a pure function of (seed, path_index, t_end, fine_steps)") {
  const auto a = generate(42, 7, 1.0, 1001);
  const auto b = generate(42, 7, 1.0, 1001);
  CHECK(a.fine_increments == b.fine_increments);
  CHECK(a.fine_increments.size() == 1001);

  const auto other_path = generate(42, 8, 1.0, 1001);
  const auto other_seed = generate(43, 7, 1.0, 1001);
  CHECK(a.fine_increments != other_path.fine_increments);
  CHECK(a.fine_increments != other_seed.fine_increments);

  // a prefix does not depend on how many increments were requested
  const auto longer = generate(42, 7, 2.0, 2002);
  const double ratio = std::sqrt(a.fine_dt()) / std::sqrt(longer.fine_dt());
  for (std::size_t i = 0; i < 1001; ++i) CHECK(a.fine_increments[i] == longer.fine_increments[i] * ratio);
}

TEST_CASE("generate: sample variance and mean") {
  const std::size_t n = 1000000;
  const auto grid = generate(2024, 0, 0.01 * n, n);
  CHECK(grid.fine_dt() == doctest::Approx(0.01));
  const auto& x = grid.fine_increments;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double var = ss / (n - 1);
  CHECK(var >= 0.0099);
  CHECK(var <= 0.0101);
  CHECK(std::abs(mean) <= 4.0 * std::sqrt(0.01 / n));
}

TEST_CASE("generate: standardized increments pass Kolmogorov-Smirnov at 1e-3") {
  const std::size_t n = 100000;
  const auto grid = generate(99, 3, 1.0, n);
  std::vector<double> z(grid.fine_increments);
  const double scale = 1.0 / std::sqrt(grid.fine_dt());
  for (auto& v : z) v *= scale;
  std::sort(z.begin(), z.end());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double cdf = 0.5 * std::erfc(-z[i] / std::sqrt(2.0));
    d = std::max({d, cdf - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - cdf});
  }
  // asymptotic critical value sqrt(-ln(alpha/2)/2)/sqrt(n) for alpha = 1e-3
  const double critical = std::sqrt(-0.5 * std::log(0.5e-3)) / std::sqrt(static_cast<double>(n));
  CHECK(d < critical);
}

TEST_CASE("generate: domain errors") {
  CHECK_THROWS_AS(generate(1, 0, 1.0, 0), DomainError);
  CHECK_THROWS_AS(generate(1, 0, 0.0, 10), DomainError);
  CHECK_THROWS_AS(generate(1, 0, -1.0, 10), DomainError);
}

TEST_CASE("coarsen: definition, identity and associativity") {
  const std::vector<double> pair{0.25, -1.5};
  CHECK(coarsen(pair, 2) == std::vector<double>{0.25 + -1.5});

  const auto grid = generate(5, 1, 1.0, 1024);
  CHECK(coarsen(grid, 1) == grid.fine_increments);

  const auto twice = coarsen(coarsen(grid, 2), 2);
  const auto once = coarsen(grid, 4);
  REQUIRE(twice.size() == once.size());
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i] == once[i]);

  const auto by8 = coarsen(grid, 8);
  const auto chained = coarsen(coarsen(coarsen(grid, 2), 2), 2);
  for (std::size_t j = 0; j < by8.size(); ++j) {
    double sum = 0.0;
    for (std::size_t i = 8 * j; i < 8 * j + 8; ++i) sum += grid.fine_increments[i];
    CHECK(by8[j] == doctest::Approx(sum).epsilon(1e-13));
    CHECK(by8[j] == chained[j]);
  }

  // odd factors sum left to right
  const auto g3 = generate(5, 2, 1.0, 96);
  const auto by3 = coarsen(g3, 3);
  for (std::size_t j = 0; j < by3.size(); ++j) {
    const auto& f = g3.fine_increments;
    CHECK(by3[j] == (f[3 * j] + f[3 * j + 1]) + f[3 * j + 2]);
  }
  const auto by12 = coarsen(g3, 12);
  const auto by3then4 = coarsen(by3, 4);
  for (std::size_t j = 0; j < by12.size(); ++j) CHECK(by12[j] == by3then4[j]);

  CHECK_THROWS_AS(coarsen(grid, 3), DomainError);
  CHECK_THROWS_AS(coarsen(grid, 0), DomainError);
  CHECK_THROWS_AS(grid.level(3), DomainError);
  const auto level = grid.level(16);
  CHECK(level.steps == 64);
  CHECK(level.dt == doctest::Approx(1.0 / 64));
}

TEST_CASE("moment_check targets") {
  const auto grid = generate(7, 0, 1.0, 1000000);
  const auto report = moment_check(grid);
  const double dt = grid.fine_dt();
  CHECK(report.second.target == dt);
  CHECK(report.fourth.target == doctest::Approx(3 * dt * dt));
  CHECK(report.centered_square.target == doctest::Approx(2 * dt * dt));
  CHECK(report.sixth.target == doctest::Approx(15 * dt * dt * dt));
  CHECK(report.second.z_score() <= 3.0);
  CHECK(report.fourth.z_score() <= 3.0);
  CHECK(report.centered_square.z_score() <= 3.0);
  CHECK(report.sixth.z_score() <= 3.0);

  CHECK_THROWS_AS(moment_check(generate(7, 0, 1.0, 9999)), ContractViolation);
}

TEST_CASE("binary dump is little-endian and reloads bitwise") {
  const auto path = std::filesystem::temp_directory_path() / "theta_milstein_noise_test.bin";
  const auto grid = generate(0x0102030405060708ULL, 9, 2.5, 333);
  save_noise(grid, path.string());

  std::ifstream in(path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  REQUIRE(bytes.size() == 8 + 4 * 8 + 333 * 8);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "TMNOISE1");
  CHECK(bytes[8] == 0x08);
  CHECK(bytes[15] == 0x01);
  CHECK(bytes[16] == 9);

  const auto back = load_noise(path.string());
  CHECK(back.seed == grid.seed);
  CHECK(back.path_index == 9);
  CHECK(back.fine_steps == 333);
  CHECK(back.t_end == 2.5);
  CHECK(back.fine_increments == grid.fine_increments);

  {
    // count field claims far more data than the file holds
    std::fstream patch(path, std::ios::binary | std::ios::in | std::ios::out);
    patch.seekp(24);
    const char huge[8] = {0, 0, 0, 0, 0, 0, 0, 0x10};
    patch.write(huge, 8);
  }
  CHECK_THROWS_AS(load_noise(path.string()), IoError);
  save_noise(grid, path.string());
  std::filesystem::resize_file(path, 100);
  CHECK_THROWS_AS(load_noise(path.string()), IoError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_noise(path.string()), IoError);
}
