// Copyright 2026 The theta-milstein Authors
// SPDX-License-Identifier: Apache-2.0

#include "theta_milstein/noise.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>

#include "theta_milstein/errors.hpp"

namespace theta_milstein {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85;

constexpr char kMagic[8] = {'T', 'M', 'N', 'O', 'I', 'S', 'E', '1'};

// 53 random bits mapped to the open interval (0, 1).
double to_unit_open(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32 | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw IoError("truncated noise file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = v << 8 | bytes[i];
  return v;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

std::pair<double, double> CounterRng::uniform_pair(std::uint64_t block) const {
  const auto r = philox4x32(
      {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
       static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
      {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
  return {to_unit_open(r[0], r[1]), to_unit_open(r[2], r[3])};
}

std::pair<double, double> CounterRng::normal_pair(std::uint64_t block) const {
  const auto [u1, u2] = uniform_pair(block);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

double CounterRng::normal(std::uint64_t index) const {
  const auto pair = normal_pair(index / 2);
  return index % 2 == 0 ? pair.first : pair.second;
}

NoiseGrid::Level NoiseGrid::level(std::size_t factor) const {
  if (factor == 0 || fine_steps % factor != 0) {
    throw DomainError("coarsening factor " + std::to_string(factor) + " does not divide " +
                      std::to_string(fine_steps) + " fine steps");
  }
  return {fine_dt() * static_cast<double>(factor), fine_steps / factor};
}

NoiseGrid generate(std::uint64_t seed, std::uint64_t path_index, double t_end, std::size_t fine_steps) {
  if (fine_steps == 0) throw DomainError("fine_steps must be at least 1");
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw DomainError("t_end must be positive and finite");

  NoiseGrid grid;
  grid.t_end = t_end;
  grid.fine_steps = fine_steps;
  grid.seed = seed;
  grid.path_index = path_index;
  grid.fine_increments.resize(fine_steps);

  const CounterRng rng(seed, path_index);
  const double scale = std::sqrt(grid.fine_dt());
  for (std::size_t block = 0; 2 * block < fine_steps; ++block) {
    const auto [a, b] = rng.normal_pair(block);
    grid.fine_increments[2 * block] = scale * a;
    if (2 * block + 1 < fine_steps) grid.fine_increments[2 * block + 1] = scale * b;
  }
  return grid;
}

std::vector<double> coarsen(std::span<const double> fine, std::size_t factor) {
  if (factor == 0 || fine.size() % factor != 0) {
    throw DomainError("coarsening factor " + std::to_string(factor) + " does not divide " +
                      std::to_string(fine.size()) + " increments");
  }
  // Odd part left to right, then pairwise halving for each factor of two.
  // Floating-point addition is not associative, so this split is what makes
  // coarsen(coarsen(g, 2^a), 2^b) == coarsen(g, 2^(a+b)) hold bitwise.
  std::size_t odd = factor;
  while (odd % 2 == 0) odd /= 2;
  std::vector<double> coarse(fine.size() / odd);
  for (std::size_t j = 0; j < coarse.size(); ++j) {
    double sum = 0.0;
    for (std::size_t i = j * odd; i < (j + 1) * odd; ++i) sum += fine[i];
    coarse[j] = sum;
  }
  for (std::size_t f = odd; f < factor; f *= 2) {
    for (std::size_t j = 0; 2 * j < coarse.size(); ++j) coarse[j] = coarse[2 * j] + coarse[2 * j + 1];
    coarse.resize(coarse.size() / 2);
  }
  return coarse;
}

std::vector<double> coarsen(const NoiseGrid& grid, std::size_t factor) {
  return coarsen(std::span<const double>(grid.fine_increments), factor);
}

double MomentEstimate::z_score() const {
  return standard_error > 0.0 ? std::abs(estimate - target) / standard_error
                              : (estimate == target ? 0.0 : std::numeric_limits<double>::infinity());
}

MomentReport moment_check(const NoiseGrid& grid) {
  const auto& dw = grid.fine_increments;
  if (dw.size() < 10000) throw ContractViolation("moment_check needs at least 10^4 increments");

  const double dt = grid.fine_dt();
  const auto n = static_cast<double>(dw.size());

  auto estimate = [&](auto&& sample, double target) {
    // two passes keep the variance free of cancellation
    double sum = 0.0;
    for (double x : dw) sum += sample(x);
    const double mean = sum / n;
    double ss = 0.0;
    for (double x : dw) {
      const double d = sample(x) - mean;
      ss += d * d;
    }
    return MomentEstimate{mean, std::sqrt(ss / (n - 1.0) / n), target};
  };

  MomentReport report;
  report.dt = dt;
  report.count = dw.size();
  report.second = estimate([](double x) { return x * x; }, dt);
  report.fourth = estimate([](double x) { return x * x * x * x; }, 3.0 * dt * dt);
  report.centered_square = estimate(
      [dt](double x) {
        const double d = x * x - dt;
        return d * d;
      },
      2.0 * dt * dt);
  report.sixth = estimate([](double x) { return x * x * x * x * x * x; }, 15.0 * dt * dt * dt);
  return report;
}

void save_noise(const NoiseGrid& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kMagic, sizeof kMagic);
  put_u64(out, grid.seed);
  put_u64(out, grid.path_index);
  put_u64(out, grid.fine_steps);
  put_u64(out, std::bit_cast<std::uint64_t>(grid.t_end));
  for (double x : grid.fine_increments) put_u64(out, std::bit_cast<std::uint64_t>(x));
  if (!out) throw IoError("write failed for " + path);
}

NoiseGrid load_noise(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + 8, kMagic)) throw IoError(path + " is not a noise dump");

  NoiseGrid grid;
  grid.seed = get_u64(in);
  grid.path_index = get_u64(in);
  grid.fine_steps = get_u64(in);
  grid.t_end = std::bit_cast<double>(get_u64(in));
  // reject a corrupt count before allocating for it
  const auto header_end = in.tellg();
  in.seekg(0, std::ios::end);
  const auto payload = static_cast<std::uint64_t>(in.tellg() - header_end);
  in.seekg(header_end);
  if (payload / 8 != grid.fine_steps || payload % 8 != 0) {
    throw IoError(path + ": header announces " + std::to_string(grid.fine_steps) + " increments but the file holds " +
                  std::to_string(payload / 8));
  }
  grid.fine_increments.resize(grid.fine_steps);
  for (auto& x : grid.fine_increments) x = std::bit_cast<double>(get_u64(in));
  return grid;
}

}  // namespace theta_milstein
