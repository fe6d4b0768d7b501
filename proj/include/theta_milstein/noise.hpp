// Copyright 2026 The theta-milstein Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace theta_milstein {

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Random-access stream keyed by (seed, stream). Draw `i` depends only on
/// (seed, stream, i), never on what was drawn before it.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  /// Two uniforms in (0, 1) from block `block`.
  std::pair<double, double> uniform_pair(std::uint64_t block) const;
  /// Two independent standard normals from block `block` (Box-Muller).
  std::pair<double, double> normal_pair(std::uint64_t block) const;
  double normal(std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

/// Brownian increments for one path on the finest grid. Coarser grids are
/// always obtained by `coarsen`, never resampled.
struct NoiseGrid {
  struct Level {
    double dt = 0.0;
    std::size_t steps = 0;
  };

  double t_end = 0.0;
  std::size_t fine_steps = 0;
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;
  std::vector<double> fine_increments;

  double fine_dt() const { return t_end / static_cast<double>(fine_steps); }
  /// Level obtained by aggregating `factor` fine increments. Throws DomainError
  /// if `factor` does not divide `fine_steps`.
  Level level(std::size_t factor) const;
};

NoiseGrid generate(std::uint64_t seed, std::uint64_t path_index, double t_end, std::size_t fine_steps);

/// coarse[j] = fine[j*factor] + ... + fine[(j+1)*factor - 1]. With factor = 2^m * r,
/// r odd, runs of r are summed left to right and the results are then added in
/// pairs m times. The order is fixed, so output is bitwise reproducible.
std::vector<double> coarsen(std::span<const double> fine, std::size_t factor);
std::vector<double> coarsen(const NoiseGrid& grid, std::size_t factor);

struct MomentEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
  double target = 0.0;

  /// |estimate - target| in units of the standard error.
  double z_score() const;
};

struct MomentReport {
  double dt = 0.0;
  std::size_t count = 0;
  MomentEstimate second;           // E|dw|^2       -> dt
  MomentEstimate fourth;           // E|dw|^4       -> 3 dt^2
  MomentEstimate centered_square;  // E(|dw|^2-dt)^2 -> 2 dt^2
  MomentEstimate sixth;            // E|dw|^6       -> 15 dt^3
};

/// Requires at least 10^4 increments.
MomentReport moment_check(const NoiseGrid& grid);

/// Little-endian dump: 8-byte magic "TMNOISE1", u64 seed, u64 path_index,
/// u64 fine_steps, f64 t_end, then fine_steps f64 increments.
void save_noise(const NoiseGrid& grid, const std::string& path);
NoiseGrid load_noise(const std::string& path);

}  // namespace theta_milstein
