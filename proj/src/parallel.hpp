// Copyright 2026 The theta-milstein Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace theta_milstein::detail {

// Paths are grouped into fixed blocks; results are merged in block order, so
// the worker count never changes a floating-point result.
inline constexpr std::size_t kPathsPerBlock = 64;

inline std::size_t block_count(std::size_t paths) { return (paths + kPathsPerBlock - 1) / kPathsPerBlock; }

// Runs fn(block) for every block. The exception of the lowest failing block
// is rethrown after all workers finish.
template <class Fn>
void for_each_block(std::size_t blocks, int workers, Fn&& fn) {
  std::vector<std::exception_ptr> errors(blocks);
  std::atomic<std::size_t> next{0};
  auto drain = [&] {
    for (std::size_t b = next++; b < blocks; b = next++) {
      try {
        fn(b);
      } catch (...) {
        errors[b] = std::current_exception();
      }
    }
  };

  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), blocks);
  if (threads <= 1) {
    drain();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads - 1);
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(drain);
    drain();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Welford accumulator with an order-dependent (hence deterministic) merge.
struct RunningMoments {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    count += 1.0;
    const double delta = x - mean;
    mean += delta / count;
    m2 += delta * (x - mean);
  }

  void merge(const RunningMoments& other) {
    if (other.count == 0.0) return;
    if (count == 0.0) {
      *this = other;
      return;
    }
    const double total = count + other.count;
    const double delta = other.mean - mean;
    mean += delta * other.count / total;
    m2 += other.m2 + delta * delta * count * other.count / total;
    count = total;
  }

  double variance() const { return count > 1.0 ? m2 / (count - 1.0) : 0.0; }
  double standard_error() const { return count > 0.0 ? std::sqrt(variance() / count) : 0.0; }
};

}  // namespace theta_milstein::detail
