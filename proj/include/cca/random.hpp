// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace cca {

/// Seeded generator. Every random quantity in the library is drawn from one
/// of these, and the mapping from engine output to reals is fixed here so
/// streams are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) { return engine_() % n; }

  template <typename Scalar>
  void fill_uniform(std::span<Scalar> out, double lo, double hi) {
    for (auto& v : out) v = static_cast<Scalar>(uniform(lo, hi));
  }
  template <typename Scalar>
  void fill_normal(std::span<Scalar> out, double stddev = 1.0) {
    for (auto& v : out) v = static_cast<Scalar>(stddev * normal());
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cca
