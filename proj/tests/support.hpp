// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cca/random.hpp"
#include "cca/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace cca::test {

template <typename Scalar>
Tensor<Scalar> random_tensor(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<Scalar> t(s);
  rng.fill_uniform(t.data(), lo, hi);
  return t;
}

template <typename Scalar>
Matrix<Scalar> random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double lo = -1.0,
                             double hi = 1.0) {
  Matrix<Scalar> m(r, c);
  rng.fill_uniform(std::span<Scalar>(m.data(), std::size_t(m.size())), lo, hi);
  return m;
}

template <typename Scalar>
Vector<Scalar> random_vector(Eigen::Index n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Vector<Scalar> v(n);
  rng.fill_uniform(std::span<Scalar>(v.data(), std::size_t(v.size())), lo, hi);
  return v;
}

inline std::size_t draw(Rng& rng, std::size_t lo, std::size_t hi) {  // inclusive
  return lo + std::size_t(rng.index(hi - lo + 1));
}

/// Largest |a - b| / max(1, |b|) over matching spans.
template <typename A, typename B>
double max_rel_error(const A& a, const B& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < std::size_t(a.size()); ++i) {
    const double x = double(a.data()[i]), y = double(b.data()[i]);
    worst = std::max(worst, std::abs(x - y) / std::max(1.0, std::abs(y)));
  }
  return worst;
}

/// Elementwise ==, so -0 and +0 compare equal.
template <typename A, typename B>
bool same_values(const A& a, const B& b) {
  if (std::size_t(a.size()) != std::size_t(b.size())) return false;
  for (std::size_t i = 0; i < std::size_t(a.size()); ++i)
    if (!(a.data()[i] == b.data()[i])) return false;
  return true;
}

}  // namespace cca::test
