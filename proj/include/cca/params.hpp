// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Helpers over parameter containers. A container exposes
//   visit(f) / visit(f) const
// calling f(name, span) once per parameter array in a fixed order. Gradient
// containers are instances of the same type, so the two orders line up.

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cca {

template <typename Scalar>
struct NamedSpan {
  std::string name;
  std::span<Scalar> values;
};

template <typename Scalar, typename P>
std::vector<NamedSpan<Scalar>> parameter_spans(P& params) {
  std::vector<NamedSpan<Scalar>> out;
  params.visit([&](const std::string& name, std::span<Scalar> v) { out.push_back({name, v}); });
  return out;
}

template <typename Scalar, typename P>
std::vector<NamedSpan<const Scalar>> parameter_spans(const P& params) {
  std::vector<NamedSpan<const Scalar>> out;
  params.visit(
      [&](const std::string& name, std::span<const Scalar> v) { out.push_back({name, v}); });
  return out;
}

/// Counts scalars by walking the container.
template <typename Scalar, typename P>
std::size_t enumerate_parameters(const P& params) {
  std::size_t total = 0;
  params.visit([&](const std::string&, std::span<const Scalar> v) { total += v.size(); });
  return total;
}

template <typename Scalar, typename P>
P zeros_like_params(const P& params) {
  P out = params;
  out.visit([](const std::string&, std::span<Scalar> v) { std::fill(v.begin(), v.end(), Scalar(0)); });
  return out;
}

template <typename Scalar, typename P>
void scale_params(P& params, Scalar factor) {
  params.visit([&](const std::string&, std::span<Scalar> v) {
    for (auto& x : v) x *= factor;
  });
}

/// dst += alpha * src, elementwise over matching containers.
template <typename Scalar, typename P>
void axpy_params(P& dst, const P& src, Scalar alpha) {
  auto d = parameter_spans<Scalar>(dst);
  auto s = parameter_spans<Scalar>(src);
  if (d.size() != s.size()) throw std::invalid_argument("axpy_params: container layouts differ");
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i].values.size() != s[i].values.size()) {
      throw std::invalid_argument("axpy_params: '" + d[i].name + "' sizes differ");
    }
    for (std::size_t j = 0; j < d[i].values.size(); ++j) d[i].values[j] += alpha * s[i].values[j];
  }
}

}  // namespace cca
