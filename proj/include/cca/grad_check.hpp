// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cca {

/// One differentiable input: live storage the loss closure reads, plus the
/// analytic gradient to compare against.
struct GradTarget {
  std::string name;
  std::span<double> values;
  std::span<const double> analytic;
};

struct GradCheckEntry {
  std::string name;
  std::size_t count = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  bool finite = true;
  bool pass = true;
};

struct GradCheckReport {
  double tolerance = 0.0;
  std::vector<GradCheckEntry> entries;

  bool passed() const;
  double max_rel_error() const;
};

/// |analytic - numeric| / max(1, |analytic|, |numeric|). The floor of 1 turns
/// the measure absolute for gradients whose magnitude is below one, where a
/// pure ratio amplifies finite-difference truncation noise.
double gradient_error(double analytic, double numeric);

/// Central differences with step `step` on every element of every target.
/// Storage is restored after each probe.
GradCheckReport grad_check(const std::function<double()>& loss, std::span<const GradTarget> targets,
                           double tolerance, double step = 1e-4);

}  // namespace cca
