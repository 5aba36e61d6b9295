// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#include "cca/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cca {

bool GradCheckReport::passed() const {
  return !entries.empty() &&
         std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass; });
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.finite ? e.max_rel_error : INFINITY);
  return m;
}

double gradient_error(double analytic, double numeric) {
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const std::function<double()>& loss, std::span<const GradTarget> targets,
                           double tolerance, double step) {
  GradCheckReport report;
  report.tolerance = tolerance;
  for (const auto& target : targets) {
    if (target.values.size() != target.analytic.size()) {
      throw std::invalid_argument("grad_check: '" + target.name +
                                  "' has mismatched value and gradient lengths");
    }
    GradCheckEntry entry{target.name, target.values.size()};
    for (std::size_t i = 0; i < target.values.size(); ++i) {
      double& v = target.values[i];
      const double saved = v;
      v = saved + step;
      const double up = loss();
      v = saved - step;
      const double down = loss();
      v = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = target.analytic[i];
      if (!std::isfinite(numeric) || !std::isfinite(analytic)) {
        entry.finite = false;
        entry.worst_index = i;
        break;
      }
      const double err = gradient_error(analytic, numeric);
      if (err > entry.max_rel_error) {
        entry.max_rel_error = err;
        entry.worst_index = i;
      }
    }
    entry.pass = entry.finite && entry.max_rel_error <= tolerance;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace cca
