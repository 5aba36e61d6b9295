// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cca/cca_block.hpp"
#include "cca/grad_check.hpp"

#include <string>
#include <vector>

namespace cca::harness {

struct StageCheck {
  std::string stage;
  GradCheckReport report;
};

struct GradcheckSuiteResult {
  std::vector<StageCheck> stages;
  std::vector<std::string> missing;  // required stages that did not run

  bool passed() const;
};

/// Every stage the suite must cover; a missing entry fails the suite.
const std::vector<std::string>& required_gradcheck_stages();

/// Smallest gap between the largest and second-largest value over all
/// (batch, channel) planes. Infinite for single-pixel planes.
double argmax_margin(const Tensor<double>& maps);

/// Runs central-difference checks (64-bit, step 1e-4) on every kernel and on
/// the full block built from `config`. The full-block check uses a
/// 1 x c_in x 8 x 8 input whose score maps have unique maxima.
GradcheckSuiteResult run_gradcheck_suite(const CcaConfig& config, std::uint64_t seed,
                                         double tolerance);

}  // namespace cca::harness
