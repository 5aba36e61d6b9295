// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cca/cca_block.hpp"
#include "cca/det_metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cca::harness {

/// Raised for unparseable config text (unknown key, malformed value).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Synthetic training demo settings.
struct DemoConfig {
  std::size_t epochs = 200;
  double learning_rate = 0.5;
  std::size_t size = 16;        // square scene side, pixels
  std::size_t patches = 2;
  std::size_t patch_side = 3;
  double amplitude = 3.0;       // patch level above the background
  double noise = 0.5;           // background noise standard deviation
  std::size_t key_radius = 2;   // Chebyshev radius counted as "on a patch"
};

struct RunConfig {
  CcaConfig cca;
  std::uint64_t seed = 0;
  DType dtype = DType::f32;
  metrics::Interpolation interpolation = metrics::Interpolation::all_points;
  double gradcheck_tolerance = 1e-5;
  DemoConfig demo;
};

/// Flat `key = value` text, one entry per line; `#` starts a comment. Every
/// key is optional and unknown keys are rejected. See default_config_text().
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

/// A complete config document listing every key at its default value.
std::string default_config_text();

DType parse_dtype(std::string_view text);
std::string_view dtype_name(DType d);

}  // namespace cca::harness
