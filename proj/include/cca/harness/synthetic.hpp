// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cca/harness/run_config.hpp"
#include "cca/ops.hpp"

#include <vector>

namespace cca::harness {

struct Patch {
  Position top_left;
  std::size_t side = 0;

  Position center() const { return {top_left.x + side / 2, top_left.y + side / 2}; }
  bool contains(std::size_t x, std::size_t y) const {
    return x >= top_left.x && x < top_left.x + side && y >= top_left.y && y < top_left.y + side;
  }
};

/// Gaussian background noise with square patches raised by `amplitude` on
/// every channel. The mask is 1 exactly on patch pixels.
template <typename Scalar>
struct SyntheticScene {
  Tensor<Scalar> features;  // 1 x C x size x size
  Tensor<Scalar> mask;      // 1 x 1 x size x size
  std::vector<Patch> patches;
};

/// Patches are placed fully inside the frame without touching each other.
template <typename Scalar>
SyntheticScene<Scalar> make_scene(std::size_t channels, const DemoConfig& config,
                                  std::uint64_t seed);

std::size_t chebyshev(Position a, Position b);

}  // namespace cca::harness
