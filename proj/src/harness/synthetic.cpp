// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#include "cca/harness/synthetic.hpp"

#include "cca/random.hpp"

#include <algorithm>

namespace cca::harness {

std::size_t chebyshev(Position a, Position b) {
  const auto d = [](std::size_t u, std::size_t v) { return u > v ? u - v : v - u; };
  return std::max(d(a.x, b.x), d(a.y, b.y));
}

namespace {

bool separated(const Patch& a, const Patch& b) {
  // at least one background pixel between the squares
  return a.top_left.x + a.side < b.top_left.x || b.top_left.x + b.side < a.top_left.x ||
         a.top_left.y + a.side < b.top_left.y || b.top_left.y + b.side < a.top_left.y;
}

}  // namespace

template <typename Scalar>
SyntheticScene<Scalar> make_scene(std::size_t channels, const DemoConfig& config,
                                  std::uint64_t seed) {
  if (config.patch_side == 0 || config.patch_side > config.size) {
    throw std::invalid_argument("synthetic scene: patch side must be in [1, size]");
  }
  Rng rng(seed);
  SyntheticScene<Scalar> scene;
  const std::size_t n = config.size;
  scene.features = Tensor<Scalar>({1, channels, n, n});
  scene.mask = Tensor<Scalar>({1, 1, n, n});
  rng.fill_normal(scene.features.data(), config.noise);

  const std::size_t span = n - config.patch_side + 1;
  constexpr int kMaxTries = 10000;
  for (int tries = 0; scene.patches.size() < config.patches; ++tries) {
    if (tries == kMaxTries) throw std::invalid_argument("synthetic scene: patches do not fit");
    const Patch candidate{{std::size_t(rng.index(span)), std::size_t(rng.index(span))},
                          config.patch_side};
    if (std::all_of(scene.patches.begin(), scene.patches.end(),
                    [&](const Patch& p) { return separated(p, candidate); })) {
      scene.patches.push_back(candidate);
    }
  }

  for (const auto& p : scene.patches) {
    for (std::size_t y = p.top_left.y; y < p.top_left.y + p.side; ++y) {
      for (std::size_t x = p.top_left.x; x < p.top_left.x + p.side; ++x) {
        scene.mask(0, 0, y, x) = Scalar(1);
        for (std::size_t c = 0; c < channels; ++c)
          scene.features(0, c, y, x) += Scalar(config.amplitude);
      }
    }
  }
  return scene;
}

template SyntheticScene<float> make_scene<float>(std::size_t, const DemoConfig&, std::uint64_t);
template SyntheticScene<double> make_scene<double>(std::size_t, const DemoConfig&, std::uint64_t);

}  // namespace cca::harness
