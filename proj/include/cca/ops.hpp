// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cca/tensor.hpp"

#include <cmath>
#include <initializer_list>
#include <vector>

namespace cca {

// Elementwise arithmetic. Binary ops require identical extents.
template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b);
template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b);
template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar factor);

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x);
/// Gradient of sigmoid given its forward output.
template <typename Scalar>
Tensor<Scalar> sigmoid_backward(const Tensor<Scalar>& y, const Tensor<Scalar>& upstream);

/// Scalar logistic function.
template <typename Scalar>
Scalar logistic(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

/// Per-pixel softmax across the channel axis (max-subtracted).
template <typename Scalar>
Tensor<Scalar> softmax_channels(const Tensor<Scalar>& x);
/// Gradient of softmax_channels given its forward output.
template <typename Scalar>
Tensor<Scalar> softmax_channels_backward(const Tensor<Scalar>& y, const Tensor<Scalar>& upstream);

template <typename Scalar>
Tensor<Scalar> concat_channels(std::span<const Tensor<Scalar>> xs);
template <typename Scalar>
Tensor<Scalar> concat_channels(std::initializer_list<Tensor<Scalar>> xs) {
  return concat_channels(std::span<const Tensor<Scalar>>(xs.begin(), xs.size()));
}
template <typename Scalar>
std::vector<Tensor<Scalar>> split_channels(const Tensor<Scalar>& x, std::size_t groups);

/// Feature-map index-space coordinate.
struct Position {
  std::size_t x = 0, y = 0;
  friend bool operator==(const Position&, const Position&) = default;
};

/// Per (batch, channel) global maximum and where it occurs.
template <typename Scalar>
struct MaxPoolResult {
  std::size_t batch = 0, channels = 0;
  std::vector<Scalar> scores;       // batch * channels, row-major
  std::vector<Position> positions;  // batch * channels, row-major

  Scalar score(std::size_t n, std::size_t c) const { return scores[n * channels + c]; }
  Position position(std::size_t n, std::size_t c) const { return positions[n * channels + c]; }
};

/// Ties resolve to the smallest row-major index.
template <typename Scalar>
MaxPoolResult<Scalar> global_max_pool_argmax(const Tensor<Scalar>& x);

/// Routes each score gradient to its argmax element; everything else is zero.
template <typename Scalar>
Tensor<Scalar> global_max_pool_backward(const Shape& input, const MaxPoolResult<Scalar>& pooled,
                                        std::span<const Scalar> score_grads);

}  // namespace cca
