// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cca/random.hpp"
#include "cca/tensor.hpp"

#include <string_view>

namespace cca {

/// Geometry and parameters of a 2-D convolution.
///
/// Output extent along each axis is
///   floor((H + 2*padding - dilation*(k - 1) - 1) / stride) + 1
/// and must be at least 1. An empty bias means the layer has no bias term.
template <typename Scalar>
struct ConvSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 1, kernel_w = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t dilation = 1;
  Tensor<Scalar> weights;  // out x in x kh x kw
  Vector<Scalar> bias;     // out, or empty

  bool has_bias() const { return bias.size() != 0; }
  std::size_t kernel_volume() const { return in_channels * kernel_h * kernel_w; }
  std::size_t param_count() const { return weights.size() + std::size_t(bias.size()); }

  /// Output extents for an input of the given shape; throws ShapeError when
  /// the channel count disagrees or the output would be empty.
  Shape output_shape(const Shape& in) const;

  template <typename F>
  void visit(std::string_view prefix, F&& f) {
    f(std::string(prefix) + ".weight", weights.data());
    if (has_bias()) f(std::string(prefix) + ".bias", std::span<Scalar>(bias.data(), bias.size()));
  }
  template <typename F>
  void visit(std::string_view prefix, F&& f) const {
    f(std::string(prefix) + ".weight", weights.data());
    if (has_bias())
      f(std::string(prefix) + ".bias", std::span<const Scalar>(bias.data(), bias.size()));
  }
};

struct ConvGeometry {
  std::size_t in_channels, out_channels, kernel = 3, stride = 1, padding = 0, dilation = 1;
  bool bias = true;
};

/// Allocates a spec with weights and bias uniform in +-1/sqrt(fan_in).
template <typename Scalar>
ConvSpec<Scalar> make_conv(const ConvGeometry& g, Rng& rng);

/// Same geometry, all parameters zero. Used as a gradient accumulator.
template <typename Scalar>
ConvSpec<Scalar> zeros_like(const ConvSpec<Scalar>& spec);

/// Dilated 2-D convolution via im2col followed by a rank-1 update product.
/// Accumulation order matches the direct nested-loop definition term for term.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const ConvSpec<Scalar>& spec);

template <typename Scalar>
struct ConvGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> weights;
  Vector<Scalar> bias;
};

template <typename Scalar>
ConvGrads<Scalar> conv2d_backward(const Tensor<Scalar>& x, const ConvSpec<Scalar>& spec,
                                  const Tensor<Scalar>& upstream);

/// Adds the weight/bias gradients of `grads` into the accumulator spec.
template <typename Scalar>
void accumulate(ConvSpec<Scalar>& acc, const ConvGrads<Scalar>& grads);

}  // namespace cca
