// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Local context feature enhancement: three parallel 3x3 dilated convolutions
// whose outputs are blended by learned per-pixel softmax weights.
//
//   F_i = conv_{r_i}(f1)                         i = 1..3, padding r_i
//   (w_1, w_2, w_3) = split(softmax(mix(reduce(concat(F_1, F_2, F_3)))), 3)
//   f_lc = w_1 * F_1 + w_2 * F_2 + w_3 * F_3     w_i broadcast over channels

#include "cca/conv.hpp"

#include <array>

namespace cca {

inline constexpr std::size_t kLcfeBranches = 3;

struct LcfeConfig {
  std::size_t channels = 0;
  std::array<std::size_t, kLcfeBranches> rates{1, 2, 3};
  bool bias = true;
};

template <typename Scalar>
struct LcfeParams {
  std::array<ConvSpec<Scalar>, kLcfeBranches> branches;  // 3x3, C -> C, padding = rate
  ConvSpec<Scalar> reduce;                               // 1x1, 3C -> 3
  ConvSpec<Scalar> mix;                                  // 3x3, 3 -> 3, padding 1

  std::size_t channels() const { return branches[0].in_channels; }

  /// Throws ShapeError when the branch/fusion geometry is inconsistent.
  void validate() const;

  template <typename F>
  void visit(F&& f) {
    for (std::size_t i = 0; i < kLcfeBranches; ++i)
      branches[i].visit("lcfe.branch" + std::to_string(i), f);
    reduce.visit("lcfe.reduce", f);
    mix.visit("lcfe.mix", f);
  }
  template <typename F>
  void visit(F&& f) const {
    for (std::size_t i = 0; i < kLcfeBranches; ++i)
      branches[i].visit("lcfe.branch" + std::to_string(i), f);
    reduce.visit("lcfe.reduce", f);
    mix.visit("lcfe.mix", f);
  }
};

template <typename Scalar>
LcfeParams<Scalar> make_lcfe_params(const LcfeConfig& config, Rng& rng);

/// Intermediates kept for the backward pass.
template <typename Scalar>
struct LcfeTrace {
  std::array<Tensor<Scalar>, kLcfeBranches> branches;
  Tensor<Scalar> concat;   // 3C channels
  Tensor<Scalar> reduced;  // 3 channels
  Tensor<Scalar> mixed;    // 3 channels, softmax logits
  Tensor<Scalar> weights;  // 3 channels, softmax output
  Tensor<Scalar> output;
};

/// Per-pixel fusion weights for three equally shaped branch maps. The three
/// returned single-channel maps sum to one at every pixel.
template <typename Scalar>
std::array<Tensor<Scalar>, kLcfeBranches> fusion_weights(const Tensor<Scalar>& f1,
                                                         const Tensor<Scalar>& f2,
                                                         const Tensor<Scalar>& f3,
                                                         const LcfeParams<Scalar>& params);

/// sum_i w_i * F_i with each single-channel w_i broadcast across channels.
template <typename Scalar>
Tensor<Scalar> weighted_fusion(const std::array<Tensor<Scalar>, kLcfeBranches>& branches,
                               const Tensor<Scalar>& weights);

template <typename Scalar>
Tensor<Scalar> lcfe_forward(const Tensor<Scalar>& f1, const LcfeParams<Scalar>& params);

template <typename Scalar>
LcfeTrace<Scalar> lcfe_forward_traced(const Tensor<Scalar>& f1, const LcfeParams<Scalar>& params);

template <typename Scalar>
struct LcfeGrads {
  Tensor<Scalar> input;
  LcfeParams<Scalar> params;
};

template <typename Scalar>
LcfeGrads<Scalar> lcfe_backward(const Tensor<Scalar>& f1, const LcfeParams<Scalar>& params,
                                const LcfeTrace<Scalar>& trace, const Tensor<Scalar>& upstream);

}  // namespace cca
