// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Global context feature collection. A 1x1 convolution predicts n importance
// maps; each map's global maximum picks a key location, and the feature
// vector of f1 at that location is gated by sigmoid(max score).

#include "cca/conv.hpp"
#include "cca/ops.hpp"

#include <vector>

namespace cca {

struct GcfcConfig {
  std::size_t channels = 0;
  std::size_t n_keys = 4;
  bool bias = true;
};

template <typename Scalar>
struct GcfcParams {
  ConvSpec<Scalar> score;  // 1x1, C -> n

  std::size_t n_keys() const { return score.out_channels; }
  void validate() const;

  template <typename F>
  void visit(F&& f) {
    score.visit("gcfc.score", f);
  }
  template <typename F>
  void visit(F&& f) const {
    score.visit("gcfc.score", f);
  }
};

template <typename Scalar>
GcfcParams<Scalar> make_gcfc_params(const GcfcConfig& config, Rng& rng);

/// Key features for one batch element.
template <typename Scalar>
struct KeyFeatureSet {
  std::vector<Position> positions;  // one per importance map, map order
  std::vector<Scalar> raw_scores;
  Matrix<Scalar> features;  // n x C, gated

  std::size_t size() const { return positions.size(); }
};

/// Importance maps S_1..S_n stacked on the channel axis.
template <typename Scalar>
Tensor<Scalar> score_maps(const Tensor<Scalar>& f1, const GcfcParams<Scalar>& params);

/// Collects one key per score channel, independently per batch element.
template <typename Scalar>
std::vector<KeyFeatureSet<Scalar>> collect_keys(const Tensor<Scalar>& f1,
                                                const Tensor<Scalar>& scores);

template <typename Scalar>
std::vector<KeyFeatureSet<Scalar>> gcfc_forward(const Tensor<Scalar>& f1,
                                                const GcfcParams<Scalar>& params);

template <typename Scalar>
struct GcfcTrace {
  Tensor<Scalar> scores;
  MaxPoolResult<Scalar> pooled;
  std::vector<KeyFeatureSet<Scalar>> keys;
};

template <typename Scalar>
GcfcTrace<Scalar> gcfc_forward_traced(const Tensor<Scalar>& f1, const GcfcParams<Scalar>& params);

template <typename Scalar>
struct CollectGrads {
  Tensor<Scalar> features;  // gradient w.r.t. f1 through the gather
  Tensor<Scalar> scores;    // nonzero only at each map's argmax
};

/// Backward of collect_keys. `d_features[n]` is the n x C gradient of the
/// gated features of batch element n.
template <typename Scalar>
CollectGrads<Scalar> collect_keys_backward(const Tensor<Scalar>& f1, const Tensor<Scalar>& scores,
                                           const MaxPoolResult<Scalar>& pooled,
                                           std::span<const Matrix<Scalar>> d_features);

template <typename Scalar>
struct GcfcGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> scores;
  GcfcParams<Scalar> params;
};

template <typename Scalar>
GcfcGrads<Scalar> gcfc_backward(const Tensor<Scalar>& f1, const GcfcParams<Scalar>& params,
                                const GcfcTrace<Scalar>& trace,
                                std::span<const Matrix<Scalar>> d_features);

}  // namespace cca
