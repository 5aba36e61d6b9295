// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#include "cca/gcfc.hpp"

#include "cca/params.hpp"

namespace cca {

template <typename Scalar>
void GcfcParams<Scalar>::validate() const {
  if (score.kernel_h != 1 || score.kernel_w != 1 || score.stride != 1 || score.padding != 0) {
    throw ShapeError("gcfc: score layer must be a 1x1 convolution");
  }
}

template <typename Scalar>
GcfcParams<Scalar> make_gcfc_params(const GcfcConfig& config, Rng& rng) {
  GcfcParams<Scalar> p;
  p.score = make_conv<Scalar>({config.channels, config.n_keys, 1, 1, 0, 1, config.bias}, rng);
  p.validate();
  return p;
}

template <typename Scalar>
Tensor<Scalar> score_maps(const Tensor<Scalar>& f1, const GcfcParams<Scalar>& params) {
  params.validate();
  return conv2d(f1, params.score);
}

namespace {

template <typename Scalar>
void require_compatible(const Tensor<Scalar>& f1, const Tensor<Scalar>& scores) {
  const Shape a = f1.shape(), b = scores.shape();
  if (a.n != b.n || a.h != b.h || a.w != b.w) {
    throw ShapeError("gcfc: score maps " + to_string(b) + " do not align with features " +
                     to_string(a));
  }
}

template <typename Scalar>
std::vector<KeyFeatureSet<Scalar>> gather(const Tensor<Scalar>& f1,
                                          const MaxPoolResult<Scalar>& pooled) {
  const Shape s = f1.shape();
  std::vector<KeyFeatureSet<Scalar>> out(s.n);
  for (std::size_t n = 0; n < s.n; ++n) {
    auto& set = out[n];
    set.features.resize(Eigen::Index(pooled.channels), Eigen::Index(s.c));
    for (std::size_t k = 0; k < pooled.channels; ++k) {
      const Position p = pooled.position(n, k);
      const Scalar score = pooled.score(n, k);
      const Scalar gate = logistic(score);
      set.positions.push_back(p);
      set.raw_scores.push_back(score);
      for (std::size_t c = 0; c < s.c; ++c)
        set.features(Eigen::Index(k), Eigen::Index(c)) = f1(n, c, p.y, p.x) * gate;
    }
  }
  return out;
}

}  // namespace

template <typename Scalar>
std::vector<KeyFeatureSet<Scalar>> collect_keys(const Tensor<Scalar>& f1,
                                                const Tensor<Scalar>& scores) {
  require_compatible(f1, scores);
  return gather(f1, global_max_pool_argmax(scores));
}

template <typename Scalar>
GcfcTrace<Scalar> gcfc_forward_traced(const Tensor<Scalar>& f1, const GcfcParams<Scalar>& params) {
  GcfcTrace<Scalar> t;
  t.scores = score_maps(f1, params);
  t.pooled = global_max_pool_argmax(t.scores);
  t.keys = gather(f1, t.pooled);
  return t;
}

template <typename Scalar>
std::vector<KeyFeatureSet<Scalar>> gcfc_forward(const Tensor<Scalar>& f1,
                                                const GcfcParams<Scalar>& params) {
  return gcfc_forward_traced(f1, params).keys;
}

template <typename Scalar>
CollectGrads<Scalar> collect_keys_backward(const Tensor<Scalar>& f1, const Tensor<Scalar>& scores,
                                           const MaxPoolResult<Scalar>& pooled,
                                           std::span<const Matrix<Scalar>> d_features) {
  require_compatible(f1, scores);
  const Shape s = f1.shape();
  if (d_features.size() != s.n) {
    throw ShapeError("gcfc_backward: expected one feature gradient per batch element");
  }
  CollectGrads<Scalar> g{Tensor<Scalar>(s), Tensor<Scalar>()};
  std::vector<Scalar> d_score(s.n * pooled.channels, Scalar(0));
  for (std::size_t n = 0; n < s.n; ++n) {
    const auto& d = d_features[n];
    if (std::size_t(d.rows()) != pooled.channels || std::size_t(d.cols()) != s.c) {
      throw ShapeError("gcfc_backward: feature gradient has wrong extents");
    }
    for (std::size_t k = 0; k < pooled.channels; ++k) {
      const Position p = pooled.position(n, k);
      const Scalar gate = logistic(pooled.score(n, k));
      Scalar dot = 0;
      for (std::size_t c = 0; c < s.c; ++c) {
        const Scalar up = d(Eigen::Index(k), Eigen::Index(c));
        g.features(n, c, p.y, p.x) += up * gate;
        dot += up * f1(n, c, p.y, p.x);
      }
      d_score[n * pooled.channels + k] = dot * gate * (Scalar(1) - gate);
    }
  }
  g.scores = global_max_pool_backward<Scalar>(scores.shape(), pooled, d_score);
  return g;
}

template <typename Scalar>
GcfcGrads<Scalar> gcfc_backward(const Tensor<Scalar>& f1, const GcfcParams<Scalar>& params,
                                const GcfcTrace<Scalar>& trace,
                                std::span<const Matrix<Scalar>> d_features) {
  auto collected = collect_keys_backward(f1, trace.scores, trace.pooled, d_features);
  GcfcGrads<Scalar> g{std::move(collected.features), std::move(collected.scores),
                      zeros_like_params<Scalar>(params)};
  const auto conv_g = conv2d_backward(f1, params.score, g.scores);
  accumulate(g.params.score, conv_g);
  g.input = add(g.input, conv_g.input);
  return g;
}

#define CCA_INSTANTIATE(S)                                                                      \
  template struct GcfcParams<S>;                                                                \
  template GcfcParams<S> make_gcfc_params<S>(const GcfcConfig&, Rng&);                          \
  template Tensor<S> score_maps<S>(const Tensor<S>&, const GcfcParams<S>&);                     \
  template std::vector<KeyFeatureSet<S>> collect_keys<S>(const Tensor<S>&, const Tensor<S>&);   \
  template std::vector<KeyFeatureSet<S>> gcfc_forward<S>(const Tensor<S>&, const GcfcParams<S>&); \
  template GcfcTrace<S> gcfc_forward_traced<S>(const Tensor<S>&, const GcfcParams<S>&);         \
  template CollectGrads<S> collect_keys_backward<S>(const Tensor<S>&, const Tensor<S>&,         \
                                                    const MaxPoolResult<S>&,                    \
                                                    std::span<const Matrix<S>>);                \
  template GcfcGrads<S> gcfc_backward<S>(const Tensor<S>&, const GcfcParams<S>&,                \
                                         const GcfcTrace<S>&, std::span<const Matrix<S>>);
CCA_INSTANTIATE(float)
CCA_INSTANTIATE(double)
#undef CCA_INSTANTIATE

}  // namespace cca
