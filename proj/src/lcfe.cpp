// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#include "cca/lcfe.hpp"

#include "cca/ops.hpp"
#include "cca/params.hpp"

namespace cca {

template <typename Scalar>
void LcfeParams<Scalar>::validate() const {
  const auto& b0 = branches[0];
  for (const auto& b : branches) {
    if (b.in_channels != b0.in_channels || b.out_channels != b0.in_channels ||
        b.kernel_h != 3 || b.kernel_w != 3 || b.stride != 1 || b.padding != b.dilation) {
      throw ShapeError("lcfe: branch convolutions must be 3x3, C->C, stride 1, padding = rate");
    }
  }
  if (reduce.in_channels != kLcfeBranches * b0.in_channels ||
      reduce.out_channels != kLcfeBranches || reduce.kernel_h != 1 || reduce.kernel_w != 1) {
    throw ShapeError("lcfe: reduce must be a 1x1 convolution 3C -> 3");
  }
  if (mix.in_channels != kLcfeBranches || mix.out_channels != kLcfeBranches ||
      mix.kernel_h != 3 || mix.padding != 1 || mix.stride != 1) {
    throw ShapeError("lcfe: mix must be a shape-preserving 3x3 convolution 3 -> 3");
  }
}

template <typename Scalar>
LcfeParams<Scalar> make_lcfe_params(const LcfeConfig& config, Rng& rng) {
  LcfeParams<Scalar> p;
  for (std::size_t i = 0; i < kLcfeBranches; ++i) {
    const std::size_t r = config.rates[i];
    p.branches[i] = make_conv<Scalar>(
        {config.channels, config.channels, 3, 1, r, r, config.bias}, rng);
  }
  p.reduce = make_conv<Scalar>(
      {kLcfeBranches * config.channels, kLcfeBranches, 1, 1, 0, 1, config.bias}, rng);
  p.mix = make_conv<Scalar>({kLcfeBranches, kLcfeBranches, 3, 1, 1, 1, config.bias}, rng);
  p.validate();
  return p;
}

namespace {

template <typename Scalar>
struct FusionStages {
  Tensor<Scalar> concat, reduced, mixed, weights;
};

template <typename Scalar>
FusionStages<Scalar> fusion_stages(const std::array<Tensor<Scalar>, kLcfeBranches>& branches,
                                   const LcfeParams<Scalar>& params) {
  FusionStages<Scalar> s;
  s.concat = concat_channels<Scalar>(branches);
  s.reduced = conv2d(s.concat, params.reduce);
  s.mixed = conv2d(s.reduced, params.mix);
  s.weights = softmax_channels(s.mixed);
  return s;
}

template <typename Scalar>
void require_branch_shapes(const std::array<Tensor<Scalar>, kLcfeBranches>& branches) {
  for (const auto& b : branches) {
    if (b.shape() != branches[0].shape()) {
      throw ShapeError("lcfe: branch maps " + to_string(branches[0].shape()) + " and " +
                       to_string(b.shape()) + " differ");
    }
  }
}

}  // namespace

template <typename Scalar>
std::array<Tensor<Scalar>, kLcfeBranches> fusion_weights(const Tensor<Scalar>& f1,
                                                         const Tensor<Scalar>& f2,
                                                         const Tensor<Scalar>& f3,
                                                         const LcfeParams<Scalar>& params) {
  const std::array<Tensor<Scalar>, kLcfeBranches> branches{f1, f2, f3};
  require_branch_shapes(branches);
  auto parts = split_channels(fusion_stages(branches, params).weights, kLcfeBranches);
  return {std::move(parts[0]), std::move(parts[1]), std::move(parts[2])};
}

template <typename Scalar>
Tensor<Scalar> weighted_fusion(const std::array<Tensor<Scalar>, kLcfeBranches>& branches,
                               const Tensor<Scalar>& weights) {
  require_branch_shapes(branches);
  const Shape s = branches[0].shape();
  if (weights.shape() != Shape{s.n, kLcfeBranches, s.h, s.w}) {
    throw ShapeError("lcfe: weight map " + to_string(weights.shape()) +
                     " does not match branches " + to_string(s));
  }
  Tensor<Scalar> out(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < s.h; ++y) {
        for (std::size_t x = 0; x < s.w; ++x) {
          Scalar acc = 0;
          for (std::size_t i = 0; i < kLcfeBranches; ++i)
            acc += weights(n, i, y, x) * branches[i](n, c, y, x);
          out(n, c, y, x) = acc;
        }
      }
    }
  }
  return out;
}

template <typename Scalar>
LcfeTrace<Scalar> lcfe_forward_traced(const Tensor<Scalar>& f1, const LcfeParams<Scalar>& params) {
  params.validate();
  LcfeTrace<Scalar> t;
  for (std::size_t i = 0; i < kLcfeBranches; ++i) t.branches[i] = conv2d(f1, params.branches[i]);
  auto stages = fusion_stages(t.branches, params);
  t.concat = std::move(stages.concat);
  t.reduced = std::move(stages.reduced);
  t.mixed = std::move(stages.mixed);
  t.weights = std::move(stages.weights);
  t.output = weighted_fusion(t.branches, t.weights);
  return t;
}

template <typename Scalar>
Tensor<Scalar> lcfe_forward(const Tensor<Scalar>& f1, const LcfeParams<Scalar>& params) {
  return lcfe_forward_traced(f1, params).output;
}

template <typename Scalar>
LcfeGrads<Scalar> lcfe_backward(const Tensor<Scalar>& f1, const LcfeParams<Scalar>& params,
                                const LcfeTrace<Scalar>& trace, const Tensor<Scalar>& upstream) {
  const Shape s = trace.output.shape();
  if (upstream.shape() != s) {
    throw ShapeError("lcfe_backward: upstream " + to_string(upstream.shape()) +
                     " does not match output " + to_string(s));
  }
  LcfeGrads<Scalar> g{Tensor<Scalar>(f1.shape()), zeros_like_params<Scalar>(params)};

  // Direct path through the weighted sum.
  std::array<Tensor<Scalar>, kLcfeBranches> d_branch;
  Tensor<Scalar> d_weights({s.n, kLcfeBranches, s.h, s.w});
  for (std::size_t i = 0; i < kLcfeBranches; ++i) d_branch[i] = Tensor<Scalar>(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < s.h; ++y) {
        for (std::size_t x = 0; x < s.w; ++x) {
          const Scalar up = upstream(n, c, y, x);
          for (std::size_t i = 0; i < kLcfeBranches; ++i) {
            d_branch[i](n, c, y, x) = trace.weights(n, i, y, x) * up;
            d_weights(n, i, y, x) += trace.branches[i](n, c, y, x) * up;
          }
        }
      }
    }
  }

  // Path through the fusion-weight predictor.
  const Tensor<Scalar> d_mixed = softmax_channels_backward(trace.weights, d_weights);
  const auto mix_g = conv2d_backward(trace.reduced, params.mix, d_mixed);
  accumulate(g.params.mix, mix_g);
  const auto reduce_g = conv2d_backward(trace.concat, params.reduce, mix_g.input);
  accumulate(g.params.reduce, reduce_g);
  const auto d_concat = split_channels(reduce_g.input, kLcfeBranches);

  for (std::size_t i = 0; i < kLcfeBranches; ++i) {
    const Tensor<Scalar> d = add(d_branch[i], d_concat[i]);
    const auto branch_g = conv2d_backward(f1, params.branches[i], d);
    accumulate(g.params.branches[i], branch_g);
    g.input = add(g.input, branch_g.input);
  }
  return g;
}

#define CCA_INSTANTIATE(S)                                                                    \
  template struct LcfeParams<S>;                                                              \
  template LcfeParams<S> make_lcfe_params<S>(const LcfeConfig&, Rng&);                        \
  template std::array<Tensor<S>, kLcfeBranches> fusion_weights<S>(                            \
      const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, const LcfeParams<S>&);            \
  template Tensor<S> weighted_fusion<S>(const std::array<Tensor<S>, kLcfeBranches>&,          \
                                        const Tensor<S>&);                                    \
  template Tensor<S> lcfe_forward<S>(const Tensor<S>&, const LcfeParams<S>&);                 \
  template LcfeTrace<S> lcfe_forward_traced<S>(const Tensor<S>&, const LcfeParams<S>&);       \
  template LcfeGrads<S> lcfe_backward<S>(const Tensor<S>&, const LcfeParams<S>&,              \
                                         const LcfeTrace<S>&, const Tensor<S>&);
CCA_INSTANTIATE(float)
CCA_INSTANTIATE(double)
#undef CCA_INSTANTIATE

}  // namespace cca
