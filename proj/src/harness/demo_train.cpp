// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#include "cca/harness/demo_train.hpp"

#include "cca/params.hpp"

#include <algorithm>
#include <cmath>

namespace cca::harness {

namespace {

constexpr std::uint64_t kHeadStream = 0x68656164;  // "head"
constexpr std::uint64_t kSceneStream = 0x7363656e;  // "scen"

template <typename Scalar>
std::vector<Position> input_keys(const CcaTrace<Scalar>& trace, std::size_t stride) {
  std::vector<Position> out;
  for (const auto& p : trace.gcfc.keys.front().positions) out.push_back({p.x * stride, p.y * stride});
  return out;
}

}  // namespace

double DemoResult::keys_near_patches(std::size_t radius) const {
  if (keys.empty() || keys.back().empty()) return 0.0;
  std::size_t near = 0;
  for (const auto& k : keys.back()) {
    near += std::any_of(patches.begin(), patches.end(),
                        [&](const Patch& p) { return chebyshev(k, p.center()) <= radius; });
  }
  return double(near) / double(keys.back().size());
}

template <typename Scalar>
DemoModel<Scalar> make_demo_model(const CcaConfig& config, std::uint64_t seed) {
  Rng rng(seed ^ kHeadStream);
  return {make_cca_params<Scalar>(config, seed),
          make_conv<Scalar>({config.c_out, 1, 1, 1, 0, 1, true}, rng)};
}

template <typename Scalar>
double bce_with_logits(const Tensor<Scalar>& logits, const Tensor<Scalar>& target,
                       Tensor<Scalar>* grad) {
  if (!(logits.shape() == target.shape())) {
    throw ShapeError("bce_with_logits: " + to_string(logits.shape()) + " vs " +
                     to_string(target.shape()));
  }
  const auto z = logits.data();
  const auto t = target.data();
  const double inv_n = 1.0 / double(z.size());
  if (grad) *grad = Tensor<Scalar>(logits.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double zi = z[i], ti = t[i];
    total += std::max(zi, 0.0) - zi * ti + std::log1p(std::exp(-std::abs(zi)));
    if (grad) grad->data()[i] = Scalar((logistic(zi) - ti) * inv_n);
  }
  return total * inv_n;
}

template <typename Scalar>
Tensor<Scalar> downsample_mask(const Tensor<Scalar>& mask, std::size_t stride) {
  const Shape s = mask.shape();
  Tensor<Scalar> out({s.n, s.c, (s.h + stride - 1) / stride, (s.w + stride - 1) / stride});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) {
          Scalar& o = out(n, c, y / stride, x / stride);
          o = std::max(o, mask(n, c, y, x));
        }
  return out;
}

template <typename Scalar>
DemoResult demo_train(const RunConfig& config, std::uint64_t seed) {
  const CcaConfig& cc = config.cca;
  cc.validate();
  const auto scene = make_scene<Scalar>(cc.c_in, config.demo, seed ^ kSceneStream);
  auto model = make_demo_model<Scalar>(cc, seed);

  DemoResult result;
  result.patches = scene.patches;
  const Scalar lr = Scalar(config.demo.learning_rate);
  Tensor<Scalar> target;

  for (std::size_t epoch = 0;; ++epoch) {
    const auto trace = cca_forward_traced(scene.features, model.block);
    const Tensor<Scalar> logits = conv2d(trace.output, model.head);
    if (epoch == 0) target = downsample_mask(scene.mask, scene.features.shape().h / logits.shape().h);
    Tensor<Scalar> d_logits;
    const double loss = bce_with_logits(logits, target, &d_logits);
    if (!std::isfinite(loss)) throw DivergenceError(epoch);
    result.losses.push_back(loss);
    result.keys.push_back(input_keys(trace, cc.stride));
    if (epoch == config.demo.epochs) break;

    DemoModel<Scalar> grads{{}, {}};
    const auto head = conv2d_backward(trace.output, model.head, d_logits);
    auto block = cca_backward(scene.features, model.block, trace, head.input);
    grads.block = std::move(block.params);
    grads.head = zeros_like(model.head);
    accumulate(grads.head, head);
    axpy_params<Scalar>(model, grads, -lr);
  }
  return result;
}

DemoResult demo_train(const RunConfig& config, std::uint64_t seed) {
  return config.dtype == DType::f64 ? demo_train<double>(config, seed)
                                    : demo_train<float>(config, seed);
}

void write_loss_trace(std::ostream& out, const DemoResult& result) {
  out << "# epoch loss\n";
  const auto old = out.precision(17);
  for (std::size_t e = 0; e < result.losses.size(); ++e) out << e << ' ' << result.losses[e] << '\n';
  out.precision(old);
}

void write_key_trace(std::ostream& out, const DemoResult& result) {
  out << "# epoch key x y\n";
  for (std::size_t e = 0; e < result.keys.size(); ++e)
    for (std::size_t k = 0; k < result.keys[e].size(); ++k)
      out << e << ' ' << k << ' ' << result.keys[e][k].x << ' ' << result.keys[e][k].y << '\n';
}

#define CCA_INSTANTIATE(S)                                                              \
  template DemoModel<S> make_demo_model<S>(const CcaConfig&, std::uint64_t);            \
  template double bce_with_logits<S>(const Tensor<S>&, const Tensor<S>&, Tensor<S>*);   \
  template Tensor<S> downsample_mask<S>(const Tensor<S>&, std::size_t);                 \
  template DemoResult demo_train<S>(const RunConfig&, std::uint64_t);
CCA_INSTANTIATE(float)
CCA_INSTANTIATE(double)
#undef CCA_INSTANTIATE

}  // namespace cca::harness
