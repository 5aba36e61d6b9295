// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#include "cca/harness/gradcheck_suite.hpp"

#include "cca/linalg.hpp"
#include "cca/ops.hpp"
#include "cca/params.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cca::harness {

namespace {

using T = Tensor<double>;
using M = Matrix<double>;
using V = Vector<double>;

constexpr double kMinMargin = 5e-3;

std::span<double> span_of(T& t) { return t.data(); }
std::span<double> span_of(M& m) { return {m.data(), std::size_t(m.size())}; }
std::span<double> span_of(V& v) { return {v.data(), std::size_t(v.size())}; }
std::span<const double> cspan(const T& t) { return t.data(); }
std::span<const double> cspan(const M& m) { return {m.data(), std::size_t(m.size())}; }
std::span<const double> cspan(const V& v) { return {v.data(), std::size_t(v.size())}; }

T random_tensor(const Shape& s, Rng& rng) {
  T t(s);
  rng.fill_uniform(t.data(), -1.0, 1.0);
  return t;
}

M random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  M m(r, c);
  rng.fill_uniform(span_of(m), -1.0, 1.0);
  return m;
}

V random_vector(Eigen::Index n, Rng& rng) {
  V v(n);
  rng.fill_uniform(span_of(v), -1.0, 1.0);
  return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <typename P>
void add_param_targets(std::vector<GradTarget>& out, P& params, const P& grads) {
  auto values = parameter_spans<double>(params);
  auto analytic = parameter_spans<double>(grads);
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.push_back({values[i].name, values[i].values, analytic[i].values});
  }
}

StageCheck conv_stage(const std::string& name, std::size_t rate, std::size_t stride, Rng& rng,
                      double tol) {
  T x = random_tensor({1, 2, 6, 6}, rng);
  auto spec = make_conv<double>({2, 3, 3, stride, rate, rate, true}, rng);
  const T r = random_tensor(spec.output_shape(x.shape()), rng);
  const auto g = conv2d_backward(x, spec, r);
  const std::vector<GradTarget> targets{{"input", span_of(x), cspan(g.input)},
                                        {"weight", spec.weights.data(), cspan(g.weights)},
                                        {"bias", span_of(spec.bias), cspan(g.bias)}};
  return {name, grad_check([&] { return dot(cspan(r), cspan(conv2d(x, spec))); }, targets, tol)};
}

StageCheck softmax_channels_stage(Rng& rng, double tol) {
  T x = random_tensor({1, 3, 4, 4}, rng);
  const T r = random_tensor(x.shape(), rng);
  const T g = softmax_channels_backward(softmax_channels(x), r);
  const std::vector<GradTarget> targets{{"input", span_of(x), cspan(g)}};
  return {"softmax_channels",
          grad_check([&] { return dot(cspan(r), cspan(softmax_channels(x))); }, targets, tol)};
}

StageCheck sigmoid_stage(Rng& rng, double tol) {
  T x = random_tensor({1, 2, 3, 3}, rng);
  for (auto& v : x.data()) v *= 3.0;
  const T r = random_tensor(x.shape(), rng);
  const T g = sigmoid_backward(sigmoid(x), r);
  const std::vector<GradTarget> targets{{"input", span_of(x), cspan(g)}};
  return {"sigmoid", grad_check([&] { return dot(cspan(r), cspan(sigmoid(x))); }, targets, tol)};
}

StageCheck max_pool_stage(Rng& rng, double tol) {
  T x;
  do {
    x = random_tensor({2, 3, 4, 4}, rng);
  } while (argmax_margin(x) < kMinMargin);
  std::vector<double> r(6);
  rng.fill_uniform(std::span<double>(r), -1.0, 1.0);
  const auto pooled = global_max_pool_argmax(x);
  const T g = global_max_pool_backward<double>(x.shape(), pooled, r);
  const std::vector<GradTarget> targets{{"input", span_of(x), cspan(g)}};
  return {"global_max_pool",
          grad_check([&] { return dot(r, global_max_pool_argmax(x).scores); }, targets, tol)};
}

StageCheck linear_stage(Rng& rng, double tol) {
  M x = random_matrix(4, 5, rng), w = random_matrix(3, 5, rng);
  V b = random_vector(3, rng);
  const M r = random_matrix(4, 3, rng);
  const auto g = linear_backward(x, w, r);
  const std::vector<GradTarget> targets{{"input", span_of(x), cspan(g.input)},
                                        {"weight", span_of(w), cspan(g.weight)},
                                        {"bias", span_of(b), cspan(g.bias)}};
  return {"linear", grad_check([&] { return dot(cspan(r), cspan(M(linear(x, w, b)))); }, targets,
                               tol)};
}

StageCheck layer_norm_stage(Rng& rng, double tol) {
  M x = random_matrix(3, 6, rng);
  V gamma = random_vector(6, rng), beta = random_vector(6, rng);
  const M r = random_matrix(3, 6, rng);
  const double eps = 1e-5;
  const auto g = layer_norm_backward(x, gamma, eps, r);
  const std::vector<GradTarget> targets{{"input", span_of(x), cspan(g.input)},
                                        {"gamma", span_of(gamma), cspan(g.gamma)},
                                        {"beta", span_of(beta), cspan(g.beta)}};
  return {"layer_norm",
          grad_check([&] { return dot(cspan(r), cspan(M(layer_norm(x, gamma, beta, eps)))); },
                     targets, tol)};
}

StageCheck gelu_stage(Rng& rng, double tol) {
  M x = random_matrix(3, 5, rng) * 3.0;
  const M r = random_matrix(3, 5, rng);
  const M g = gelu_backward(x, r);
  const std::vector<GradTarget> targets{{"input", span_of(x), cspan(g)}};
  return {"gelu", grad_check([&] { return dot(cspan(r), cspan(M(gelu(x)))); }, targets, tol)};
}

StageCheck softmax_rows_stage(Rng& rng, double tol) {
  M x = random_matrix(3, 5, rng) * 2.0;
  const M r = random_matrix(3, 5, rng);
  const M g = softmax_rows_backward(softmax_rows(x), r);
  const std::vector<GradTarget> targets{{"input", span_of(x), cspan(g)}};
  return {"softmax_rows",
          grad_check([&] { return dot(cspan(r), cspan(M(softmax_rows(x)))); }, targets, tol)};
}

EncoderParams<double> small_encoder(Rng& rng, std::size_t width, std::size_t heads) {
  auto p = make_encoder_params<double>({width, heads, 0, 1, false, 1e-5}, rng);
  // non-trivial layer-norm affine parameters so their gradients are exercised
  for (auto& l : p.layers) {
    l.ln1_gamma = V::Ones(Eigen::Index(width)) + 0.3 * random_vector(Eigen::Index(width), rng);
    l.ln1_beta = 0.3 * random_vector(Eigen::Index(width), rng);
    l.ln2_gamma = V::Ones(Eigen::Index(width)) + 0.3 * random_vector(Eigen::Index(width), rng);
    l.ln2_beta = 0.3 * random_vector(Eigen::Index(width), rng);
  }
  return p;
}

StageCheck attention_stage(Rng& rng, double tol) {
  auto enc = small_encoder(rng, 8, 2);
  auto& layer = enc.layers[0];
  M x = random_matrix(5, 8, rng);
  const M r = random_matrix(5, 8, rng);
  auto grads = zeros_like_params<double>(enc);
  const auto trace = multi_head_attention_traced(x, layer, enc.heads);
  const M dx = multi_head_attention_backward(x, layer, enc.heads, trace, r, grads.layers[0]);
  std::vector<GradTarget> targets{{"input", span_of(x), cspan(dx)}};
  add_param_targets(targets, enc, grads);
  return {"attention",
          grad_check([&] { return dot(cspan(r), cspan(M(multi_head_attention(x, layer, enc.heads)))); },
                     targets, tol)};
}

StageCheck encoder_block_stage(Rng& rng, double tol) {
  auto enc = small_encoder(rng, 8, 2);
  M x = random_matrix(4, 8, rng);
  const M r = random_matrix(4, 8, rng);
  auto grads = zeros_like_params<double>(enc);
  const auto trace = encoder_forward_traced(x, enc);
  const M dx = encoder_backward(enc, trace, r, grads);
  std::vector<GradTarget> targets{{"input", span_of(x), cspan(dx)}};
  add_param_targets(targets, enc, grads);
  return {"encoder_block",
          grad_check([&] { return dot(cspan(r), cspan(M(encoder_forward(x, enc)))); }, targets,
                     tol)};
}

StageCheck lcfe_stage(Rng& rng, double tol) {
  auto params = make_lcfe_params<double>({3, {1, 2, 3}, true}, rng);
  T x = random_tensor({1, 3, 6, 6}, rng);
  const T r = random_tensor(x.shape(), rng);
  const auto trace = lcfe_forward_traced(x, params);
  auto g = lcfe_backward(x, params, trace, r);
  std::vector<GradTarget> targets{{"input", span_of(x), cspan(g.input)}};
  add_param_targets(targets, params, g.params);
  return {"lcfe", grad_check([&] { return dot(cspan(r), cspan(lcfe_forward(x, params))); },
                             targets, tol)};
}

StageCheck gcfc_stage(Rng& rng, double tol) {
  GcfcParams<double> params;
  T x;
  GcfcTrace<double> trace;
  do {
    params = make_gcfc_params<double>({4, 4, true}, rng);
    x = random_tensor({2, 4, 5, 5}, rng);
    trace = gcfc_forward_traced(x, params);
  } while (argmax_margin(trace.scores) < kMinMargin);
  std::vector<M> r;
  for (std::size_t n = 0; n < 2; ++n) r.push_back(random_matrix(4, 4, rng));
  auto g = gcfc_backward<double>(x, params, trace, r);
  std::vector<GradTarget> targets{{"input", span_of(x), cspan(g.input)}};
  add_param_targets(targets, params, g.params);
  const auto loss = [&] {
    const auto keys = gcfc_forward(x, params);
    double s = 0.0;
    for (std::size_t n = 0; n < keys.size(); ++n) s += dot(cspan(r[n]), cspan(keys[n].features));
    return s;
  };
  return {"gcfc", grad_check(loss, targets, tol)};
}

StageCheck cca_stage(const CcaConfig& config, Rng& rng, double tol) {
  CcaParams<double> params;
  T x;
  CcaTrace<double> trace;
  do {
    params = make_cca_params<double>(config, rng.index(1u << 30));
    x = random_tensor({1, config.c_in, 8, 8}, rng);
    trace = cca_forward_traced(x, params);
  } while (argmax_margin(trace.gcfc.scores) < kMinMargin);
  const T r = random_tensor(trace.output.shape(), rng);
  auto g = cca_backward(x, params, trace, r);
  std::vector<GradTarget> targets{{"input", span_of(x), cspan(g.input)}};
  add_param_targets(targets, params, g.params);
  return {"cca_forward",
          grad_check([&] { return dot(cspan(r), cspan(cca_forward(x, params))); }, targets, tol)};
}

}  // namespace

bool GradcheckSuiteResult::passed() const {
  return missing.empty() && !stages.empty() &&
         std::all_of(stages.begin(), stages.end(), [](const auto& s) { return s.report.passed(); });
}

const std::vector<std::string>& required_gradcheck_stages() {
  static const std::vector<std::string> stages = {
      "conv2d.r1",  "conv2d.r2",    "conv2d.r3", "conv2d.stride2", "softmax_channels",
      "sigmoid",    "global_max_pool", "linear", "layer_norm",     "gelu",
      "softmax_rows", "attention",  "encoder_block", "lcfe",       "gcfc",
      "cca_forward"};
  return stages;
}

double argmax_margin(const Tensor<double>& maps) {
  const Shape s = maps.shape();
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* plane = maps.raw() + maps.index(n, c, 0, 0);
      if (s.plane() < 2) continue;
      double best = -INFINITY, second = -INFINITY;
      for (std::size_t i = 0; i < s.plane(); ++i) {
        if (plane[i] > best) {
          second = best;
          best = plane[i];
        } else if (plane[i] > second) {
          second = plane[i];
        }
      }
      margin = std::min(margin, best - second);
    }
  }
  return margin;
}

GradcheckSuiteResult run_gradcheck_suite(const CcaConfig& config, std::uint64_t seed,
                                         double tolerance) {
  Rng rng(seed);
  GradcheckSuiteResult result;
  result.stages.push_back(conv_stage("conv2d.r1", 1, 1, rng, tolerance));
  result.stages.push_back(conv_stage("conv2d.r2", 2, 1, rng, tolerance));
  result.stages.push_back(conv_stage("conv2d.r3", 3, 1, rng, tolerance));
  result.stages.push_back(conv_stage("conv2d.stride2", 1, 2, rng, tolerance));
  result.stages.push_back(softmax_channels_stage(rng, tolerance));
  result.stages.push_back(sigmoid_stage(rng, tolerance));
  result.stages.push_back(max_pool_stage(rng, tolerance));
  result.stages.push_back(linear_stage(rng, tolerance));
  result.stages.push_back(layer_norm_stage(rng, tolerance));
  result.stages.push_back(gelu_stage(rng, tolerance));
  result.stages.push_back(softmax_rows_stage(rng, tolerance));
  result.stages.push_back(attention_stage(rng, tolerance));
  result.stages.push_back(encoder_block_stage(rng, tolerance));
  result.stages.push_back(lcfe_stage(rng, tolerance));
  result.stages.push_back(gcfc_stage(rng, tolerance));
  result.stages.push_back(cca_stage(config, rng, tolerance));

  for (const auto& name : required_gradcheck_stages()) {
    const bool ran = std::any_of(result.stages.begin(), result.stages.end(),
                                 [&](const StageCheck& s) { return s.stage == name; });
    if (!ran) result.missing.push_back(name);
  }
  return result;
}

}  // namespace cca::harness
