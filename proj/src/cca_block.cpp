// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#include "cca/cca_block.hpp"

#include "cca/ops.hpp"
#include "cca/params.hpp"

#include <numeric>
#include <stdexcept>

namespace cca {

void CcaConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("cca config: " + what); };
  if (c_in < 1) fail("c_in must be >= 1");
  if (c_mid < 1) fail("c_mid must be >= 1");
  if (c_out < 1) fail("c_out must be >= 1");
  if (stride != 1 && stride != 2) fail("stride must be 1 or 2");
  for (auto r : rates)
    if (r < 1) fail("dilation rates must be >= 1");
  if (heads < 1 || c_mid % heads != 0) fail("c_mid must be divisible by heads");
  if (layers < 1) fail("layers must be >= 1");
  if (!(layer_norm_eps > 0.0)) fail("layer_norm_eps must be positive");
}

EncoderConfig CcaConfig::encoder() const {
  return {c_mid, heads, ffn_hidden, layers, positional_encoding, layer_norm_eps};
}

std::size_t CcaConfig::reduced_extent(std::size_t input_extent) const {
  if (input_extent < 1) throw ShapeError("cca: empty input extent");
  return (input_extent + 2 - 3) / stride + 1;
}

template <typename Scalar>
void CcaParams<Scalar>::validate() const {
  const std::size_t mid = conv1.out_channels;
  if (conv2.out_channels != mid || conv2.in_channels != conv1.in_channels) {
    throw ShapeError("cca: conv1 and conv2 must share input and output widths");
  }
  if (conv3.in_channels != 2 * mid) throw ShapeError("cca: conv3 must take 2 * c_mid channels");
  if (lcfe.channels() != mid) throw ShapeError("cca: lcfe width must equal c_mid");
  if (gcfc.score.in_channels != mid) throw ShapeError("cca: gcfc width must equal c_mid");
  if (encoder.width() != mid) throw ShapeError("cca: encoder width must equal c_mid");
  lcfe.validate();
  gcfc.validate();
  encoder.validate();
}

template <typename Scalar>
CcaParams<Scalar> make_cca_params(const CcaConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  CcaParams<Scalar> p;
  p.conv1 = make_conv<Scalar>({config.c_in, config.c_mid, 3, config.stride, 1, 1, config.bias}, rng);
  p.conv2 = make_conv<Scalar>({config.c_in, config.c_mid, 3, config.stride, 1, 1, config.bias}, rng);
  p.lcfe = make_lcfe_params<Scalar>({config.c_mid, config.rates, config.bias}, rng);
  p.gcfc = make_gcfc_params<Scalar>({config.c_mid, config.n_keys, config.bias}, rng);
  p.encoder = make_encoder_params<Scalar>(config.encoder(), rng);
  p.conv3 = make_conv<Scalar>({2 * config.c_mid, config.c_out, 3, 1, 1, 1, config.bias}, rng);
  p.scatter = config.scatter;
  p.validate();
  return p;
}

template <typename Scalar>
void zero_weights(CcaParams<Scalar>& params) {
  params.visit([](const std::string& name, std::span<Scalar> v) {
    const bool is_weight = name.ends_with(".weight") || name.find(".attn.w") != std::string::npos ||
                           name.find(".ffn.w") != std::string::npos;
    if (is_weight) std::fill(v.begin(), v.end(), Scalar(0));
  });
}

template <typename Scalar>
AssembledTokens<Scalar> assemble_tokens(const Tensor<Scalar>& f_lc, std::size_t batch,
                                        const KeyFeatureSet<Scalar>& keys) {
  const Shape s = f_lc.shape();
  if (batch >= s.n) throw ShapeError("assemble_tokens: batch index out of range");
  if (keys.size() != 0 && std::size_t(keys.features.cols()) != s.c) {
    throw ShapeError("assemble_tokens: key features of width " +
                     std::to_string(keys.features.cols()) + " vs local width " +
                     std::to_string(s.c));
  }
  AssembledTokens<Scalar> out;
  out.layout = {s.h, s.w, keys.positions};
  out.tokens.resize(Eigen::Index(s.plane() + keys.size()), Eigen::Index(s.c));
  // local tokens are the transposed C x HW slab
  out.tokens.topRows(Eigen::Index(s.plane())) = f_lc.batch_matrix(batch).transpose();
  if (keys.size() != 0) out.tokens.bottomRows(Eigen::Index(keys.size())) = keys.features;
  return out;
}

namespace {

void require_layout(Eigen::Index rows, const TokenLayout& layout, const char* op) {
  if (std::size_t(rows) != layout.token_count()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(rows) + " tokens but layout expects " +
                     std::to_string(layout.token_count()));
  }
  for (const auto& p : layout.keys) {
    if (p.x >= layout.width || p.y >= layout.height) {
      throw ShapeError(std::string(op) + ": key position outside the map");
    }
  }
}

// For overwrite mode: index of the last key written at each pixel, or -1.
std::vector<long> last_writer(const TokenLayout& layout) {
  std::vector<long> owner(layout.local_tokens(), -1);
  for (std::size_t j = 0; j < layout.keys.size(); ++j) {
    owner[layout.keys[j].y * layout.width + layout.keys[j].x] = long(j);
  }
  return owner;
}

}  // namespace

template <typename Scalar>
std::pair<Tensor<Scalar>, Matrix<Scalar>> disassemble_tokens(const TokenMatrix<Scalar>& tokens,
                                                             const TokenLayout& layout) {
  require_layout(tokens.rows(), layout, "disassemble_tokens");
  Tensor<Scalar> map({1, std::size_t(tokens.cols()), layout.height, layout.width});
  map.batch_matrix(0) = tokens.topRows(Eigen::Index(layout.local_tokens())).transpose();
  Matrix<Scalar> keys = tokens.bottomRows(Eigen::Index(layout.keys.size()));
  return {std::move(map), std::move(keys)};
}

template <typename Scalar>
Tensor<Scalar> reassemble_spatial(const TokenMatrix<Scalar>& tokens, const TokenLayout& layout,
                                  ScatterMode mode) {
  require_layout(tokens.rows(), layout, "reassemble_spatial");
  const std::size_t c = std::size_t(tokens.cols());
  Tensor<Scalar> map({1, c, layout.height, layout.width});
  map.batch_matrix(0) = tokens.topRows(Eigen::Index(layout.local_tokens())).transpose();
  for (std::size_t j = 0; j < layout.keys.size(); ++j) {
    const Position p = layout.keys[j];
    const auto row = tokens.row(Eigen::Index(layout.local_tokens() + j));
    for (std::size_t ch = 0; ch < c; ++ch) {
      if (mode == ScatterMode::add)
        map(0, ch, p.y, p.x) += row(Eigen::Index(ch));
      else
        map(0, ch, p.y, p.x) = row(Eigen::Index(ch));
    }
  }
  return map;
}

template <typename Scalar>
TokenMatrix<Scalar> reassemble_spatial_backward(const Tensor<Scalar>& upstream,
                                                const TokenLayout& layout, ScatterMode mode) {
  const Shape s = upstream.shape();
  if (s.n != 1 || s.h != layout.height || s.w != layout.width) {
    throw ShapeError("reassemble_spatial_backward: upstream " + to_string(s) +
                     " does not match layout");
  }
  TokenMatrix<Scalar> d(Eigen::Index(layout.token_count()), Eigen::Index(s.c));
  d.topRows(Eigen::Index(layout.local_tokens())) = upstream.batch_matrix(0).transpose();
  const auto owner = mode == ScatterMode::overwrite ? last_writer(layout) : std::vector<long>{};
  for (std::size_t j = 0; j < layout.keys.size(); ++j) {
    const Position p = layout.keys[j];
    const std::size_t pixel = p.y * layout.width + p.x;
    auto row = d.row(Eigen::Index(layout.local_tokens() + j));
    const bool flows = mode == ScatterMode::add || owner[pixel] == long(j);
    for (std::size_t ch = 0; ch < s.c; ++ch)
      row(Eigen::Index(ch)) = flows ? upstream(0, ch, p.y, p.x) : Scalar(0);
  }
  if (mode == ScatterMode::overwrite) {
    for (std::size_t pixel = 0; pixel < owner.size(); ++pixel)
      if (owner[pixel] >= 0) d.row(Eigen::Index(pixel)).setZero();
  }
  return d;
}

namespace {

// Re-raises shape errors with the failing stage named.
template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ShapeError& e) {
    throw ShapeError(std::string("stage ") + name + ": " + e.what());
  }
}

}  // namespace

template <typename Scalar>
CcaTrace<Scalar> cca_forward_traced(const Tensor<Scalar>& f, const CcaParams<Scalar>& params) {
  stage("params", [&] { params.validate(); });
  CcaTrace<Scalar> t;
  t.f1 = stage("conv1", [&] { return conv2d(f, params.conv1); });
  t.f2 = stage("conv2", [&] { return conv2d(f, params.conv2); });
  t.lcfe = stage("lcfe", [&] { return lcfe_forward_traced(t.f1, params.lcfe); });
  t.gcfc = stage("gcfc", [&] { return gcfc_forward_traced(t.f1, params.gcfc); });

  const Shape s = t.f1.shape();
  t.context = Tensor<Scalar>(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    auto assembled =
        stage("tokens", [&] { return assemble_tokens(t.lcfe.output, n, t.gcfc.keys[n]); });
    t.encoder.push_back(
        stage("encoder", [&] { return encoder_forward_traced(assembled.tokens, params.encoder); }));
    const Tensor<Scalar> map = stage("reassemble", [&] {
      return reassemble_spatial(t.encoder.back().output, assembled.layout, params.scatter);
    });
    t.context.batch_matrix(n) = map.batch_matrix(0);
    t.layouts.push_back(std::move(assembled.layout));
    t.tokens.push_back(std::move(assembled.tokens));
  }
  t.fused = stage("concat", [&] { return concat_channels({t.context, t.f2}); });
  t.output = stage("conv3", [&] { return conv2d(t.fused, params.conv3); });
  return t;
}

template <typename Scalar>
Tensor<Scalar> cca_forward(const Tensor<Scalar>& f, const CcaParams<Scalar>& params) {
  return cca_forward_traced(f, params).output;
}

template <typename Scalar>
CcaGrads<Scalar> cca_backward(const Tensor<Scalar>& f, const CcaParams<Scalar>& params,
                              const CcaTrace<Scalar>& trace, const Tensor<Scalar>& upstream) {
  CcaGrads<Scalar> g{Tensor<Scalar>(f.shape()), zeros_like_params<Scalar>(params)};

  const auto conv3_g = conv2d_backward(trace.fused, params.conv3, upstream);
  accumulate(g.params.conv3, conv3_g);
  const auto d_fused = split_channels(conv3_g.input, 2);
  const Tensor<Scalar>& d_context = d_fused[0];
  const Tensor<Scalar>& d_f2 = d_fused[1];

  const Shape s = trace.f1.shape();
  Tensor<Scalar> d_lcfe(s);
  std::vector<Matrix<Scalar>> d_keys(s.n);
  for (std::size_t n = 0; n < s.n; ++n) {
    Tensor<Scalar> d_map({1, s.c, s.h, s.w});
    d_map.batch_matrix(0) = d_context.batch_matrix(n);
    const auto& layout = trace.layouts[n];
    const TokenMatrix<Scalar> d_ft = reassemble_spatial_backward(d_map, layout, params.scatter);
    const TokenMatrix<Scalar> d_q =
        encoder_backward(params.encoder, trace.encoder[n], d_ft, g.params.encoder);
    d_lcfe.batch_matrix(n) = d_q.topRows(Eigen::Index(layout.local_tokens())).transpose();
    d_keys[n] = d_q.bottomRows(Eigen::Index(layout.keys.size()));
  }

  const auto lcfe_g = lcfe_backward(trace.f1, params.lcfe, trace.lcfe, d_lcfe);
  axpy_params<Scalar>(g.params.lcfe, lcfe_g.params, Scalar(1));
  const auto gcfc_g = gcfc_backward<Scalar>(trace.f1, params.gcfc, trace.gcfc, d_keys);
  axpy_params<Scalar>(g.params.gcfc, gcfc_g.params, Scalar(1));
  const Tensor<Scalar> d_f1 = add(lcfe_g.input, gcfc_g.input);

  const auto conv1_g = conv2d_backward(f, params.conv1, d_f1);
  accumulate(g.params.conv1, conv1_g);
  const auto conv2_g = conv2d_backward(f, params.conv2, d_f2);
  accumulate(g.params.conv2, conv2_g);
  g.input = add(conv1_g.input, conv2_g.input);
  return g;
}

std::uint64_t CostTable::total() const {
  return std::accumulate(stages.begin(), stages.end(), std::uint64_t{0},
                         [](std::uint64_t acc, const StageTally& s) { return acc + s.count; });
}

namespace {

std::uint64_t conv_params(std::uint64_t in, std::uint64_t out, std::uint64_t k, bool bias) {
  return out * in * k * k + (bias ? out : 0);
}

std::uint64_t conv_flops(std::uint64_t in, std::uint64_t out, std::uint64_t k, std::uint64_t pixels) {
  return 2 * out * in * k * k * pixels;
}

}  // namespace

std::uint64_t lcfe_param_count(std::size_t channels, bool bias) {
  return 3 * conv_params(channels, channels, 3, bias) + conv_params(3 * channels, 3, 1, bias) +
         conv_params(3, 3, 3, bias);
}

CostTable param_count(const CcaConfig& config) {
  config.validate();
  const std::uint64_t mid = config.c_mid, hidden = config.encoder().hidden();
  const bool b = config.bias;
  const std::uint64_t per_layer = 4 * (mid * mid + mid) + 2 * (2 * mid) + hidden * mid + hidden +
                                  mid * hidden + mid;
  return {{
      {"conv1", conv_params(config.c_in, mid, 3, b)},
      {"conv2", conv_params(config.c_in, mid, 3, b)},
      {"lcfe.branches", 3 * conv_params(mid, mid, 3, b)},
      {"lcfe.fusion", conv_params(3 * mid, 3, 1, b) + conv_params(3, 3, 3, b)},
      {"gcfc.score", conv_params(mid, config.n_keys, 1, b)},
      {"encoder", config.layers * per_layer},
      {"conv3", conv_params(2 * mid, config.c_out, 3, b)},
  }};
}

CostTable flop_count(const CcaConfig& config, const Shape& input) {
  config.validate();
  const std::uint64_t batch = input.n;
  const std::uint64_t h = config.reduced_extent(input.h), w = config.reduced_extent(input.w);
  const std::uint64_t px = h * w;
  const std::uint64_t mid = config.c_mid, hidden = config.encoder().hidden();
  const std::uint64_t tokens = px + config.n_keys;
  const std::uint64_t projections = 4 * 2 * tokens * mid * mid;
  const std::uint64_t attention = 2 * (2 * tokens * tokens * mid);
  const std::uint64_t ffn = 2 * (2 * tokens * mid * hidden);
  return {{
      {"conv1", batch * conv_flops(config.c_in, mid, 3, px)},
      {"conv2", batch * conv_flops(config.c_in, mid, 3, px)},
      {"lcfe.branches", batch * 3 * conv_flops(mid, mid, 3, px)},
      {"lcfe.fusion", batch * (conv_flops(3 * mid, 3, 1, px) + conv_flops(3, 3, 3, px))},
      {"gcfc.score", batch * conv_flops(mid, config.n_keys, 1, px)},
      {"encoder", batch * config.layers * (projections + attention + ffn)},
      {"conv3", batch * conv_flops(2 * mid, config.c_out, 3, px)},
  }};
}

#define CCA_INSTANTIATE(S)                                                                     \
  template struct CcaParams<S>;                                                                \
  template CcaParams<S> make_cca_params<S>(const CcaConfig&, std::uint64_t);                   \
  template void zero_weights<S>(CcaParams<S>&);                                                \
  template AssembledTokens<S> assemble_tokens<S>(const Tensor<S>&, std::size_t,                \
                                                 const KeyFeatureSet<S>&);                     \
  template std::pair<Tensor<S>, Matrix<S>> disassemble_tokens<S>(const TokenMatrix<S>&,        \
                                                                 const TokenLayout&);          \
  template Tensor<S> reassemble_spatial<S>(const TokenMatrix<S>&, const TokenLayout&,          \
                                           ScatterMode);                                       \
  template TokenMatrix<S> reassemble_spatial_backward<S>(const Tensor<S>&, const TokenLayout&, \
                                                         ScatterMode);                         \
  template CcaTrace<S> cca_forward_traced<S>(const Tensor<S>&, const CcaParams<S>&);           \
  template Tensor<S> cca_forward<S>(const Tensor<S>&, const CcaParams<S>&);                    \
  template CcaGrads<S> cca_backward<S>(const Tensor<S>&, const CcaParams<S>&,                  \
                                       const CcaTrace<S>&, const Tensor<S>&);
CCA_INSTANTIATE(float)
CCA_INSTANTIATE(double)
#undef CCA_INSTANTIATE

}  // namespace cca
