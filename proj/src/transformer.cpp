// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#include "cca/transformer.hpp"

#include "cca/linalg.hpp"

#include <cmath>

namespace cca {

template <typename Scalar>
void EncoderParams<Scalar>::validate() const {
  if (layers.empty()) throw ShapeError("encoder: no layers");
  const auto w = Eigen::Index(width());
  if (heads == 0 || w % Eigen::Index(heads) != 0) {
    throw ShapeError("encoder: width " + std::to_string(w) + " not divisible by " +
                     std::to_string(heads) + " heads");
  }
  for (const auto& l : layers) {
    const bool ok = l.wq.rows() == w && l.wq.cols() == w && l.wk.rows() == w &&
                    l.wk.cols() == w && l.wv.rows() == w && l.wv.cols() == w &&
                    l.wo.rows() == w && l.wo.cols() == w && l.w1.cols() == w &&
                    l.w2.rows() == w && l.w2.cols() == l.w1.rows() && l.b1.size() == l.w1.rows() &&
                    l.ln1_gamma.size() == w && l.ln2_gamma.size() == w;
    if (!ok) throw ShapeError("encoder: inconsistent layer parameter extents");
  }
}

namespace {

template <typename Scalar>
void init_linear(Matrix<Scalar>& w, Vector<Scalar>& b, std::size_t out, std::size_t in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(double(in));
  w.resize(Eigen::Index(out), Eigen::Index(in));
  b.resize(Eigen::Index(out));
  rng.fill_uniform(std::span<Scalar>(w.data(), std::size_t(w.size())), -bound, bound);
  rng.fill_uniform(std::span<Scalar>(b.data(), std::size_t(b.size())), -bound, bound);
}

template <typename Scalar>
void require_width(const TokenMatrix<Scalar>& x, const EncoderLayerParams<Scalar>& layer) {
  if (x.rows() < 1) throw ShapeError("attention: empty token matrix");
  if (x.cols() != layer.wq.cols()) {
    throw ShapeError("attention: tokens of width " + std::to_string(x.cols()) +
                     " into a layer of width " + std::to_string(layer.wq.cols()));
  }
}

}  // namespace

template <typename Scalar>
EncoderParams<Scalar> make_encoder_params(const EncoderConfig& config, Rng& rng) {
  EncoderParams<Scalar> p;
  p.heads = config.heads;
  p.eps = Scalar(config.eps);
  p.positional_encoding = config.positional_encoding;
  const std::size_t w = config.width, h = config.hidden();
  for (std::size_t i = 0; i < config.layers; ++i) {
    EncoderLayerParams<Scalar> l;
    l.ln1_gamma = Vector<Scalar>::Ones(Eigen::Index(w));
    l.ln1_beta = Vector<Scalar>::Zero(Eigen::Index(w));
    init_linear(l.wq, l.bq, w, w, rng);
    init_linear(l.wk, l.bk, w, w, rng);
    init_linear(l.wv, l.bv, w, w, rng);
    init_linear(l.wo, l.bo, w, w, rng);
    l.ln2_gamma = Vector<Scalar>::Ones(Eigen::Index(w));
    l.ln2_beta = Vector<Scalar>::Zero(Eigen::Index(w));
    init_linear(l.w1, l.b1, h, w, rng);
    init_linear(l.w2, l.b2, w, h, rng);
    p.layers.push_back(std::move(l));
  }
  p.validate();
  return p;
}

template <typename Scalar>
Matrix<Scalar> sinusoidal_positions(std::size_t tokens, std::size_t width) {
  Matrix<Scalar> pe(static_cast<Eigen::Index>(tokens), static_cast<Eigen::Index>(width));
  for (std::size_t t = 0; t < tokens; ++t) {
    for (std::size_t c = 0; c < width; ++c) {
      const double freq = std::pow(10000.0, -double(c - c % 2) / double(width));
      const double angle = double(t) * freq;
      pe(Eigen::Index(t), Eigen::Index(c)) = Scalar(c % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

template <typename Scalar>
AttentionTrace<Scalar> multi_head_attention_traced(const TokenMatrix<Scalar>& x,
                                                   const EncoderLayerParams<Scalar>& layer,
                                                   std::size_t heads) {
  require_width(x, layer);
  const Eigen::Index width = x.cols();
  if (heads == 0 || width % Eigen::Index(heads) != 0) {
    throw ShapeError("attention: width not divisible by head count");
  }
  const Eigen::Index dh = width / Eigen::Index(heads);
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(dh));

  AttentionTrace<Scalar> t;
  t.q = linear(x, layer.wq, layer.bq);
  t.k = linear(x, layer.wk, layer.bk);
  t.v = linear(x, layer.wv, layer.bv);
  t.heads.resize(x.rows(), width);
  for (Eigen::Index h = 0; h < Eigen::Index(heads); ++h) {
    const Matrix<Scalar> qh = t.q.middleCols(h * dh, dh);
    const Matrix<Scalar> kht = t.k.middleCols(h * dh, dh).transpose();
    const Matrix<Scalar> vh = t.v.middleCols(h * dh, dh);
    const Matrix<Scalar> logits = matmul(qh, kht) * scale;
    t.probs.push_back(softmax_rows(logits));
    t.heads.middleCols(h * dh, dh) = matmul(t.probs.back(), vh);
  }
  t.output = linear(t.heads, layer.wo, layer.bo);
  return t;
}

template <typename Scalar>
TokenMatrix<Scalar> multi_head_attention(const TokenMatrix<Scalar>& x,
                                         const EncoderLayerParams<Scalar>& layer,
                                         std::size_t heads) {
  return multi_head_attention_traced(x, layer, heads).output;
}

template <typename Scalar>
TokenMatrix<Scalar> multi_head_attention_backward(const TokenMatrix<Scalar>& x,
                                                  const EncoderLayerParams<Scalar>& layer,
                                                  std::size_t heads,
                                                  const AttentionTrace<Scalar>& trace,
                                                  const TokenMatrix<Scalar>& upstream,
                                                  EncoderLayerParams<Scalar>& grads) {
  const Eigen::Index width = x.cols();
  const Eigen::Index dh = width / Eigen::Index(heads);
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(dh));

  const auto out_g = linear_backward(trace.heads, layer.wo, upstream);
  grads.wo += out_g.weight;
  grads.bo += out_g.bias;

  Matrix<Scalar> dq(x.rows(), width), dk(x.rows(), width), dv(x.rows(), width);
  for (Eigen::Index h = 0; h < Eigen::Index(heads); ++h) {
    const auto& p = trace.probs[std::size_t(h)];
    const Matrix<Scalar> d_head = out_g.input.middleCols(h * dh, dh);
    const auto qh = trace.q.middleCols(h * dh, dh);
    const auto kh = trace.k.middleCols(h * dh, dh);
    const auto vh = trace.v.middleCols(h * dh, dh);
    const Matrix<Scalar> dp = d_head * vh.transpose();
    dv.middleCols(h * dh, dh) = p.transpose() * d_head;
    const Matrix<Scalar> dlogits = softmax_rows_backward(p, dp) * scale;
    dq.middleCols(h * dh, dh) = dlogits * kh;
    dk.middleCols(h * dh, dh) = dlogits.transpose() * qh;
  }

  TokenMatrix<Scalar> dx = TokenMatrix<Scalar>::Zero(x.rows(), width);
  auto project = [&](const Matrix<Scalar>& w, const Matrix<Scalar>& d, Matrix<Scalar>& gw,
                     Vector<Scalar>& gb) {
    const auto lg = linear_backward(x, w, d);
    gw += lg.weight;
    gb += lg.bias;
    dx += lg.input;
  };
  project(layer.wq, dq, grads.wq, grads.bq);
  project(layer.wk, dk, grads.wk, grads.bk);
  project(layer.wv, dv, grads.wv, grads.bv);
  return dx;
}

template <typename Scalar>
BlockTrace<Scalar> encoder_block_traced(const TokenMatrix<Scalar>& x,
                                        const EncoderLayerParams<Scalar>& layer,
                                        std::size_t heads, Scalar eps) {
  require_width(x, layer);
  BlockTrace<Scalar> t;
  t.input = x;
  t.norm1 = layer_norm(x, layer.ln1_gamma, layer.ln1_beta, eps);
  t.attention = multi_head_attention_traced(t.norm1, layer, heads);
  t.mid = x + t.attention.output;
  t.norm2 = layer_norm(t.mid, layer.ln2_gamma, layer.ln2_beta, eps);
  t.hidden = linear(t.norm2, layer.w1, layer.b1);
  t.activated = gelu(t.hidden);
  t.output = t.mid + linear(t.activated, layer.w2, layer.b2);
  return t;
}

template <typename Scalar>
TokenMatrix<Scalar> encoder_block(const TokenMatrix<Scalar>& x,
                                  const EncoderLayerParams<Scalar>& layer, std::size_t heads,
                                  Scalar eps) {
  return encoder_block_traced(x, layer, heads, eps).output;
}

template <typename Scalar>
TokenMatrix<Scalar> encoder_block_backward(const EncoderLayerParams<Scalar>& layer,
                                           std::size_t heads, Scalar eps,
                                           const BlockTrace<Scalar>& trace,
                                           const TokenMatrix<Scalar>& upstream,
                                           EncoderLayerParams<Scalar>& grads) {
  // FFN branch
  const auto g2 = linear_backward(trace.activated, layer.w2, upstream);
  grads.w2 += g2.weight;
  grads.b2 += g2.bias;
  const Matrix<Scalar> d_hidden = gelu_backward(trace.hidden, g2.input);
  const auto g1 = linear_backward(trace.norm2, layer.w1, d_hidden);
  grads.w1 += g1.weight;
  grads.b1 += g1.bias;
  const auto n2 = layer_norm_backward(trace.mid, layer.ln2_gamma, eps, g1.input);
  grads.ln2_gamma += n2.gamma;
  grads.ln2_beta += n2.beta;
  const TokenMatrix<Scalar> d_mid = upstream + n2.input;

  // attention branch
  const TokenMatrix<Scalar> d_norm1 =
      multi_head_attention_backward(trace.norm1, layer, heads, trace.attention, d_mid, grads);
  const auto n1 = layer_norm_backward(trace.input, layer.ln1_gamma, eps, d_norm1);
  grads.ln1_gamma += n1.gamma;
  grads.ln1_beta += n1.beta;
  return d_mid + n1.input;
}

template <typename Scalar>
EncoderTrace<Scalar> encoder_forward_traced(const TokenMatrix<Scalar>& x,
                                            const EncoderParams<Scalar>& params) {
  params.validate();
  EncoderTrace<Scalar> t;
  TokenMatrix<Scalar> cur = x;
  if (params.positional_encoding) {
    cur += sinusoidal_positions<Scalar>(std::size_t(x.rows()), std::size_t(x.cols()));
  }
  for (const auto& layer : params.layers) {
    t.blocks.push_back(encoder_block_traced(cur, layer, params.heads, params.eps));
    cur = t.blocks.back().output;
  }
  t.output = std::move(cur);
  return t;
}

template <typename Scalar>
TokenMatrix<Scalar> encoder_forward(const TokenMatrix<Scalar>& x,
                                    const EncoderParams<Scalar>& params) {
  return encoder_forward_traced(x, params).output;
}

template <typename Scalar>
TokenMatrix<Scalar> encoder_backward(const EncoderParams<Scalar>& params,
                                     const EncoderTrace<Scalar>& trace,
                                     const TokenMatrix<Scalar>& upstream,
                                     EncoderParams<Scalar>& grads) {
  TokenMatrix<Scalar> d = upstream;
  for (std::size_t i = params.layers.size(); i-- > 0;) {
    d = encoder_block_backward(params.layers[i], params.heads, params.eps, trace.blocks[i], d,
                               grads.layers[i]);
  }
  return d;  // positional encoding is additive and constant
}

#define CCA_INSTANTIATE(S)                                                                      \
  template struct EncoderParams<S>;                                                             \
  template EncoderParams<S> make_encoder_params<S>(const EncoderConfig&, Rng&);                 \
  template Matrix<S> sinusoidal_positions<S>(std::size_t, std::size_t);                         \
  template AttentionTrace<S> multi_head_attention_traced<S>(                                    \
      const TokenMatrix<S>&, const EncoderLayerParams<S>&, std::size_t);                        \
  template TokenMatrix<S> multi_head_attention<S>(const TokenMatrix<S>&,                        \
                                                  const EncoderLayerParams<S>&, std::size_t);   \
  template TokenMatrix<S> multi_head_attention_backward<S>(                                     \
      const TokenMatrix<S>&, const EncoderLayerParams<S>&, std::size_t,                         \
      const AttentionTrace<S>&, const TokenMatrix<S>&, EncoderLayerParams<S>&);                 \
  template BlockTrace<S> encoder_block_traced<S>(const TokenMatrix<S>&,                         \
                                                 const EncoderLayerParams<S>&, std::size_t, S); \
  template TokenMatrix<S> encoder_block<S>(const TokenMatrix<S>&, const EncoderLayerParams<S>&, \
                                           std::size_t, S);                                     \
  template TokenMatrix<S> encoder_block_backward<S>(const EncoderLayerParams<S>&, std::size_t,  \
                                                    S, const BlockTrace<S>&,                    \
                                                    const TokenMatrix<S>&,                      \
                                                    EncoderLayerParams<S>&);                    \
  template EncoderTrace<S> encoder_forward_traced<S>(const TokenMatrix<S>&,                     \
                                                     const EncoderParams<S>&);                  \
  template TokenMatrix<S> encoder_forward<S>(const TokenMatrix<S>&, const EncoderParams<S>&);   \
  template TokenMatrix<S> encoder_backward<S>(const EncoderParams<S>&, const EncoderTrace<S>&,  \
                                              const TokenMatrix<S>&, EncoderParams<S>&);
CCA_INSTANTIATE(float)
CCA_INSTANTIATE(double)
#undef CCA_INSTANTIATE

}  // namespace cca
