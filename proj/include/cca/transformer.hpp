// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Encoder-only transformer over a TokenMatrix (one token per row). Blocks are
// pre-norm:  y = x + MHA(LN1(x)),  z = y + FFN(LN2(y)),  FFN = W2 gelu(W1 .).

#include "cca/random.hpp"
#include "cca/tensor.hpp"

#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace cca {

struct EncoderConfig {
  std::size_t width = 0;
  std::size_t heads = 4;
  std::size_t ffn_hidden = 0;  // 0 selects 4 * width
  std::size_t layers = 1;
  bool positional_encoding = false;
  double eps = 1e-5;

  std::size_t hidden() const { return ffn_hidden == 0 ? 4 * width : ffn_hidden; }
};

template <typename Scalar>
struct EncoderLayerParams {
  Vector<Scalar> ln1_gamma, ln1_beta;
  Matrix<Scalar> wq, wk, wv, wo;  // width x width, out x in
  Vector<Scalar> bq, bk, bv, bo;
  Vector<Scalar> ln2_gamma, ln2_beta;
  Matrix<Scalar> w1;  // hidden x width
  Vector<Scalar> b1;
  Matrix<Scalar> w2;  // width x hidden
  Vector<Scalar> b2;

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    visit_impl(*this, prefix, f);
  }
  template <typename F>
  void visit(const std::string& prefix, F&& f) const {
    visit_impl(*this, prefix, f);
  }

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& self, const std::string& prefix, F& f) {
    auto emit = [&](const char* name, auto& m) {
      using Elem = std::remove_reference_t<decltype(*m.data())>;
      f(prefix + name, std::span<Elem>(m.data(), std::size_t(m.size())));
    };
    emit(".ln1.gamma", self.ln1_gamma);
    emit(".ln1.beta", self.ln1_beta);
    emit(".attn.wq", self.wq);
    emit(".attn.bq", self.bq);
    emit(".attn.wk", self.wk);
    emit(".attn.bk", self.bk);
    emit(".attn.wv", self.wv);
    emit(".attn.bv", self.bv);
    emit(".attn.wo", self.wo);
    emit(".attn.bo", self.bo);
    emit(".ln2.gamma", self.ln2_gamma);
    emit(".ln2.beta", self.ln2_beta);
    emit(".ffn.w1", self.w1);
    emit(".ffn.b1", self.b1);
    emit(".ffn.w2", self.w2);
    emit(".ffn.b2", self.b2);
  }
};

template <typename Scalar>
struct EncoderParams {
  std::size_t heads = 1;
  Scalar eps = Scalar(1e-5);
  bool positional_encoding = false;
  std::vector<EncoderLayerParams<Scalar>> layers;

  std::size_t width() const { return layers.empty() ? 0 : std::size_t(layers[0].wq.rows()); }
  void validate() const;

  template <typename F>
  void visit(F&& f) {
    for (std::size_t i = 0; i < layers.size(); ++i)
      layers[i].visit("encoder.layer" + std::to_string(i), f);
  }
  template <typename F>
  void visit(F&& f) const {
    for (std::size_t i = 0; i < layers.size(); ++i)
      layers[i].visit("encoder.layer" + std::to_string(i), f);
  }
};

/// Linear weights uniform in +-1/sqrt(fan_in), layer-norm gamma 1 and beta 0.
template <typename Scalar>
EncoderParams<Scalar> make_encoder_params(const EncoderConfig& config, Rng& rng);

/// Sinusoidal encoding: sin on even columns, cos on odd columns.
template <typename Scalar>
Matrix<Scalar> sinusoidal_positions(std::size_t tokens, std::size_t width);

template <typename Scalar>
struct AttentionTrace {
  Matrix<Scalar> q, k, v;
  std::vector<Matrix<Scalar>> probs;  // one T x T matrix per head
  Matrix<Scalar> heads;               // concatenated head outputs
  Matrix<Scalar> output;
};

/// Scaled dot-product self-attention softmax(QKᵀ/sqrt(d_h))V per head, heads
/// concatenated in order and projected by W_o.
template <typename Scalar>
TokenMatrix<Scalar> multi_head_attention(const TokenMatrix<Scalar>& x,
                                         const EncoderLayerParams<Scalar>& layer,
                                         std::size_t heads);
template <typename Scalar>
AttentionTrace<Scalar> multi_head_attention_traced(const TokenMatrix<Scalar>& x,
                                                   const EncoderLayerParams<Scalar>& layer,
                                                   std::size_t heads);

/// Accumulates parameter gradients into `grads` and returns d input.
template <typename Scalar>
TokenMatrix<Scalar> multi_head_attention_backward(const TokenMatrix<Scalar>& x,
                                                  const EncoderLayerParams<Scalar>& layer,
                                                  std::size_t heads,
                                                  const AttentionTrace<Scalar>& trace,
                                                  const TokenMatrix<Scalar>& upstream,
                                                  EncoderLayerParams<Scalar>& grads);

template <typename Scalar>
struct BlockTrace {
  TokenMatrix<Scalar> input, norm1;
  AttentionTrace<Scalar> attention;
  TokenMatrix<Scalar> mid, norm2, hidden, activated, output;
};

template <typename Scalar>
TokenMatrix<Scalar> encoder_block(const TokenMatrix<Scalar>& x,
                                  const EncoderLayerParams<Scalar>& layer, std::size_t heads,
                                  Scalar eps);
template <typename Scalar>
BlockTrace<Scalar> encoder_block_traced(const TokenMatrix<Scalar>& x,
                                        const EncoderLayerParams<Scalar>& layer,
                                        std::size_t heads, Scalar eps);
template <typename Scalar>
TokenMatrix<Scalar> encoder_block_backward(const EncoderLayerParams<Scalar>& layer,
                                           std::size_t heads, Scalar eps,
                                           const BlockTrace<Scalar>& trace,
                                           const TokenMatrix<Scalar>& upstream,
                                           EncoderLayerParams<Scalar>& grads);

template <typename Scalar>
struct EncoderTrace {
  std::vector<BlockTrace<Scalar>> blocks;
  TokenMatrix<Scalar> output;
};

template <typename Scalar>
TokenMatrix<Scalar> encoder_forward(const TokenMatrix<Scalar>& x,
                                    const EncoderParams<Scalar>& params);
template <typename Scalar>
EncoderTrace<Scalar> encoder_forward_traced(const TokenMatrix<Scalar>& x,
                                            const EncoderParams<Scalar>& params);
template <typename Scalar>
TokenMatrix<Scalar> encoder_backward(const EncoderParams<Scalar>& params,
                                     const EncoderTrace<Scalar>& trace,
                                     const TokenMatrix<Scalar>& upstream,
                                     EncoderParams<Scalar>& grads);

}  // namespace cca
