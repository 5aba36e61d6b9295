// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Context collection augmentation block.
//
//   f1 = conv1(f), f2 = conv2(f)                3x3, stride s, padding 1
//   f_lc = lcfe(f1), keys = gcfc(f1)
//   Q = [f_lc pixels (row-major) ; gated key features]   (T = H'W' + n tokens)
//   f_t = encoder(Q)
//   map = reshape(first H'W' tokens), key tokens scattered at their positions
//   F = conv3(concat(map, f2))                   3x3, stride 1, padding 1

#include "cca/conv.hpp"
#include "cca/gcfc.hpp"
#include "cca/lcfe.hpp"
#include "cca/transformer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cca {

/// How refined key tokens re-enter the spatial map.
enum class ScatterMode { add, overwrite };

struct CcaConfig {
  std::size_t c_in = 16;
  std::size_t c_mid = 8;
  std::size_t c_out = 16;
  std::size_t n_keys = 4;
  std::array<std::size_t, kLcfeBranches> rates{1, 2, 3};
  std::size_t stride = 2;  // Conv1/Conv2
  bool bias = true;
  std::size_t heads = 4;
  std::size_t layers = 1;
  std::size_t ffn_hidden = 0;  // 0 selects 4 * c_mid
  bool positional_encoding = false;
  double layer_norm_eps = 1e-5;
  ScatterMode scatter = ScatterMode::add;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  EncoderConfig encoder() const;
  /// Spatial extents after Conv1/Conv2.
  std::size_t reduced_extent(std::size_t input_extent) const;
};

template <typename Scalar>
struct CcaParams {
  ConvSpec<Scalar> conv1, conv2, conv3;
  LcfeParams<Scalar> lcfe;
  GcfcParams<Scalar> gcfc;
  EncoderParams<Scalar> encoder;
  ScatterMode scatter = ScatterMode::add;

  std::size_t c_mid() const { return conv1.out_channels; }
  void validate() const;

  template <typename F>
  void visit(F&& f) {
    conv1.visit("conv1", f);
    conv2.visit("conv2", f);
    lcfe.visit(f);
    gcfc.visit(f);
    encoder.visit(f);
    conv3.visit("conv3", f);
  }
  template <typename F>
  void visit(F&& f) const {
    conv1.visit("conv1", f);
    conv2.visit("conv2", f);
    lcfe.visit(f);
    gcfc.visit(f);
    encoder.visit(f);
    conv3.visit("conv3", f);
  }
};

/// All randomness is drawn from one generator seeded with `seed`.
template <typename Scalar>
CcaParams<Scalar> make_cca_params(const CcaConfig& config, std::uint64_t seed);

/// Sets every convolution/linear weight to zero; biases and layer-norm
/// affine parameters are left untouched.
template <typename Scalar>
void zero_weights(CcaParams<Scalar>& params);

/// Records how a token matrix maps back onto a feature map.
struct TokenLayout {
  std::size_t height = 0, width = 0;
  std::vector<Position> keys;

  std::size_t local_tokens() const { return height * width; }
  std::size_t token_count() const { return local_tokens() + keys.size(); }
};

template <typename Scalar>
struct AssembledTokens {
  TokenMatrix<Scalar> tokens;
  TokenLayout layout;
};

/// One token per pixel of batch element `batch` of f_lc in row-major order,
/// followed by the key features in map order.
template <typename Scalar>
AssembledTokens<Scalar> assemble_tokens(const Tensor<Scalar>& f_lc, std::size_t batch,
                                        const KeyFeatureSet<Scalar>& keys);

/// Exact inverse of assemble_tokens: (1 x C x H x W map, n x C key features).
template <typename Scalar>
std::pair<Tensor<Scalar>, Matrix<Scalar>> disassemble_tokens(const TokenMatrix<Scalar>& tokens,
                                                             const TokenLayout& layout);

/// Reshapes the local tokens to a 1 x C x H x W map and scatters each key
/// token onto its recorded position.
template <typename Scalar>
Tensor<Scalar> reassemble_spatial(const TokenMatrix<Scalar>& tokens, const TokenLayout& layout,
                                  ScatterMode mode = ScatterMode::add);

/// Gradient of reassemble_spatial with respect to its token input.
template <typename Scalar>
TokenMatrix<Scalar> reassemble_spatial_backward(const Tensor<Scalar>& upstream,
                                                const TokenLayout& layout, ScatterMode mode);

template <typename Scalar>
struct CcaTrace {
  Tensor<Scalar> f1, f2;
  LcfeTrace<Scalar> lcfe;
  GcfcTrace<Scalar> gcfc;
  std::vector<TokenLayout> layouts;
  std::vector<TokenMatrix<Scalar>> tokens;
  std::vector<EncoderTrace<Scalar>> encoder;
  Tensor<Scalar> context;  // reassembled f_t, c_mid channels
  Tensor<Scalar> fused;    // concat(context, f2)
  Tensor<Scalar> output;
};

template <typename Scalar>
Tensor<Scalar> cca_forward(const Tensor<Scalar>& f, const CcaParams<Scalar>& params);

template <typename Scalar>
CcaTrace<Scalar> cca_forward_traced(const Tensor<Scalar>& f, const CcaParams<Scalar>& params);

template <typename Scalar>
struct CcaGrads {
  Tensor<Scalar> input;
  CcaParams<Scalar> params;
};

template <typename Scalar>
CcaGrads<Scalar> cca_backward(const Tensor<Scalar>& f, const CcaParams<Scalar>& params,
                              const CcaTrace<Scalar>& trace, const Tensor<Scalar>& upstream);

// ---------------------------------------------------------------------------
// Accounting. Parameters are weights plus biases; FLOPs are 2 x multiply-
// accumulates of convolutions and matrix products (attention includes the
// QKᵀ and AV products). Normalization, activations and softmax are not
// counted.

struct StageTally {
  std::string stage;
  std::uint64_t count = 0;
};

struct CostTable {
  std::vector<StageTally> stages;
  std::uint64_t total() const;
};

CostTable param_count(const CcaConfig& config);
CostTable flop_count(const CcaConfig& config, const Shape& input);

/// Closed-form parameter count of an LCFE block with `channels` channels.
std::uint64_t lcfe_param_count(std::size_t channels, bool bias = true);

}  // namespace cca
