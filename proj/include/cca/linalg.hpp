// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cca/tensor.hpp"

namespace cca {

/// Matrix product accumulated as a sequence of rank-1 updates, so each
/// entry is summed over the inner index in ascending order.
template <typename Scalar>
Matrix<Scalar> matmul(const Matrix<Scalar>& a, const Matrix<Scalar>& b);

/// tokens * weightᵀ + bias, with weight stored out x in.
template <typename Scalar>
TokenMatrix<Scalar> linear(const TokenMatrix<Scalar>& tokens, const Matrix<Scalar>& weight,
                           const Vector<Scalar>& bias);

template <typename Scalar>
struct LinearGrads {
  TokenMatrix<Scalar> input;
  Matrix<Scalar> weight;
  Vector<Scalar> bias;
};

template <typename Scalar>
LinearGrads<Scalar> linear_backward(const TokenMatrix<Scalar>& tokens,
                                    const Matrix<Scalar>& weight,
                                    const TokenMatrix<Scalar>& upstream);

/// Normalizes each row to zero mean and unit (biased) variance, then applies
/// the per-column affine map.
template <typename Scalar>
TokenMatrix<Scalar> layer_norm(const TokenMatrix<Scalar>& tokens, const Vector<Scalar>& gamma,
                               const Vector<Scalar>& beta, Scalar eps);

template <typename Scalar>
struct LayerNormGrads {
  TokenMatrix<Scalar> input;
  Vector<Scalar> gamma;
  Vector<Scalar> beta;
};

template <typename Scalar>
LayerNormGrads<Scalar> layer_norm_backward(const TokenMatrix<Scalar>& tokens,
                                           const Vector<Scalar>& gamma, Scalar eps,
                                           const TokenMatrix<Scalar>& upstream);

/// Exact (erf) GELU.
template <typename Scalar>
Matrix<Scalar> gelu(const Matrix<Scalar>& x);
template <typename Scalar>
Matrix<Scalar> gelu_backward(const Matrix<Scalar>& x, const Matrix<Scalar>& upstream);

/// Row-wise softmax (max-subtracted).
template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& x);
template <typename Scalar>
Matrix<Scalar> softmax_rows_backward(const Matrix<Scalar>& y, const Matrix<Scalar>& upstream);

}  // namespace cca
