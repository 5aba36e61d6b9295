// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#include "cca/linalg.hpp"

#include <cmath>

namespace cca {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

std::string dims(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

template <typename Scalar>
Matrix<Scalar> matmul(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  require(a.cols() == b.rows(),
          "matmul: " + dims(a.rows(), a.cols()) + " * " + dims(b.rows(), b.cols()));
  Matrix<Scalar> c = Matrix<Scalar>::Zero(a.rows(), b.cols());
  for (Eigen::Index k = 0; k < a.cols(); ++k) c.noalias() += a.col(k) * b.row(k);
  return c;
}

template <typename Scalar>
TokenMatrix<Scalar> linear(const TokenMatrix<Scalar>& tokens, const Matrix<Scalar>& weight,
                           const Vector<Scalar>& bias) {
  require(tokens.cols() == weight.cols(), "linear: tokens of width " +
                                              std::to_string(tokens.cols()) + " into weight " +
                                              dims(weight.rows(), weight.cols()));
  require(bias.size() == weight.rows(), "linear: bias length does not match output width");
  TokenMatrix<Scalar> out = matmul<Scalar>(tokens, weight.transpose());
  out.rowwise() += bias.transpose();
  return out;
}

template <typename Scalar>
LinearGrads<Scalar> linear_backward(const TokenMatrix<Scalar>& tokens,
                                    const Matrix<Scalar>& weight,
                                    const TokenMatrix<Scalar>& upstream) {
  require(upstream.rows() == tokens.rows() && upstream.cols() == weight.rows(),
          "linear_backward: upstream " + dims(upstream.rows(), upstream.cols()));
  LinearGrads<Scalar> g;
  g.input = upstream * weight;
  g.weight = upstream.transpose() * tokens;
  g.bias = upstream.colwise().sum().transpose();
  return g;
}

template <typename Scalar>
TokenMatrix<Scalar> layer_norm(const TokenMatrix<Scalar>& tokens, const Vector<Scalar>& gamma,
                               const Vector<Scalar>& beta, Scalar eps) {
  require(eps > Scalar(0), "layer_norm: eps must be positive");
  require(gamma.size() == tokens.cols() && beta.size() == tokens.cols(),
          "layer_norm: affine parameters do not match token width");
  const Eigen::Index width = tokens.cols();
  TokenMatrix<Scalar> out(tokens.rows(), width);
  for (Eigen::Index t = 0; t < tokens.rows(); ++t) {
    Scalar mean = 0;
    for (Eigen::Index c = 0; c < width; ++c) mean += tokens(t, c);
    mean /= Scalar(width);
    Scalar var = 0;
    for (Eigen::Index c = 0; c < width; ++c) {
      const Scalar d = tokens(t, c) - mean;
      var += d * d;
    }
    var /= Scalar(width);
    const Scalar inv = Scalar(1) / std::sqrt(var + eps);
    for (Eigen::Index c = 0; c < width; ++c) {
      out(t, c) = (tokens(t, c) - mean) * inv * gamma(c) + beta(c);
    }
  }
  return out;
}

template <typename Scalar>
LayerNormGrads<Scalar> layer_norm_backward(const TokenMatrix<Scalar>& tokens,
                                           const Vector<Scalar>& gamma, Scalar eps,
                                           const TokenMatrix<Scalar>& upstream) {
  require(upstream.rows() == tokens.rows() && upstream.cols() == tokens.cols(),
          "layer_norm_backward: upstream " + dims(upstream.rows(), upstream.cols()));
  const Eigen::Index width = tokens.cols();
  LayerNormGrads<Scalar> g{TokenMatrix<Scalar>(tokens.rows(), width), Vector<Scalar>::Zero(width),
                           Vector<Scalar>::Zero(width)};
  for (Eigen::Index t = 0; t < tokens.rows(); ++t) {
    const auto row = tokens.row(t);
    const Scalar mean = row.mean();
    const Scalar var = (row.array() - mean).square().mean();
    const Scalar inv = Scalar(1) / std::sqrt(var + eps);
    const Eigen::Array<Scalar, 1, Eigen::Dynamic> xhat = (row.array() - mean) * inv;
    const auto dy = upstream.row(t).array();
    g.gamma.array() += (dy * xhat).transpose();
    g.beta.array() += dy.transpose();
    const Eigen::Array<Scalar, 1, Eigen::Dynamic> dxhat = dy * gamma.transpose().array();
    g.input.row(t) =
        (inv * (dxhat - dxhat.mean() - xhat * (dxhat * xhat).mean())).matrix();
  }
  return g;
}

template <typename Scalar>
Matrix<Scalar> gelu(const Matrix<Scalar>& x) {
  const Scalar inv_sqrt2 = Scalar(1) / std::sqrt(Scalar(2));
  return x.unaryExpr([inv_sqrt2](Scalar v) {
    return Scalar(0.5) * v * (Scalar(1) + std::erf(v * inv_sqrt2));
  });
}

template <typename Scalar>
Matrix<Scalar> gelu_backward(const Matrix<Scalar>& x, const Matrix<Scalar>& upstream) {
  require(x.rows() == upstream.rows() && x.cols() == upstream.cols(),
          "gelu_backward: upstream " + dims(upstream.rows(), upstream.cols()));
  const Scalar inv_sqrt2 = Scalar(1) / std::sqrt(Scalar(2));
  const Scalar inv_sqrt2pi = Scalar(1) / std::sqrt(Scalar(2 * M_PI));
  const Matrix<Scalar> d = x.unaryExpr([=](Scalar v) {
    return Scalar(0.5) * (Scalar(1) + std::erf(v * inv_sqrt2)) +
           v * inv_sqrt2pi * std::exp(Scalar(-0.5) * v * v);
  });
  return d.cwiseProduct(upstream);
}

template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& x) {
  Matrix<Scalar> out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Scalar m = x(r, 0);
    for (Eigen::Index c = 1; c < x.cols(); ++c) m = std::max(m, x(r, c));
    Scalar sum = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      out(r, c) = std::exp(x(r, c) - m);
      sum += out(r, c);
    }
    for (Eigen::Index c = 0; c < x.cols(); ++c) out(r, c) /= sum;
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> softmax_rows_backward(const Matrix<Scalar>& y, const Matrix<Scalar>& upstream) {
  require(y.rows() == upstream.rows() && y.cols() == upstream.cols(),
          "softmax_rows_backward: upstream " + dims(upstream.rows(), upstream.cols()));
  const Vector<Scalar> dots = y.cwiseProduct(upstream).rowwise().sum();
  return y.cwiseProduct(upstream - dots.replicate(1, y.cols()));
}

#define CCA_INSTANTIATE(S)                                                                   \
  template Matrix<S> matmul<S>(const Matrix<S>&, const Matrix<S>&);                          \
  template TokenMatrix<S> linear<S>(const TokenMatrix<S>&, const Matrix<S>&,                 \
                                    const Vector<S>&);                                       \
  template LinearGrads<S> linear_backward<S>(const TokenMatrix<S>&, const Matrix<S>&,        \
                                             const TokenMatrix<S>&);                         \
  template TokenMatrix<S> layer_norm<S>(const TokenMatrix<S>&, const Vector<S>&,             \
                                        const Vector<S>&, S);                                \
  template LayerNormGrads<S> layer_norm_backward<S>(const TokenMatrix<S>&, const Vector<S>&, \
                                                    S, const TokenMatrix<S>&);               \
  template Matrix<S> gelu<S>(const Matrix<S>&);                                              \
  template Matrix<S> gelu_backward<S>(const Matrix<S>&, const Matrix<S>&);                   \
  template Matrix<S> softmax_rows<S>(const Matrix<S>&);                                      \
  template Matrix<S> softmax_rows_backward<S>(const Matrix<S>&, const Matrix<S>&);
CCA_INSTANTIATE(float)
CCA_INSTANTIATE(double)
#undef CCA_INSTANTIATE

}  // namespace cca
