// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#include "cca/conv.hpp"

#include <cmath>

namespace cca {

namespace {

std::size_t out_extent(std::size_t in, std::size_t pad, std::size_t dilation, std::size_t k,
                       std::size_t stride, const char* axis) {
  const long long span = static_cast<long long>(dilation * (k - 1) + 1);
  const long long padded = static_cast<long long>(in + 2 * pad);
  if (stride == 0 || dilation == 0 || k == 0 || padded < span) {
    throw ShapeError(std::string("conv2d: empty output along ") + axis);
  }
  return static_cast<std::size_t>((padded - span) / static_cast<long long>(stride)) + 1;
}

// Rows are (c, ky, kx) in that nesting order, columns are output pixels.
template <typename Scalar>
Matrix<Scalar> im2col(const Tensor<Scalar>& x, std::size_t n, const ConvSpec<Scalar>& spec,
                      std::size_t ho, std::size_t wo) {
  const auto& s = x.shape();
  Matrix<Scalar> col(Eigen::Index(spec.kernel_volume()), Eigen::Index(ho * wo));
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < s.c; ++c) {
    for (std::size_t ky = 0; ky < spec.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < spec.kernel_w; ++kx, ++row) {
        Scalar* dst = col.row(row).data();
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long long iy = static_cast<long long>(oy * spec.stride + ky * spec.dilation) -
                               static_cast<long long>(spec.padding);
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long long ix = static_cast<long long>(ox * spec.stride + kx * spec.dilation) -
                                 static_cast<long long>(spec.padding);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long long>(s.h) &&
                                ix < static_cast<long long>(s.w);
            dst[oy * wo + ox] = inside ? x(n, c, std::size_t(iy), std::size_t(ix)) : Scalar(0);
          }
        }
      }
    }
  }
  return col;
}

template <typename Scalar>
void col2im_add(const Matrix<Scalar>& col, Tensor<Scalar>& dx, std::size_t n,
                const ConvSpec<Scalar>& spec, std::size_t ho, std::size_t wo) {
  const auto& s = dx.shape();
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < s.c; ++c) {
    for (std::size_t ky = 0; ky < spec.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < spec.kernel_w; ++kx, ++row) {
        const Scalar* src = col.row(row).data();
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long long iy = static_cast<long long>(oy * spec.stride + ky * spec.dilation) -
                               static_cast<long long>(spec.padding);
          if (iy < 0 || iy >= static_cast<long long>(s.h)) continue;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long long ix = static_cast<long long>(ox * spec.stride + kx * spec.dilation) -
                                 static_cast<long long>(spec.padding);
            if (ix < 0 || ix >= static_cast<long long>(s.w)) continue;
            dx(n, c, std::size_t(iy), std::size_t(ix)) += src[oy * wo + ox];
          }
        }
      }
    }
  }
}

template <typename Scalar>
ConstMatrixMap<Scalar> weight_matrix(const ConvSpec<Scalar>& spec) {
  return {spec.weights.raw(), Eigen::Index(spec.out_channels), Eigen::Index(spec.kernel_volume())};
}

}  // namespace

template <typename Scalar>
Shape ConvSpec<Scalar>::output_shape(const Shape& in) const {
  if (in.c != in_channels) {
    throw ShapeError("conv2d: input has " + std::to_string(in.c) + " channels, layer expects " +
                     std::to_string(in_channels));
  }
  return {in.n, out_channels, out_extent(in.h, padding, dilation, kernel_h, stride, "height"),
          out_extent(in.w, padding, dilation, kernel_w, stride, "width")};
}

template <typename Scalar>
ConvSpec<Scalar> make_conv(const ConvGeometry& g, Rng& rng) {
  ConvSpec<Scalar> spec;
  spec.in_channels = g.in_channels;
  spec.out_channels = g.out_channels;
  spec.kernel_h = spec.kernel_w = g.kernel;
  spec.stride = g.stride;
  spec.padding = g.padding;
  spec.dilation = g.dilation;
  spec.weights = Tensor<Scalar>({g.out_channels, g.in_channels, g.kernel, g.kernel});
  const double bound = 1.0 / std::sqrt(double(spec.kernel_volume()));
  rng.fill_uniform(spec.weights.data(), -bound, bound);
  if (g.bias) {
    spec.bias = Vector<Scalar>(Eigen::Index(g.out_channels));
    rng.fill_uniform(std::span<Scalar>(spec.bias.data(), spec.bias.size()), -bound, bound);
  }
  return spec;
}

template <typename Scalar>
ConvSpec<Scalar> zeros_like(const ConvSpec<Scalar>& spec) {
  ConvSpec<Scalar> out = spec;
  out.weights.set_zero();
  out.bias.setZero();
  return out;
}

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const ConvSpec<Scalar>& spec) {
  const Shape os = spec.output_shape(x.shape());
  if (spec.weights.size() != spec.out_channels * spec.kernel_volume()) {
    throw ShapeError("conv2d: weight tensor does not match layer geometry");
  }
  Tensor<Scalar> out(os);
  const auto w = weight_matrix(spec);
  for (std::size_t n = 0; n < os.n; ++n) {
    const Matrix<Scalar> col = im2col(x, n, spec, os.h, os.w);
    auto y = out.batch_matrix(n);
    for (Eigen::Index k = 0; k < col.rows(); ++k) {
      y.noalias() += w.col(k) * col.row(k);
    }
    if (spec.has_bias()) y.colwise() += spec.bias;
  }
  return out;
}

template <typename Scalar>
ConvGrads<Scalar> conv2d_backward(const Tensor<Scalar>& x, const ConvSpec<Scalar>& spec,
                                  const Tensor<Scalar>& upstream) {
  const Shape os = spec.output_shape(x.shape());
  if (upstream.shape() != os) {
    throw ShapeError("conv2d_backward: upstream gradient " + to_string(upstream.shape()) +
                     " does not match output " + to_string(os));
  }
  ConvGrads<Scalar> g{Tensor<Scalar>(x.shape()), Tensor<Scalar>(spec.weights.shape()),
                      Vector<Scalar>::Zero(spec.bias.size())};
  const auto w = weight_matrix(spec);
  MatrixMap<Scalar> dw(g.weights.raw(), Eigen::Index(spec.out_channels),
                       Eigen::Index(spec.kernel_volume()));
  for (std::size_t n = 0; n < os.n; ++n) {
    const Matrix<Scalar> col = im2col(x, n, spec, os.h, os.w);
    const auto dy = upstream.batch_matrix(n);
    dw.noalias() += dy * col.transpose();
    if (spec.has_bias()) g.bias += dy.rowwise().sum();
    const Matrix<Scalar> dcol = w.transpose() * dy;
    col2im_add(dcol, g.input, n, spec, os.h, os.w);
  }
  return g;
}

template <typename Scalar>
void accumulate(ConvSpec<Scalar>& acc, const ConvGrads<Scalar>& grads) {
  auto dst = acc.weights.data();
  auto src = grads.weights.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  if (acc.has_bias()) acc.bias += grads.bias;
}

#define CCA_INSTANTIATE(S)                                                                 \
  template struct ConvSpec<S>;                                                             \
  template ConvSpec<S> make_conv<S>(const ConvGeometry&, Rng&);                            \
  template ConvSpec<S> zeros_like<S>(const ConvSpec<S>&);                                  \
  template Tensor<S> conv2d<S>(const Tensor<S>&, const ConvSpec<S>&);                      \
  template ConvGrads<S> conv2d_backward<S>(const Tensor<S>&, const ConvSpec<S>&,           \
                                           const Tensor<S>&);                              \
  template void accumulate<S>(ConvSpec<S>&, const ConvGrads<S>&);
CCA_INSTANTIATE(float)
CCA_INSTANTIATE(double)
#undef CCA_INSTANTIATE

}  // namespace cca
