// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#include "cca/ops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cca {

std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << s.n << 'x' << s.c << 'x' << s.h << 'x' << s.w;
  return os.str();
}

template <typename Scalar>
Scalar max_abs_diff(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  Scalar m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

template <typename Scalar>
bool all_finite(std::span<const Scalar> values) {
  return std::all_of(values.begin(), values.end(), [](Scalar v) { return std::isfinite(v); });
}

namespace {

template <typename Scalar>
void require_same(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

template <typename Scalar, typename F>
Tensor<Scalar> zip(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* op, F f) {
  require_same(a, b, op);
  Tensor<Scalar> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = f(a.data()[i], b.data()[i]);
  return out;
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return zip(a, b, "add", [](Scalar u, Scalar v) { return u + v; });
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return zip(a, b, "mul", [](Scalar u, Scalar v) { return u * v; });
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar factor) {
  Tensor<Scalar> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * factor;
  return out;
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x) {
  Tensor<Scalar> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = logistic(x.data()[i]);
  return out;
}

template <typename Scalar>
Tensor<Scalar> sigmoid_backward(const Tensor<Scalar>& y, const Tensor<Scalar>& upstream) {
  return zip(y, upstream, "sigmoid_backward",
             [](Scalar s, Scalar g) { return g * s * (Scalar(1) - s); });
}

template <typename Scalar>
Tensor<Scalar> softmax_channels(const Tensor<Scalar>& x) {
  const Shape s = x.shape();
  if (s.c == 0) throw ShapeError("softmax_channels: no channels");
  Tensor<Scalar> out(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t p = 0; p < s.plane(); ++p) {
      const std::size_t y = p / s.w, xx = p % s.w;
      Scalar m = x(n, 0, y, xx);
      for (std::size_t c = 1; c < s.c; ++c) m = std::max(m, x(n, c, y, xx));
      Scalar sum = 0;
      for (std::size_t c = 0; c < s.c; ++c) {
        const Scalar e = std::exp(x(n, c, y, xx) - m);
        out(n, c, y, xx) = e;
        sum += e;
      }
      for (std::size_t c = 0; c < s.c; ++c) out(n, c, y, xx) /= sum;
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> softmax_channels_backward(const Tensor<Scalar>& y, const Tensor<Scalar>& upstream) {
  require_same(y, upstream, "softmax_channels_backward");
  const Shape s = y.shape();
  Tensor<Scalar> dx(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t yy = 0; yy < s.h; ++yy) {
      for (std::size_t xx = 0; xx < s.w; ++xx) {
        Scalar dot = 0;
        for (std::size_t c = 0; c < s.c; ++c) dot += y(n, c, yy, xx) * upstream(n, c, yy, xx);
        for (std::size_t c = 0; c < s.c; ++c)
          dx(n, c, yy, xx) = y(n, c, yy, xx) * (upstream(n, c, yy, xx) - dot);
      }
    }
  }
  return dx;
}

template <typename Scalar>
Tensor<Scalar> concat_channels(std::span<const Tensor<Scalar>> xs) {
  if (xs.empty()) throw ShapeError("concat_channels: empty input list");
  Shape out_shape = xs.front().shape();
  out_shape.c = 0;
  for (const auto& t : xs) {
    const Shape& s = t.shape();
    if (s.n != out_shape.n || s.h != out_shape.h || s.w != out_shape.w) {
      throw ShapeError("concat_channels: " + to_string(s) + " does not match " +
                       to_string(xs.front().shape()) + " outside the channel axis");
    }
    out_shape.c += s.c;
  }
  Tensor<Scalar> out(out_shape);
  for (std::size_t n = 0; n < out_shape.n; ++n) {
    Eigen::Index row = 0;
    auto dst = out.batch_matrix(n);
    for (const auto& t : xs) {
      dst.middleRows(row, Eigen::Index(t.shape().c)) = t.batch_matrix(n);
      row += Eigen::Index(t.shape().c);
    }
  }
  return out;
}

template <typename Scalar>
std::vector<Tensor<Scalar>> split_channels(const Tensor<Scalar>& x, std::size_t groups) {
  const Shape s = x.shape();
  if (groups == 0 || s.c % groups != 0) {
    throw ShapeError("split_channels: " + std::to_string(s.c) + " channels not divisible by " +
                     std::to_string(groups));
  }
  const std::size_t per = s.c / groups;
  std::vector<Tensor<Scalar>> out;
  out.reserve(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    Tensor<Scalar> part({s.n, per, s.h, s.w});
    for (std::size_t n = 0; n < s.n; ++n) {
      part.batch_matrix(n) = x.batch_matrix(n).middleRows(Eigen::Index(g * per), Eigen::Index(per));
    }
    out.push_back(std::move(part));
  }
  return out;
}

template <typename Scalar>
MaxPoolResult<Scalar> global_max_pool_argmax(const Tensor<Scalar>& x) {
  const Shape s = x.shape();
  if (s.plane() == 0) throw ShapeError("global_max_pool_argmax: empty spatial extent");
  MaxPoolResult<Scalar> r;
  r.batch = s.n;
  r.channels = s.c;
  r.scores.reserve(s.n * s.c);
  r.positions.reserve(s.n * s.c);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const Scalar* plane = x.raw() + x.index(n, c, 0, 0);
      // strict > keeps the first occurrence of the maximum
      std::size_t best = 0;
      for (std::size_t i = 1; i < s.plane(); ++i) {
        if (plane[i] > plane[best]) best = i;
      }
      r.scores.push_back(plane[best]);
      r.positions.push_back({best % s.w, best / s.w});
    }
  }
  return r;
}

template <typename Scalar>
Tensor<Scalar> global_max_pool_backward(const Shape& input, const MaxPoolResult<Scalar>& pooled,
                                        std::span<const Scalar> score_grads) {
  if (pooled.batch != input.n || pooled.channels != input.c ||
      score_grads.size() != input.n * input.c) {
    throw ShapeError("global_max_pool_backward: gradient count does not match pooled input");
  }
  Tensor<Scalar> dx(input);
  for (std::size_t n = 0; n < input.n; ++n) {
    for (std::size_t c = 0; c < input.c; ++c) {
      const Position p = pooled.position(n, c);
      dx(n, c, p.y, p.x) += score_grads[n * input.c + c];
    }
  }
  return dx;
}

#define CCA_INSTANTIATE(S)                                                                  \
  template S max_abs_diff<S>(const Tensor<S>&, const Tensor<S>&);                           \
  template bool all_finite<S>(std::span<const S>);                                          \
  template Tensor<S> add<S>(const Tensor<S>&, const Tensor<S>&);                            \
  template Tensor<S> mul<S>(const Tensor<S>&, const Tensor<S>&);                            \
  template Tensor<S> scale<S>(const Tensor<S>&, S);                                         \
  template Tensor<S> sigmoid<S>(const Tensor<S>&);                                          \
  template Tensor<S> sigmoid_backward<S>(const Tensor<S>&, const Tensor<S>&);               \
  template Tensor<S> softmax_channels<S>(const Tensor<S>&);                                 \
  template Tensor<S> softmax_channels_backward<S>(const Tensor<S>&, const Tensor<S>&);      \
  template Tensor<S> concat_channels<S>(std::span<const Tensor<S>>);                        \
  template std::vector<Tensor<S>> split_channels<S>(const Tensor<S>&, std::size_t);         \
  template MaxPoolResult<S> global_max_pool_argmax<S>(const Tensor<S>&);                    \
  template Tensor<S> global_max_pool_backward<S>(const Shape&, const MaxPoolResult<S>&,     \
                                                 std::span<const S>);
CCA_INSTANTIATE(float)
CCA_INSTANTIATE(double)
#undef CCA_INSTANTIATE

}  // namespace cca
