#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>

#include "funkan/tensor.hpp"

namespace funkan {

enum class ElementwiseKind { add, sub, mul, div };

namespace detail {

inline const char* kind_name(ElementwiseKind kind) {
  switch (kind) {
    case ElementwiseKind::add: return "add";
    case ElementwiseKind::sub: return "sub";
    case ElementwiseKind::mul: return "mul";
    case ElementwiseKind::div: return "div";
  }
  return "?";
}

inline void require_rank(const Shape& shape, std::size_t rank, const char* op) {
  if (shape.size() != rank)
    throw ShapeError(std::string(op) + ": expected a rank-" + std::to_string(rank) + " tensor, got " +
                     to_string(shape));
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> elementwise(const Tensor<Scalar>& a, const Tensor<Scalar>& b, ElementwiseKind kind) {
  using Array = typename Tensor<Scalar>::Array;
  if (a.shape() != b.shape())
    throw ShapeError(std::string(detail::kind_name(kind)) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  auto pa = a.impl();
  auto pb = b.impl();
  Array out;
  switch (kind) {
    case ElementwiseKind::add: out = a.data() + b.data(); break;
    case ElementwiseKind::sub: out = a.data() - b.data(); break;
    case ElementwiseKind::mul: out = a.data() * b.data(); break;
    case ElementwiseKind::div: out = a.data() / b.data(); break;
  }
  return Tensor<Scalar>::make_result(a.shape(), std::move(out), detail::kind_name(kind), {a, b},
                                     [pa, pb, kind](const Array& g, const Array& y) {
                                       switch (kind) {
                                         case ElementwiseKind::add:
                                           detail::accumulate(*pa, g);
                                           detail::accumulate(*pb, g);
                                           break;
                                         case ElementwiseKind::sub:
                                           detail::accumulate(*pa, g);
                                           detail::accumulate(*pb, -g);
                                           break;
                                         case ElementwiseKind::mul:
                                           detail::accumulate(*pa, g * pb->data);
                                           detail::accumulate(*pb, g * pa->data);
                                           break;
                                         case ElementwiseKind::div:
                                           detail::accumulate(*pa, g / pb->data);
                                           detail::accumulate(*pb, -g * y / pb->data);
                                           break;
                                       }
                                     });
}

template <typename Scalar>
Tensor<Scalar> elementwise(const Tensor<Scalar>& a, Scalar b, ElementwiseKind kind) {
  using Array = typename Tensor<Scalar>::Array;
  auto pa = a.impl();
  Array out;
  Scalar slope = Scalar(1);
  switch (kind) {
    case ElementwiseKind::add: out = a.data() + b; break;
    case ElementwiseKind::sub: out = a.data() - b; break;
    case ElementwiseKind::mul: out = a.data() * b; slope = b; break;
    case ElementwiseKind::div: out = a.data() / b; slope = Scalar(1) / b; break;
  }
  return Tensor<Scalar>::make_result(a.shape(), std::move(out), detail::kind_name(kind), {a},
                                     [pa, slope](const Array& g, const Array&) {
                                       detail::accumulate(*pa, g * slope);
                                     });
}

template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return elementwise(a, b, ElementwiseKind::add);
}
template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return elementwise(a, b, ElementwiseKind::sub);
}
template <typename Scalar>
Tensor<Scalar> operator*(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return elementwise(a, b, ElementwiseKind::mul);
}
template <typename Scalar>
Tensor<Scalar> operator/(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return elementwise(a, b, ElementwiseKind::div);
}
template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, Scalar b) {
  return elementwise(a, b, ElementwiseKind::add);
}
template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a, Scalar b) {
  return elementwise(a, b, ElementwiseKind::sub);
}
template <typename Scalar>
Tensor<Scalar> operator*(const Tensor<Scalar>& a, Scalar b) {
  return elementwise(a, b, ElementwiseKind::mul);
}
template <typename Scalar>
Tensor<Scalar> operator*(Scalar b, const Tensor<Scalar>& a) {
  return elementwise(a, b, ElementwiseKind::mul);
}
template <typename Scalar>
Tensor<Scalar> operator/(const Tensor<Scalar>& a, Scalar b) {
  return elementwise(a, b, ElementwiseKind::div);
}

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& x) {
  using Array = typename Tensor<Scalar>::Array;
  auto px = x.impl();
  Array out = Array::Constant(1, x.data().sum());
  return Tensor<Scalar>::make_result({1}, std::move(out), "sum", {x}, [px](const Array& g, const Array&) {
    detail::accumulate(*px, Array::Constant(px->data.size(), g[0]));
  });
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& x) {
  return sum(x) / Scalar(x.numel());
}

template <typename Scalar>
Tensor<Scalar> square(const Tensor<Scalar>& x) {
  using Array = typename Tensor<Scalar>::Array;
  auto px = x.impl();
  return Tensor<Scalar>::make_result(x.shape(), x.data().square(), "square", {x},
                                     [px](const Array& g, const Array&) {
                                       detail::accumulate(*px, Scalar(2) * g * px->data);
                                     });
}

/// Sums each sample of a batched tensor: [N, ...] -> [N].
template <typename Scalar>
Tensor<Scalar> sum_per_sample(const Tensor<Scalar>& x) {
  using Array = typename Tensor<Scalar>::Array;
  const Index n = x.dim(0);
  const Index per = x.numel() / n;
  auto px = x.impl();
  Array out(n);
  for (Index i = 0; i < n; ++i) out[i] = x.data().segment(i * per, per).sum();
  return Tensor<Scalar>::make_result({n}, std::move(out), "sum_per_sample", {x},
                                     [px, n, per](const Array& g, const Array&) {
                                       Array d(n * per);
                                       for (Index i = 0; i < n; ++i) d.segment(i * per, per).setConstant(g[i]);
                                       detail::accumulate(*px, d);
                                     });
}

// Subgradient 0 at 0.
template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  using Array = typename Tensor<Scalar>::Array;
  auto px = x.impl();
  return Tensor<Scalar>::make_result(x.shape(), x.data().max(Scalar(0)), "relu", {x},
                                     [px](const Array& g, const Array&) {
                                       detail::accumulate(*px, (px->data > Scalar(0)).select(g, Scalar(0)));
                                     });
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x) {
  using Array = typename Tensor<Scalar>::Array;
  auto px = x.impl();
  Array out = x.data().unaryExpr([](Scalar v) {
    return v >= 0 ? Scalar(1) / (Scalar(1) + std::exp(-v)) : std::exp(v) / (Scalar(1) + std::exp(v));
  });
  return Tensor<Scalar>::make_result(x.shape(), std::move(out), "sigmoid", {x},
                                     [px](const Array& g, const Array& y) {
                                       detail::accumulate(*px, g * y * (Scalar(1) - y));
                                     });
}

/// Per-element binary cross-entropy of sigmoid(logits) against binary targets,
/// in the overflow-free form max(z,0) - z*t + log(1 + exp(-|z|)).
template <typename Scalar>
Tensor<Scalar> bce_with_logits(const Tensor<Scalar>& logits, const Tensor<Scalar>& target) {
  using Array = typename Tensor<Scalar>::Array;
  if (logits.shape() != target.shape())
    throw ShapeError("bce_with_logits: shape mismatch " + to_string(logits.shape()) + " vs " +
                     to_string(target.shape()));
  const Array& z = logits.data();
  const Array& t = target.data();
  Array out = z.max(Scalar(0)) - z * t + (Scalar(1) + (-z.abs()).exp()).log();
  auto pz = logits.impl();
  auto pt = target.impl();
  return Tensor<Scalar>::make_result(logits.shape(), std::move(out), "bce_with_logits", {logits, target},
                                     [pz, pt](const Array& g, const Array&) {
                                       Array p = pz->data.unaryExpr([](Scalar v) {
                                         return v >= 0 ? Scalar(1) / (Scalar(1) + std::exp(-v))
                                                       : std::exp(v) / (Scalar(1) + std::exp(v));
                                       });
                                       detail::accumulate(*pz, g * (p - pt->data));
                                       detail::accumulate(*pt, -g * pz->data);
                                     });
}

/// Numerically shifted softmax along one axis of an arbitrary-rank tensor.
template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& x, std::size_t axis) {
  using Array = typename Tensor<Scalar>::Array;
  if (axis >= x.rank())
    throw ShapeError("softmax: axis " + std::to_string(axis) + " out of range for shape " + to_string(x.shape()));
  Index outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const Index len = x.dim(axis);
  Array out(x.numel());
  const Array& in = x.data();
  for (Index o = 0; o < outer; ++o)
    for (Index i = 0; i < inner; ++i) {
      const Index base = o * len * inner + i;
      Scalar mx = in[base];
      for (Index k = 1; k < len; ++k) mx = std::max(mx, in[base + k * inner]);
      Scalar total = 0;
      for (Index k = 0; k < len; ++k) total += (out[base + k * inner] = std::exp(in[base + k * inner] - mx));
      for (Index k = 0; k < len; ++k) out[base + k * inner] /= total;
    }
  auto px = x.impl();
  return Tensor<Scalar>::make_result(x.shape(), std::move(out), "softmax", {x},
                                     [px, outer, inner, len](const Array& g, const Array& y) {
                                       Array d(y.size());
                                       for (Index o = 0; o < outer; ++o)
                                         for (Index i = 0; i < inner; ++i) {
                                           const Index base = o * len * inner + i;
                                           Scalar dot = 0;
                                           for (Index k = 0; k < len; ++k)
                                             dot += g[base + k * inner] * y[base + k * inner];
                                           for (Index k = 0; k < len; ++k)
                                             d[base + k * inner] = y[base + k * inner] * (g[base + k * inner] - dot);
                                         }
                                       detail::accumulate(*px, d);
                                     });
}

template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  using Array = typename Tensor<Scalar>::Array;
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  detail::require_rank(a.shape(), 2, "matmul");
  detail::require_rank(b.shape(), 2, "matmul");
  const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError("matmul: inner extents differ, " + to_string(a.shape()) + " x " + to_string(b.shape()));
  Array out(m * n);
  Eigen::Map<RowMatrix>(out.data(), m, n).noalias() =
      Eigen::Map<const RowMatrix>(a.data().data(), m, k) * Eigen::Map<const RowMatrix>(b.data().data(), k, n);
  auto pa = a.impl();
  auto pb = b.impl();
  return Tensor<Scalar>::make_result({m, n}, std::move(out), "matmul", {a, b},
                                     [pa, pb, m, k, n](const Array& g, const Array&) {
                                       Eigen::Map<const RowMatrix> G(g.data(), m, n);
                                       Eigen::Map<const RowMatrix> A(pa->data.data(), m, k);
                                       Eigen::Map<const RowMatrix> B(pb->data.data(), k, n);
                                       if (pa->requires_grad) {
                                         Array d(m * k);
                                         Eigen::Map<RowMatrix>(d.data(), m, k).noalias() = G * B.transpose();
                                         detail::accumulate(*pa, d);
                                       }
                                       if (pb->requires_grad) {
                                         Array d(k * n);
                                         Eigen::Map<RowMatrix>(d.data(), k, n).noalias() = A.transpose() * G;
                                         detail::accumulate(*pb, d);
                                       }
                                     });
}

/// Channel range [begin, begin + count) of a [N, C, h, w] tensor.
template <typename Scalar>
Tensor<Scalar> slice_channels(const Tensor<Scalar>& x, Index begin, Index count) {
  using Array = typename Tensor<Scalar>::Array;
  detail::require_rank(x.shape(), 4, "slice_channels");
  const Index n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (begin < 0 || count < 1 || begin + count > c)
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") outside " + std::to_string(c) + " channels");
  Array out(n * count * plane);
  for (Index i = 0; i < n; ++i)
    out.segment(i * count * plane, count * plane) = x.data().segment((i * c + begin) * plane, count * plane);
  auto px = x.impl();
  return Tensor<Scalar>::make_result({n, count, x.dim(2), x.dim(3)}, std::move(out), "slice_channels", {x},
                                     [px, n, c, plane, begin, count](const Array& g, const Array&) {
                                       Array& d = detail::grad_buffer(*px);
                                       for (Index i = 0; i < n; ++i)
                                         d.segment((i * c + begin) * plane, count * plane) +=
                                             g.segment(i * count * plane, count * plane);
                                     });
}

/// Multiplies channel c of a [N, C, h, w] tensor by weights[c].
template <typename Scalar>
Tensor<Scalar> scale_channels(const Tensor<Scalar>& x, const Tensor<Scalar>& weights) {
  using Array = typename Tensor<Scalar>::Array;
  detail::require_rank(x.shape(), 4, "scale_channels");
  const Index n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (weights.numel() != c)
    throw ShapeError("scale_channels: " + std::to_string(weights.numel()) + " weights for " + std::to_string(c) +
                     " channels");
  Array out(x.numel());
  for (Index i = 0; i < n; ++i)
    for (Index ch = 0; ch < c; ++ch) {
      const Index off = (i * c + ch) * plane;
      out.segment(off, plane) = x.data().segment(off, plane) * weights[ch];
    }
  auto px = x.impl();
  auto pw = weights.impl();
  return Tensor<Scalar>::make_result(x.shape(), std::move(out), "scale_channels", {x, weights},
                                     [px, pw, n, c, plane](const Array& g, const Array&) {
                                       if (px->requires_grad) {
                                         Array& d = detail::grad_buffer(*px);
                                         for (Index i = 0; i < n; ++i)
                                           for (Index ch = 0; ch < c; ++ch) {
                                             const Index off = (i * c + ch) * plane;
                                             d.segment(off, plane) += g.segment(off, plane) * pw->data[ch];
                                           }
                                       }
                                       if (pw->requires_grad) {
                                         Array& d = detail::grad_buffer(*pw);
                                         for (Index i = 0; i < n; ++i)
                                           for (Index ch = 0; ch < c; ++ch) {
                                             const Index off = (i * c + ch) * plane;
                                             d[ch] += (g.segment(off, plane) * px->data.segment(off, plane)).sum();
                                           }
                                       }
                                     });
}

/// Column k of a [rows, cols] matrix as a [rows] vector.
template <typename Scalar>
Tensor<Scalar> column(const Tensor<Scalar>& m, Index k) {
  using Array = typename Tensor<Scalar>::Array;
  detail::require_rank(m.shape(), 2, "column");
  const Index rows = m.dim(0), cols = m.dim(1);
  if (k < 0 || k >= cols) throw ShapeError("column: index " + std::to_string(k) + " out of range");
  Array out(rows);
  for (Index i = 0; i < rows; ++i) out[i] = m.data()[i * cols + k];
  auto pm = m.impl();
  return Tensor<Scalar>::make_result({rows}, std::move(out), "column", {m},
                                     [pm, rows, cols, k](const Array& g, const Array&) {
                                       Array& d = detail::grad_buffer(*pm);
                                       for (Index i = 0; i < rows; ++i) d[i * cols + k] += g[i];
                                     });
}

/// Nearest-neighbour x2 upsampling of a [N, C, h, w] tensor.
template <typename Scalar>
Tensor<Scalar> upsample_nearest2x(const Tensor<Scalar>& x) {
  using Array = typename Tensor<Scalar>::Array;
  detail::require_rank(x.shape(), 4, "upsample_nearest2x");
  const Index planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  Array out(planes * 4 * h * w);
  for (Index p = 0; p < planes; ++p)
    for (Index y = 0; y < 2 * h; ++y)
      for (Index xx = 0; xx < 2 * w; ++xx)
        out[(p * 2 * h + y) * 2 * w + xx] = x.data()[(p * h + y / 2) * w + xx / 2];
  auto px = x.impl();
  return Tensor<Scalar>::make_result({x.dim(0), x.dim(1), 2 * h, 2 * w}, std::move(out), "upsample_nearest2x", {x},
                                     [px, planes, h, w](const Array& g, const Array&) {
                                       Array& d = detail::grad_buffer(*px);
                                       for (Index p = 0; p < planes; ++p)
                                         for (Index y = 0; y < 2 * h; ++y)
                                           for (Index xx = 0; xx < 2 * w; ++xx)
                                             d[(p * h + y / 2) * w + xx / 2] += g[(p * 2 * h + y) * 2 * w + xx];
                                     });
}

/// Throws NumericError naming `where` when any value is NaN or infinite.
template <typename Scalar>
void require_finite(const Tensor<Scalar>& x, const std::string& where) {
  if (!x.data().isFinite().all()) throw NumericError("non-finite activation in " + where);
}

}  // namespace funkan
