#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>

#include "funkan/ops.hpp"
#include "funkan/tensor.hpp"

namespace funkan {

enum class Padding { same, valid };

/// Output extent and leading pad of one spatial axis. "same" pads with zeros so
/// that out = ceil(in / stride), splitting odd padding with the extra cell at
/// the trailing edge.
struct ConvAxis {
  Index out;
  Index pad_before;
};

inline ConvAxis conv_axis(Index in, Index kernel, Index stride, Padding padding) {
  if (padding == Padding::valid) {
    if (in < kernel) throw ShapeError("conv2d: input extent smaller than the kernel under valid padding");
    return {(in - kernel) / stride + 1, 0};
  }
  const Index out = (in + stride - 1) / stride;
  const Index total = std::max<Index>((out - 1) * stride + kernel - in, 0);
  return {out, total / 2};
}

namespace detail {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvGeometry {
  Index cin, h, w, kh, kw, stride;
  ConvAxis ay, ax;
  Index patch() const { return kh * kw * cin; }
  Index pixels() const { return ay.out * ax.out; }
};

// Patch matrix of one sample: rows ordered (ky, kx, ci), matching the
// row-major [kH, kW, Cin, Cout] kernel layout viewed as [kH*kW*Cin, Cout].
template <typename Scalar>
void im2col(const Scalar* x, const ConvGeometry& g, RowMatrix<Scalar>& col) {
  col.resize(g.patch(), g.pixels());
  for (Index ky = 0; ky < g.kh; ++ky)
    for (Index kx = 0; kx < g.kw; ++kx)
      for (Index ci = 0; ci < g.cin; ++ci) {
        Scalar* row = col.row((ky * g.kw + kx) * g.cin + ci).data();
        const Scalar* plane = x + ci * g.h * g.w;
        for (Index oy = 0; oy < g.ay.out; ++oy) {
          const Index iy = oy * g.stride + ky - g.ay.pad_before;
          Scalar* dst = row + oy * g.ax.out;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.ax.out, Scalar(0));
            continue;
          }
          for (Index ox = 0; ox < g.ax.out; ++ox) {
            const Index ix = ox * g.stride + kx - g.ax.pad_before;
            dst[ox] = (ix < 0 || ix >= g.w) ? Scalar(0) : plane[iy * g.w + ix];
          }
        }
      }
}

template <typename Scalar>
void col2im_add(const RowMatrix<Scalar>& col, const ConvGeometry& g, Scalar* dx) {
  for (Index ky = 0; ky < g.kh; ++ky)
    for (Index kx = 0; kx < g.kw; ++kx)
      for (Index ci = 0; ci < g.cin; ++ci) {
        const Scalar* row = col.row((ky * g.kw + kx) * g.cin + ci).data();
        Scalar* plane = dx + ci * g.h * g.w;
        for (Index oy = 0; oy < g.ay.out; ++oy) {
          const Index iy = oy * g.stride + ky - g.ay.pad_before;
          if (iy < 0 || iy >= g.h) continue;
          const Scalar* src = row + oy * g.ax.out;
          for (Index ox = 0; ox < g.ax.out; ++ox) {
            const Index ix = ox * g.stride + kx - g.ax.pad_before;
            if (ix >= 0 && ix < g.w) plane[iy * g.w + ix] += src[ox];
          }
        }
      }
}

}  // namespace detail

/// 2-D cross-correlation (no kernel flip).
///
/// x: [N, Cin, h, w], kernel: [kH, kW, Cin, Cout], bias: [Cout] or undefined.
/// Returns [N, Cout, h', w'] with h' = ceil(h / stride) under same padding.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& kernel, const Tensor<Scalar>& bias = {},
                      Index stride = 1, Padding padding = Padding::same) {
  using Array = typename Tensor<Scalar>::Array;
  using RowMatrix = detail::RowMatrix<Scalar>;
  detail::require_rank(x.shape(), 4, "conv2d");
  detail::require_rank(kernel.shape(), 4, "conv2d kernel");
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  const Index kh = kernel.dim(0), kw = kernel.dim(1), cout = kernel.dim(3);
  if (kh % 2 == 0 || kw % 2 == 0) throw ShapeError("conv2d: kernel extents must be odd, got " + to_string(kernel.shape()));
  if (kernel.dim(2) != x.dim(1))
    throw ShapeError("conv2d: kernel expects " + std::to_string(kernel.dim(2)) + " input channels, input " +
                     to_string(x.shape()) + " has " + std::to_string(x.dim(1)));
  if (bias.defined() && bias.numel() != cout)
    throw ShapeError("conv2d: bias has " + std::to_string(bias.numel()) + " entries for " + std::to_string(cout) +
                     " output channels");

  const Index n = x.dim(0);
  const detail::ConvGeometry geo{x.dim(1), x.dim(2), x.dim(3), kh, kw, stride,
                                 conv_axis(x.dim(2), kh, stride, padding), conv_axis(x.dim(3), kw, stride, padding)};
  const Index in_size = geo.cin * geo.h * geo.w;
  const Index out_size = cout * geo.pixels();

  Eigen::Map<const RowMatrix> K(kernel.data().data(), geo.patch(), cout);
  Array out(n * out_size);
  RowMatrix col;
  for (Index i = 0; i < n; ++i) {
    Eigen::Map<RowMatrix> Y(out.data() + i * out_size, cout, geo.pixels());
    if (kh == 1 && kw == 1 && stride == 1) {
      Y.noalias() = K.transpose() * Eigen::Map<const RowMatrix>(x.data().data() + i * in_size, geo.cin, geo.pixels());
    } else {
      detail::im2col(x.data().data() + i * in_size, geo, col);
      Y.noalias() = K.transpose() * col;
    }
    if (bias.defined()) Y.colwise() += bias.data().matrix();
  }

  auto px = x.impl();
  auto pk = kernel.impl();
  auto pb = bias.defined() ? bias.impl() : nullptr;
  const Tensor<Scalar>& bias_parent = bias.defined() ? bias : x;
  return Tensor<Scalar>::make_result(
      {n, cout, geo.ay.out, geo.ax.out}, std::move(out), "conv2d", {x, kernel, bias_parent},
      [px, pk, pb, geo, n, cout, in_size, out_size](const Array& g, const Array&) {
        Eigen::Map<const RowMatrix> K(pk->data.data(), geo.patch(), cout);
        const bool pointwise = geo.kh == 1 && geo.kw == 1 && geo.stride == 1;
        RowMatrix col, dcol;
        RowMatrix dK;
        if (pk->requires_grad) dK = RowMatrix::Zero(geo.patch(), cout);
        Array* dx = px->requires_grad ? &detail::grad_buffer(*px) : nullptr;
        for (Index i = 0; i < n; ++i) {
          Eigen::Map<const RowMatrix> G(g.data() + i * out_size, cout, geo.pixels());
          if (pk->requires_grad) {
            if (pointwise) {
              dK.noalias() +=
                  Eigen::Map<const RowMatrix>(px->data.data() + i * in_size, geo.cin, geo.pixels()) * G.transpose();
            } else {
              detail::im2col(px->data.data() + i * in_size, geo, col);
              dK.noalias() += col * G.transpose();
            }
          }
          if (dx) {
            if (pointwise) {
              Eigen::Map<RowMatrix>(dx->data() + i * in_size, geo.cin, geo.pixels()).noalias() += K * G;
            } else {
              dcol.noalias() = K * G;
              detail::col2im_add(dcol, geo, dx->data() + i * in_size);
            }
          }
          if (pb && pb->requires_grad) detail::grad_buffer(*pb) += G.rowwise().sum().array();
        }
        if (pk->requires_grad) detail::accumulate(*pk, Eigen::Map<const Array>(dK.data(), dK.size()));
      });
}

/// Per-channel running mean and (unbiased) variance of a batch-norm layer.
template <typename Scalar>
struct RunningStats {
  using Array = detail::Array<Scalar>;
  Array mean;
  Array var;
  bool initialized = false;

  /// Zero mean, unit variance; usable in eval mode before any training step.
  static RunningStats identity(Index channels) {
    return {Array::Zero(channels), Array::Ones(channels), true};
  }
};

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Batch normalization over (N, h, w) for each channel of a [N, C, h, w] tensor.
///
/// Train mode normalizes with the biased batch variance and updates the running
/// stats (momentum-weighted, unbiased variance). Eval mode uses the running stats.
template <typename Scalar>
Tensor<Scalar> batch_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma, const Tensor<Scalar>& beta,
                          RunningStats<Scalar>& state, Mode mode, double momentum = kBatchNormMomentum,
                          double eps = kBatchNormEpsilon) {
  using Array = typename Tensor<Scalar>::Array;
  detail::require_rank(x.shape(), 4, "batch_norm");
  const Index n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (gamma.numel() != c || beta.numel() != c)
    throw ShapeError("batch_norm: affine parameters do not match " + std::to_string(c) + " channels");
  const Index count = n * plane;

  Array mu(c), inv_std(c);
  if (mode == Mode::train) {
    if (count < 2) throw ShapeError("batch_norm: train mode needs at least two values per channel");
    for (Index ch = 0; ch < c; ++ch) {
      Scalar s = 0;
      for (Index i = 0; i < n; ++i) s += x.data().segment((i * c + ch) * plane, plane).sum();
      const Scalar m = s / Scalar(count);
      Scalar ss = 0;
      for (Index i = 0; i < n; ++i) ss += (x.data().segment((i * c + ch) * plane, plane) - m).square().sum();
      const Scalar var = ss / Scalar(count);
      mu[ch] = m;
      inv_std[ch] = Scalar(1) / std::sqrt(var + Scalar(eps));
      const Scalar unbiased = ss / Scalar(count - 1);
      if (!state.initialized) state = RunningStats<Scalar>::identity(c);
      state.mean[ch] = Scalar(1 - momentum) * state.mean[ch] + Scalar(momentum) * m;
      state.var[ch] = Scalar(1 - momentum) * state.var[ch] + Scalar(momentum) * unbiased;
    }
  } else {
    if (!state.initialized || state.mean.size() != c)
      throw std::logic_error("batch_norm: eval mode requires initialized running statistics");
    mu = state.mean;
    inv_std = (state.var + Scalar(eps)).rsqrt();
  }

  Array xhat(x.numel()), out(x.numel());
  for (Index i = 0; i < n; ++i)
    for (Index ch = 0; ch < c; ++ch) {
      const Index off = (i * c + ch) * plane;
      xhat.segment(off, plane) = (x.data().segment(off, plane) - mu[ch]) * inv_std[ch];
      out.segment(off, plane) = xhat.segment(off, plane) * gamma[ch] + beta[ch];
    }

  auto px = x.impl();
  auto pg = gamma.impl();
  auto pbeta = beta.impl();
  const bool batch_stats = mode == Mode::train;
  return Tensor<Scalar>::make_result(
      x.shape(), std::move(out), "batch_norm", {x, gamma, beta},
      [px, pg, pbeta, xhat = std::move(xhat), inv_std, n, c, plane, count, batch_stats](const Array& g,
                                                                                        const Array&) {
        Array dgamma = Array::Zero(c), dbeta = Array::Zero(c);
        for (Index i = 0; i < n; ++i)
          for (Index ch = 0; ch < c; ++ch) {
            const Index off = (i * c + ch) * plane;
            dbeta[ch] += g.segment(off, plane).sum();
            dgamma[ch] += (g.segment(off, plane) * xhat.segment(off, plane)).sum();
          }
        detail::accumulate(*pg, dgamma);
        detail::accumulate(*pbeta, dbeta);
        if (!px->requires_grad) return;
        Array& dx = detail::grad_buffer(*px);
        for (Index i = 0; i < n; ++i)
          for (Index ch = 0; ch < c; ++ch) {
            const Index off = (i * c + ch) * plane;
            const Scalar scale = pg->data[ch] * inv_std[ch];
            if (batch_stats) {
              dx.segment(off, plane) += scale * (g.segment(off, plane) - dbeta[ch] / Scalar(count) -
                                                 xhat.segment(off, plane) * dgamma[ch] / Scalar(count));
            } else {
              dx.segment(off, plane) += scale * g.segment(off, plane);
            }
          }
      });
}

}  // namespace funkan
