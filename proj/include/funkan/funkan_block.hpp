#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "funkan/conv.hpp"
#include "funkan/hermite.hpp"
#include "funkan/layers.hpp"
#include "funkan/ops.hpp"

namespace funkan {

/// Row normalization applied to the raw coefficient matrix before it weights
/// the basis maps. softmax is the default; the others exist for ablations.
enum class AttentionNorm { softmax, l1, l2, raw };

struct FunKanOptions {
  Index channels = 32;      // n
  Index out_channels = 32;  // m
  int basis_size = 6;       // r
  double grid_extent = 3.0;
  AttentionNorm norm = AttentionNorm::softmax;
  bool mixing_bias = true;
};

namespace detail {

inline constexpr double kRowNormEpsilon = 1e-12;

}  // namespace detail

/// Row-wise L1 or L2 normalization of a [rows, cols] matrix: a / (||a|| + eps).
template <typename Scalar>
Tensor<Scalar> normalize_rows(const Tensor<Scalar>& a, AttentionNorm kind) {
  using Array = typename Tensor<Scalar>::Array;
  if (kind == AttentionNorm::softmax) return softmax(a, 1);
  if (kind == AttentionNorm::raw) return a;
  detail::require_rank(a.shape(), 2, "normalize_rows");
  const Index rows = a.dim(0), cols = a.dim(1);
  const bool l1 = kind == AttentionNorm::l1;
  Array norms(rows), out(a.numel());
  for (Index i = 0; i < rows; ++i) {
    auto row = a.data().segment(i * cols, cols);
    norms[i] = l1 ? row.abs().sum() : std::sqrt(row.square().sum());
    out.segment(i * cols, cols) = row / (norms[i] + Scalar(detail::kRowNormEpsilon));
  }
  auto pa = a.impl();
  return Tensor<Scalar>::make_result(a.shape(), std::move(out), l1 ? "normalize_l1" : "normalize_l2", {a},
                                     [pa, norms, rows, cols, l1](const Array& g, const Array&) {
                                       Array d(rows * cols);
                                       for (Index i = 0; i < rows; ++i) {
                                         auto row = pa->data.segment(i * cols, cols);
                                         auto gi = g.segment(i * cols, cols);
                                         const Scalar s = norms[i] + Scalar(detail::kRowNormEpsilon);
                                         const Scalar dot = (gi * row).sum();
                                         Array dnorm = l1 ? Array(row.sign()) : Array(row / std::max(norms[i], Scalar(detail::kRowNormEpsilon)));
                                         d.segment(i * cols, cols) = gi / s - dnorm * dot / (s * s);
                                       }
                                       detail::accumulate(*pa, d);
                                     });
}

/// Spectral reconstruction of every channel on its deformed grid:
///
///   out[b, i] = sum_k coeffs[i, k] * psi_k(qx + dqx[b, i]) * psi_k(qy + dqy[b, i])
///
/// dqx, dqy: [N, n, h, w] offsets; qx, qy: [h, w] reference planes (constants);
/// coeffs: [n, r]. Differentiable with respect to the offsets and coeffs.
template <typename Scalar>
Tensor<Scalar> deformed_hermite_expansion(const Tensor<Scalar>& dqx, const Tensor<Scalar>& dqy,
                                          const Tensor<Scalar>& qx, const Tensor<Scalar>& qy,
                                          const Tensor<Scalar>& coeffs) {
  using Array = typename Tensor<Scalar>::Array;
  using Basis = HermiteBasis<Scalar>;
  detail::require_rank(dqx.shape(), 4, "deformed_hermite_expansion");
  if (dqx.shape() != dqy.shape())
    throw ShapeError("deformed_hermite_expansion: offset shapes differ, " + to_string(dqx.shape()) + " vs " +
                     to_string(dqy.shape()));
  const Index batch = dqx.dim(0), n = dqx.dim(1), plane = dqx.dim(2) * dqx.dim(3);
  if (qx.numel() != plane || qy.numel() != plane)
    throw ShapeError("deformed_hermite_expansion: reference grid does not match the spatial extent");
  detail::require_rank(coeffs.shape(), 2, "deformed_hermite_expansion coeffs");
  if (coeffs.dim(0) != n)
    throw ShapeError("deformed_hermite_expansion: " + std::to_string(coeffs.dim(0)) + " coefficient rows for " +
                     std::to_string(n) + " channels");
  const Index r = coeffs.dim(1);
  const Index stride = r + 1;  // one extra order for the derivative identity
  const Index count = dqx.numel();

  // Basis tables saved for the backward pass: [count, r + 1] for each axis.
  Array tx(count * stride), ty(count * stride), out(count);
  for (Index b = 0; b < batch; ++b)
    for (Index i = 0; i < n; ++i) {
      const Scalar* c = coeffs.data().data() + i * r;
      for (Index p = 0; p < plane; ++p) {
        const Index e = (b * n + i) * plane + p;
        Scalar* vx = tx.data() + e * stride;
        Scalar* vy = ty.data() + e * stride;
        Basis::evaluate_all(qx[p] + dqx[e], std::span<Scalar>(vx, stride));
        Basis::evaluate_all(qy[p] + dqy[e], std::span<Scalar>(vy, stride));
        Scalar acc = 0;
        for (Index k = 0; k < r; ++k) acc += c[k] * vx[k] * vy[k];
        out[e] = acc;
      }
    }

  auto px = dqx.impl();
  auto py = dqy.impl();
  auto pc = coeffs.impl();
  return Tensor<Scalar>::make_result(
      dqx.shape(), std::move(out), "hermite_expansion", {dqx, dqy, coeffs},
      [px, py, pc, tx = std::move(tx), ty = std::move(ty), batch, n, plane, r, stride](const Array& g, const Array&) {
        const bool want_x = px->requires_grad, want_y = py->requires_grad, want_c = pc->requires_grad;
        Array dx = want_x ? Array::Zero(g.size()) : Array();
        Array dy = want_y ? Array::Zero(g.size()) : Array();
        Array dc = want_c ? Array::Zero(n * r) : Array();
        // psi_k' = sqrt(k/2) psi_{k-1} - sqrt((k+1)/2) psi_{k+1}
        std::vector<Scalar> lo(r), hi(r);
        for (Index k = 0; k < r; ++k) {
          lo[k] = std::sqrt(Scalar(k) / 2);
          hi[k] = std::sqrt(Scalar(k + 1) / 2);
        }
        for (Index b = 0; b < batch; ++b)
          for (Index i = 0; i < n; ++i) {
            const Scalar* c = pc->data.data() + i * r;
            for (Index p = 0; p < plane; ++p) {
              const Index e = (b * n + i) * plane + p;
              const Scalar ge = g[e];
              const Scalar* vx = tx.data() + e * stride;
              const Scalar* vy = ty.data() + e * stride;
              Scalar sx = 0, sy = 0;
              for (Index k = 0; k < r; ++k) {
                const Scalar dvx = (k > 0 ? lo[k] * vx[k - 1] : Scalar(0)) - hi[k] * vx[k + 1];
                const Scalar dvy = (k > 0 ? lo[k] * vy[k - 1] : Scalar(0)) - hi[k] * vy[k + 1];
                sx += c[k] * dvx * vy[k];
                sy += c[k] * vx[k] * dvy;
                if (want_c) dc[i * r + k] += ge * vx[k] * vy[k];
              }
              if (want_x) dx[e] = ge * sx;
              if (want_y) dy[e] = ge * sy;
            }
          }
        if (want_x) detail::accumulate(*px, dx);
        if (want_y) detail::accumulate(*py, dy);
        if (want_c) detail::accumulate(*pc, dc);
      });
}

/// Residual network predicting per-channel grid offsets:
///
///   dq = W0(BN_a(x)) + W2(ReLU(BN_c(W1(ReLU(BN_b(x))))))
///
/// W0: 3x3 n -> 2n without bias; W1: 3x3 n -> n; W2: 3x3 n -> 2n.
/// Output channels [0, n) are x-offsets, [n, 2n) are y-offsets.
template <typename Scalar>
class OffsetPredictor {
 public:
  OffsetPredictor() = default;
  OffsetPredictor(Index n, Rng& rng)
      : n_(n),
        w0(n, 2 * n, 3, rng, /*bias=*/false),
        w1(n, n, 3, rng),
        w2(n, 2 * n, 3, rng),
        bn_shortcut(n),
        bn_in(n),
        bn_mid(n) {}

  std::pair<Tensor<Scalar>, Tensor<Scalar>> operator()(const Tensor<Scalar>& x, Mode mode) {
    detail::require_rank(x.shape(), 4, "predict_offsets");
    if (x.dim(1) != n_)
      throw ShapeError("predict_offsets: expected " + std::to_string(n_) + " channels, got " + to_string(x.shape()));
    Tensor<Scalar> shortcut = w0(bn_shortcut(x, mode));
    Tensor<Scalar> residual = w2(relu(bn_mid(w1(relu(bn_in(x, mode))), mode)));
    Tensor<Scalar> dq = shortcut + residual;
    return {slice_channels(dq, 0, n_), slice_channels(dq, n_, n_)};
  }

  void collect(ParameterSet<Scalar>& set, const std::string& prefix) {
    w0.collect(set, prefix + ".w0");
    w1.collect(set, prefix + ".w1");
    w2.collect(set, prefix + ".w2");
    bn_shortcut.collect(set, prefix + ".bn_shortcut");
    bn_in.collect(set, prefix + ".bn_in");
    bn_mid.collect(set, prefix + ".bn_mid");
  }

  Index param_count() const {
    return w0.param_count() + w1.param_count() + w2.param_count() + bn_shortcut.param_count() +
           bn_in.param_count() + bn_mid.param_count();
  }

  std::int64_t flops(Index batch, Index h, Index w) const {
    // three convolutions and three normalizations
    return batch * (w0.flops(h, w) + w1.flops(h, w) + w2.flops(h, w)) + bn_shortcut.flops(batch, h, w) +
           bn_in.flops(batch, h, w) + bn_mid.flops(batch, h, w);
  }

  Index channels() const { return n_; }

  Index n_ = 0;
  Conv2d<Scalar> w0, w1, w2;
  BatchNorm2d<Scalar> bn_shortcut, bn_in, bn_mid;
};

/// One functional Kolmogorov-Arnold block.
///
/// Every input channel i is mapped to an inner function phi_i, a fixed
/// combination of Hermite basis maps with coefficients from row i of the
/// normalized attention matrix, sampled on the reference grid displaced by
/// the predicted offsets for that channel. A 1x1 convolution then mixes the
/// n inner functions into m output channels. The input reaches the output
/// only through the offsets.
template <typename Scalar>
class FunKanBlock {
 public:
  FunKanBlock() = default;
  FunKanBlock(const FunKanOptions& options, Rng& rng, std::string label = "funkan")
      : options_(options),
        label_(std::move(label)),
        basis_(options.basis_size),
        attention_logits(Tensor<Scalar>({options.channels, Index(options.basis_size)}, Scalar(0)).set_requires_grad()),
        offsets(options.channels, rng),
        mixing(options.channels, options.out_channels, 1, rng, options.mixing_bias) {
    if (options.channels < 1 || options.out_channels < 1)
      throw ConfigError("FunKanBlock: channel counts must be positive");
    if (!(options.grid_extent > 0)) throw ConfigError("FunKanBlock: grid extent must be positive");
  }

  std::pair<Tensor<Scalar>, Tensor<Scalar>> predict_offsets(const Tensor<Scalar>& x, Mode mode) {
    return offsets(x, mode);
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode) {
    detail::require_rank(x.shape(), 4, "FunKanBlock");
    if (x.dim(1) != options_.channels)
      throw ShapeError(label_ + ": expected " + std::to_string(options_.channels) + " channels, got " +
                       to_string(x.shape()));
    auto [dqx, dqy] = offsets(x, mode);
    const auto [qx, qy] = reference_grid(x.dim(2), x.dim(3));
    Tensor<Scalar> phi = deformed_hermite_expansion(dqx, dqy, qx, qy, normalized_attention());
    Tensor<Scalar> out = mixing(phi);
    require_finite(out, label_);
    return out;
  }

  Tensor<Scalar> operator()(const Tensor<Scalar>& x, Mode mode) { return forward(x, mode); }

  /// Normalized coefficient matrix as a differentiable tensor [n, r].
  Tensor<Scalar> normalized_attention() const { return normalize_rows(attention_logits, options_.norm); }

  /// Read-only copy of the normalized coefficient matrix [n, r].
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> attention() const {
    NoGradGuard guard;
    Tensor<Scalar> a = normalized_attention();
    return Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        a.data().data(), a.dim(0), a.dim(1));
  }

  /// Reference grid over [-extent, extent]; an axis of extent 1 sits at 0.
  std::pair<Tensor<Scalar>, Tensor<Scalar>> reference_grid(Index h, Index w) const {
    const double e = options_.grid_extent;
    if (h >= 2 && w >= 2) return uniform_grid<Scalar>(h, w, e);
    Tensor<Scalar> qx({h, w}), qy({h, w});
    for (Index y = 0; y < h; ++y)
      for (Index xx = 0; xx < w; ++xx) {
        qx[y * w + xx] = w > 1 ? Scalar(-e + 2 * e * double(xx) / double(w - 1)) : Scalar(0);
        qy[y * w + xx] = h > 1 ? Scalar(-e + 2 * e * double(y) / double(h - 1)) : Scalar(0);
      }
    return {qx, qy};
  }

  void collect(ParameterSet<Scalar>& set, const std::string& prefix) {
    set.add(prefix + ".attention", attention_logits);
    offsets.collect(set, prefix + ".offsets");
    mixing.collect(set, prefix + ".mixing");
  }

  Index param_count() const { return attention_logits.numel() + offsets.param_count() + mixing.param_count(); }

  /// Offset predictor + basis evaluation + 1x1 mixing. Basis evaluation is
  /// counted as 6 flops per recurrence step per axis plus 3 per order for the
  /// weighted sum, for r + 1 orders.
  std::int64_t flops(Index batch, Index h, Index w) const {
    const std::int64_t points = batch * options_.channels * h * w;
    const std::int64_t r = options_.basis_size;
    const std::int64_t basis = points * (2 * 6 * (r + 1) + 3 * r);
    return offsets.flops(batch, h, w) + basis + batch * mixing.flops(h, w);
  }

  const FunKanOptions& options() const { return options_; }
  const HermiteBasis<Scalar>& basis() const { return basis_; }
  const std::string& label() const { return label_; }

 private:
  FunKanOptions options_;
  std::string label_;
  HermiteBasis<Scalar> basis_{1};

 public:
  Tensor<Scalar> attention_logits;
  OffsetPredictor<Scalar> offsets;
  Conv2d<Scalar> mixing;
};

}  // namespace funkan
