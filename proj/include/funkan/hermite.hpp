#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "funkan/tensor.hpp"

namespace funkan {

/// The first r orthonormal Hermite functions
///
///   psi_k(x) = c_k H_k(x) exp(-x^2 / 2),   c_k = (2^k k! sqrt(pi))^(-1/2),
///
/// for orders k = 0 .. r-1. Values are produced by the normalized three-term
/// recurrence
///
///   psi_{k+1} = x sqrt(2 / (k+1)) psi_k - sqrt(k / (k+1)) psi_{k-1},
///
/// which never forms H_k or k! and so cannot overflow. Derivatives use
/// psi_k' = sqrt(k/2) psi_{k-1} - sqrt((k+1)/2) psi_{k+1}.
template <typename Scalar>
class HermiteBasis {
 public:
  explicit HermiteBasis(int r) : r_(r) {
    if (r < 1) throw ShapeError("HermiteBasis: need at least one basis function");
    norm_.resize(r);
    for (int k = 0; k < r; ++k) {
      const double log_c = -0.5 * (k * std::log(2.0) + std::lgamma(k + 1.0) + 0.5 * std::log(std::numbers::pi));
      norm_[k] = Scalar(std::exp(log_c));
    }
  }

  int size() const noexcept { return r_; }

  /// c_k of the closed form.
  Scalar normalization(int k) const {
    check_order(k);
    return norm_[k];
  }

  /// psi_0(x) .. psi_{out.size()-1}(x). Any length is allowed; the basis size
  /// only bounds the public per-order entry points.
  static void evaluate_all(Scalar x, std::span<Scalar> out) {
    if (out.empty()) return;
    const Scalar p0 = Scalar(std::pow(std::numbers::pi, -0.25)) * std::exp(-x * x / Scalar(2));
    out[0] = p0;
    if (out.size() == 1) return;
    out[1] = Scalar(std::numbers::sqrt2) * x * p0;
    for (std::size_t k = 1; k + 1 < out.size(); ++k) {
      const Scalar kk = Scalar(k);
      out[k + 1] = x * std::sqrt(Scalar(2) / (kk + 1)) * out[k] - std::sqrt(kk / (kk + 1)) * out[k - 1];
    }
  }

  Scalar value(int k, Scalar x) const {
    check_order(k);
    return value_unchecked(k, x);
  }

  Scalar derivative(int k, Scalar x) const {
    check_order(k);
    return derivative_unchecked(k, x);
  }

  /// psi_k applied elementwise; differentiable with respect to x.
  Tensor<Scalar> eval(int k, const Tensor<Scalar>& x) const {
    using Array = typename Tensor<Scalar>::Array;
    check_order(k);
    Array out = x.data().unaryExpr([k](Scalar v) { return value_unchecked(k, v); });
    auto px = x.impl();
    return Tensor<Scalar>::make_result(x.shape(), std::move(out), "hermite", {x},
                                       [px, k](const Array& g, const Array&) {
                                         detail::accumulate(*px, g * px->data.unaryExpr([k](Scalar v) {
                                           return derivative_unchecked(k, v);
                                         }));
                                       });
  }

  void check_order(int k) const {
    if (k < 0 || k >= r_)
      throw ShapeError("HermiteBasis: order " + std::to_string(k) + " outside basis of size " + std::to_string(r_));
  }

  static Scalar value_unchecked(int k, Scalar x) {
    Scalar buf[64]{};
    std::vector<Scalar> heap;
    std::span<Scalar> vals = k + 1 <= 64 ? std::span<Scalar>(buf, k + 1) : (heap.resize(k + 1), std::span<Scalar>(heap));
    evaluate_all(x, vals);
    return vals[k];
  }

  static Scalar derivative_unchecked(int k, Scalar x) {
    Scalar buf[64]{};
    std::vector<Scalar> heap;
    std::span<Scalar> vals = k + 2 <= 64 ? std::span<Scalar>(buf, k + 2) : (heap.resize(k + 2), std::span<Scalar>(heap));
    evaluate_all(x, vals);
    const Scalar kk = Scalar(k);
    const Scalar lower = k > 0 ? std::sqrt(kk / 2) * vals[k - 1] : Scalar(0);
    return lower - std::sqrt((kk + 1) / 2) * vals[k + 1];
  }

 private:
  int r_;
  std::vector<Scalar> norm_;
};

/// psi_k(qx) * psi_k(qy) elementwise; differentiable with respect to both grids.
template <typename Scalar>
Tensor<Scalar> eval_separable_2d(const HermiteBasis<Scalar>& basis, int k, const Tensor<Scalar>& qx,
                                 const Tensor<Scalar>& qy) {
  using Array = typename Tensor<Scalar>::Array;
  using Basis = HermiteBasis<Scalar>;
  basis.check_order(k);
  if (qx.shape() != qy.shape())
    throw ShapeError("eval_separable_2d: grid shapes differ, " + to_string(qx.shape()) + " vs " +
                     to_string(qy.shape()));
  const Index count = qx.numel();
  Array vx(count), vy(count), out(count);
  for (Index i = 0; i < count; ++i) {
    vx[i] = Basis::value_unchecked(k, qx[i]);
    vy[i] = Basis::value_unchecked(k, qy[i]);
  }
  out = vx * vy;
  auto px = qx.impl();
  auto py = qy.impl();
  return Tensor<Scalar>::make_result(
      qx.shape(), std::move(out), "hermite_2d", {qx, qy},
      [px, py, k, vx = std::move(vx), vy = std::move(vy)](const Array& g, const Array&) {
        if (px->requires_grad)
          detail::accumulate(*px, g * vy * px->data.unaryExpr([k](Scalar v) { return Basis::derivative_unchecked(k, v); }));
        if (py->requires_grad)
          detail::accumulate(*py, g * vx * py->data.unaryExpr([k](Scalar v) { return Basis::derivative_unchecked(k, v); }));
      });
}

/// Reference grid with coordinates linearly spaced over [-extent, extent]
/// (inclusive). qx varies along the width, qy along the height; both are [h, w].
template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> uniform_grid(Index h, Index w, double extent) {
  if (!(extent > 0)) throw ShapeError("uniform_grid: extent must be positive");
  if (h < 2 || w < 2) throw ShapeError("uniform_grid: need at least two samples per axis");
  Tensor<Scalar> qx({h, w}), qy({h, w});
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      qx[y * w + x] = Scalar(-extent + 2.0 * extent * double(x) / double(w - 1));
      qy[y * w + x] = Scalar(-extent + 2.0 * extent * double(y) / double(h - 1));
    }
  return {qx, qy};
}

}  // namespace funkan
