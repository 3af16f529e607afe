#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "funkan/tensor.hpp"

namespace funkan::testing {

struct GradCheckResult {
  std::string worst_name;
  double worst_error = 0;
};

// Norm-wise relative error ||analytic - numeric|| / max(||analytic||, ||numeric||)
// per tensor, with central differences. The denominator is floored at `floor`
// so tensors whose true gradient vanishes (a bias ahead of a train-mode batch
// norm) compare on absolute error. Inputs must be leaves; `loss` must rebuild
// the graph on every call.
inline GradCheckResult gradcheck(const std::function<Tensor<double>()>& loss,
                                 std::vector<std::pair<std::string, Tensor<double>>> inputs, double step = 1e-5,
                                 Index max_probes = 400, double floor = 1e-6) {
  for (auto& [name, t] : inputs) t.zero_grad();
  Tensor<double> out = loss();
  backward(out);
  GradCheckResult result;
  for (auto& [name, t] : inputs) {
    const Eigen::ArrayXd analytic = t.grad();
    // Probe an evenly strided subset of large tensors.
    const Index stride = std::max<Index>(1, t.numel() / max_probes);
    double diff2 = 0, a2 = 0, n2 = 0;
    for (Index i = 0; i < t.numel(); i += stride) {
      const double saved = t[i];
      double plus, minus;
      {
        NoGradGuard guard;
        t[i] = saved + step;
        plus = loss().item();
        t[i] = saved - step;
        minus = loss().item();
        t[i] = saved;
      }
      const double numeric = (plus - minus) / (2 * step);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
    }
    const double err = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), floor});
    if (err >= result.worst_error) result = {name, err};
  }
  for (auto& [name, t] : inputs) t.zero_grad();
  return result;
}

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<double> t(std::move(shape));
  for (Index i = 0; i < t.numel(); ++i) t[i] = dist(rng);
  return t;
}

// Naive sliding-window cross-correlation with zero padding, [N,Cin,h,w] x [kH,kW,Cin,Cout].
inline std::vector<double> naive_conv2d(const Tensor<double>& x, const Tensor<double>& k, const Tensor<double>* bias,
                                        Index stride, Index pad_top, Index pad_left, Index oh, Index ow) {
  const Index n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index kh = k.dim(0), kw = k.dim(1), cout = k.dim(3);
  std::vector<double> out(n * cout * oh * ow, 0.0);
  for (Index b = 0; b < n; ++b)
    for (Index co = 0; co < cout; ++co)
      for (Index oy = 0; oy < oh; ++oy)
        for (Index ox = 0; ox < ow; ++ox) {
          double acc = 0;
          for (Index ky = 0; ky < kh; ++ky)
            for (Index kx = 0; kx < kw; ++kx)
              for (Index ci = 0; ci < cin; ++ci) {
                const Index iy = oy * stride + ky - pad_top, ix = ox * stride + kx - pad_left;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += x.at(b, ci, iy, ix) * k[((ky * kw + kx) * cin + ci) * cout + co];
              }
          if (bias) acc += (*bias)[co];
          out[((b * cout + co) * oh + oy) * ow + ox] = acc;
        }
  return out;
}

}  // namespace funkan::testing
