#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "funkan/conv.hpp"
#include "funkan/tensor.hpp"

namespace funkan {

using Rng = std::mt19937_64;

template <typename Scalar>
struct NamedParameter {
  std::string name;
  Tensor<Scalar> tensor;
};

template <typename Scalar>
struct NamedBuffer {
  std::string name;
  RunningStats<Scalar>* stats;
};

/// Flat view of a module tree: trainable tensors plus batch-norm statistics,
/// in construction order. Tensors alias the module's storage.
template <typename Scalar>
struct ParameterSet {
  std::vector<NamedParameter<Scalar>> parameters;
  std::vector<NamedBuffer<Scalar>> buffers;

  void add(std::string name, const Tensor<Scalar>& t) { parameters.push_back({std::move(name), t}); }
  void add(std::string name, RunningStats<Scalar>& s) { buffers.push_back({std::move(name), &s}); }

  Index count() const {
    Index n = 0;
    for (const auto& p : parameters) n += p.tensor.numel();
    return n;
  }

  void zero_grad() {
    for (auto& p : parameters) p.tensor.zero_grad();
  }
};

/// Fan-in uniform initialization, U(-s, s) with s = sqrt(1 / (kH kW Cin)).
template <typename Scalar>
Tensor<Scalar> init_kernel(Index kh, Index kw, Index cin, Index cout, Rng& rng) {
  const double s = std::sqrt(1.0 / double(kh * kw * cin));
  std::uniform_real_distribution<double> dist(-s, s);
  Tensor<Scalar> k({kh, kw, cin, cout});
  for (Index i = 0; i < k.numel(); ++i) k[i] = Scalar(dist(rng));
  k.set_requires_grad();
  return k;
}

/// Per-layer cost entry used by the summary table.
struct LayerCost {
  std::string name;
  std::string kind;
  Shape output;
  Index params = 0;
  std::int64_t flops = 0;
};

template <typename Scalar>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(Index cin, Index cout, Index kernel, Rng& rng, bool bias = true, Index stride = 1)
      : cin_(cin), cout_(cout), k_(kernel), stride_(stride) {
    weight = init_kernel<Scalar>(kernel, kernel, cin, cout, rng);
    if (bias) this->bias = Tensor<Scalar>({cout}, Scalar(0)).set_requires_grad();
  }

  Tensor<Scalar> operator()(const Tensor<Scalar>& x) const { return conv2d(x, weight, bias, stride_, Padding::same); }

  void collect(ParameterSet<Scalar>& set, const std::string& prefix) const {
    set.add(prefix + ".weight", weight);
    if (bias.defined()) set.add(prefix + ".bias", bias);
  }

  Index in_channels() const { return cin_; }
  Index out_channels() const { return cout_; }
  Index stride() const { return stride_; }
  Index param_count() const { return weight.numel() + (bias.defined() ? bias.numel() : 0); }

  /// Output extent of one axis.
  Index out_extent(Index in) const { return (in + stride_ - 1) / stride_; }

  /// 2 * (kH kW Cin) * Cout per output pixel; bias additions are not counted.
  std::int64_t flops(Index h, Index w) const {
    return 2 * k_ * k_ * cin_ * cout_ * out_extent(h) * out_extent(w);
  }

  LayerCost cost(const std::string& name, Index n, Index h, Index w) const {
    return {name, "conv" + std::to_string(k_) + "x" + std::to_string(k_) + (stride_ > 1 ? "/s2" : ""),
            {n, cout_, out_extent(h), out_extent(w)}, param_count(), n * flops(h, w)};
  }

  Tensor<Scalar> weight;
  Tensor<Scalar> bias;

 private:
  Index cin_ = 0, cout_ = 0, k_ = 1, stride_ = 1;
};

template <typename Scalar>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(Index channels)
      : gamma(Tensor<Scalar>({channels}, Scalar(1)).set_requires_grad()),
        beta(Tensor<Scalar>({channels}, Scalar(0)).set_requires_grad()),
        stats(RunningStats<Scalar>::identity(channels)) {}

  Tensor<Scalar> operator()(const Tensor<Scalar>& x, Mode mode) { return batch_norm(x, gamma, beta, stats, mode); }

  void collect(ParameterSet<Scalar>& set, const std::string& prefix) {
    set.add(prefix + ".gamma", gamma);
    set.add(prefix + ".beta", beta);
    set.add(prefix + ".running", stats);
  }

  Index param_count() const { return gamma.numel() + beta.numel(); }

  // Normalize-and-affine at 2 flops per element (inference-fused form).
  std::int64_t flops(Index n, Index h, Index w) const { return 2 * n * gamma.numel() * h * w; }

  Tensor<Scalar> gamma;
  Tensor<Scalar> beta;
  RunningStats<Scalar> stats;
};

}  // namespace funkan
