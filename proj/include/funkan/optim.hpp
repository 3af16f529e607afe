#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "funkan/layers.hpp"

namespace funkan {

/// Bias-corrected Adam over a ParameterSet. Moments are kept in double.
template <typename Scalar>
class Adam {
 public:
  explicit Adam(const ParameterSet<Scalar>& set, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : params_(set.parameters), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
      m_.push_back(Eigen::ArrayXd::Zero(p.tensor.numel()));
      v_.push_back(Eigen::ArrayXd::Zero(p.tensor.numel()));
    }
  }

  /// Applies one update. Parameters without a gradient count as zero gradient.
  /// A non-finite gradient rejects the whole step with NumericError.
  void step(double lr) {
    if (!(lr > 0)) throw ConfigError("adam: learning rate must be positive");
    for (const auto& p : params_)
      if (p.tensor.has_grad() && !p.tensor.grad().allFinite())
        throw NumericError("adam: non-finite gradient for parameter '" + p.name + "'");
    ++t_;
    const double c1 = 1 - std::pow(beta1_, double(t_));
    const double c2 = 1 - std::pow(beta2_, double(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor<Scalar> w = params_[i].tensor;
      if (!w.has_grad()) continue;
      const Eigen::ArrayXd g = w.grad().template cast<double>();
      m_[i] = beta1_ * m_[i] + (1 - beta1_) * g;
      v_[i] = beta2_ * v_[i] + (1 - beta2_) * g.square();
      const Eigen::ArrayXd update = lr * (m_[i] / c1) / ((v_[i] / c2).sqrt() + eps_);
      w.data() -= update.cast<Scalar>();
    }
  }

  long step_count() const { return t_; }
  const std::vector<Eigen::ArrayXd>& first_moments() const { return m_; }
  const std::vector<Eigen::ArrayXd>& second_moments() const { return v_; }

 private:
  std::vector<NamedParameter<Scalar>> params_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Eigen::ArrayXd> m_, v_;
};

/// Piecewise-constant learning rate: stage k runs from epoch starts[k].
struct LrSchedule {
  std::vector<double> rates{1e-4, 5e-5, 1e-5};
  std::vector<int> starts;  // empty: equal thirds of the epoch budget

  /// Validates and fills default boundaries; throws ConfigError.
  void resolve(int epochs) {
    if (rates.empty()) throw ConfigError("lr schedule: need at least one stage");
    for (std::size_t k = 0; k < rates.size(); ++k) {
      if (!(rates[k] > 0)) throw ConfigError("lr schedule: rates must be positive");
      if (k > 0 && !(rates[k] < rates[k - 1])) throw ConfigError("lr schedule: rates must be strictly decreasing");
    }
    if (starts.empty() && epochs < int(rates.size()))
      throw ConfigError("lr schedule: " + std::to_string(epochs) + " epochs cannot hold " +
                        std::to_string(rates.size()) + " stages; list the start epochs explicitly");
    if (starts.empty())
      for (std::size_t k = 0; k < rates.size(); ++k) starts.push_back(int(k * std::size_t(epochs) / rates.size()));
    if (starts.size() != rates.size()) throw ConfigError("lr schedule: one start epoch per stage");
    if (starts[0] != 0) throw ConfigError("lr schedule: first stage must start at epoch 0");
    for (std::size_t k = 1; k < starts.size(); ++k)
      if (starts[k] <= starts[k - 1]) throw ConfigError("lr schedule: stage starts must be strictly increasing");
  }

  double at(int epoch) const {
    double lr = rates.front();
    for (std::size_t k = 0; k < starts.size(); ++k)
      if (epoch >= starts[k]) lr = rates[k];
    return lr;
  }
};

}  // namespace funkan
