#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "funkan/errors.hpp"

namespace funkan {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index numel(const Shape& shape) {
  Index n = 1;
  for (Index s : shape) n *= s;
  return n;
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

enum class Mode { train, eval };

/// Thread-local switch that suppresses graph construction (inference, optimizer updates).
class GradMode {
 public:
  static bool enabled() noexcept { return flag(); }
  static void set(bool on) noexcept { flag() = on; }

 private:
  static bool& flag() noexcept {
    thread_local bool on = true;
    return on;
  }
};

class NoGradGuard {
 public:
  NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set(false); }
  ~NoGradGuard() { GradMode::set(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename Scalar>
class Tensor;

namespace detail {

template <typename Scalar>
struct TensorImpl;

template <typename Scalar>
using ImplPtr = std::shared_ptr<TensorImpl<Scalar>>;

template <typename Scalar>
using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct GraphNode {
  const char* op = "";
  std::vector<ImplPtr<Scalar>> parents;
  // Receives d(loss)/d(output) and the forward output values; accumulates into the parents.
  std::function<void(const Array<Scalar>&, const Array<Scalar>&)> backward;
};

template <typename Scalar>
struct TensorImpl {
  Shape shape;
  Array<Scalar> data;
  std::optional<Array<Scalar>> grad;
  bool requires_grad = false;
  std::shared_ptr<GraphNode<Scalar>> node;
};

template <typename Scalar, typename Expr>
void accumulate(TensorImpl<Scalar>& impl, const Expr& delta) {
  if (!impl.requires_grad) return;
  if (!impl.grad)
    impl.grad = delta;
  else
    *impl.grad += delta;
}

template <typename Scalar>
Array<Scalar>& grad_buffer(TensorImpl<Scalar>& impl) {
  if (!impl.grad) impl.grad = Array<Scalar>::Zero(impl.data.size());
  return *impl.grad;
}

}  // namespace detail

/// Dense row-major tensor with an optional reverse-mode graph node.
///
/// A Tensor is a handle: copies alias the same storage and graph node.
/// The shape is fixed at construction; the values of a leaf may be edited
/// in place (optimizer updates), the values of op results should not be.
template <typename Scalar>
class Tensor {
 public:
  using Array = detail::Array<Scalar>;
  using Impl = detail::TensorImpl<Scalar>;

  Tensor() = default;

  explicit Tensor(Shape shape, Scalar fill = Scalar(0)) : impl_(std::make_shared<Impl>()) {
    validate(shape);
    impl_->data = Array::Constant(funkan::numel(shape), fill);
    impl_->shape = std::move(shape);
  }

  Tensor(Shape shape, Array data) : impl_(std::make_shared<Impl>()) {
    validate(shape);
    if (funkan::numel(shape) != data.size())
      throw ShapeError("Tensor: shape " + to_string(shape) + " holds " + std::to_string(funkan::numel(shape)) +
                       " elements but " + std::to_string(data.size()) + " values were given");
    impl_->data = std::move(data);
    impl_->shape = std::move(shape);
  }

  Tensor(Shape shape, std::initializer_list<Scalar> values)
      : Tensor(std::move(shape), Eigen::Map<const Array>(values.begin(), Index(values.size())).eval()) {}

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), Scalar(0)); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), Scalar(1)); }
  static Tensor scalar(Scalar v) { return Tensor(Shape{1}, v); }

  bool defined() const noexcept { return static_cast<bool>(impl_); }
  const Shape& shape() const { return impl_->shape; }
  Index dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t rank() const { return impl_->shape.size(); }
  Index numel() const { return impl_->data.size(); }

  const Array& data() const { return impl_->data; }
  Array& data() { return impl_->data; }
  Scalar operator[](Index i) const { return impl_->data[i]; }
  Scalar& operator[](Index i) { return impl_->data[i]; }

  Scalar item() const {
    if (numel() != 1) throw ShapeError("item: tensor of shape " + to_string(shape()) + " is not a scalar");
    return impl_->data[0];
  }

  // 4-D accessor [n, c, y, x].
  Scalar at(Index n, Index c, Index y, Index x) const {
    const Shape& s = impl_->shape;
    return impl_->data[((n * s[1] + c) * s[2] + y) * s[3] + x];
  }

  bool requires_grad() const noexcept { return impl_ && impl_->requires_grad; }

  Tensor& set_requires_grad(bool on = true) {
    if (impl_->node) throw std::logic_error("set_requires_grad: only leaf tensors can be marked");
    impl_->requires_grad = on;
    return *this;
  }

  bool is_leaf() const noexcept { return !impl_->node; }
  const char* op_name() const noexcept { return impl_->node ? impl_->node->op : "leaf"; }

  bool has_grad() const noexcept { return impl_ && impl_->grad.has_value(); }
  const Array& grad() const {
    if (!impl_->grad) throw std::logic_error("grad: no gradient has been accumulated");
    return *impl_->grad;
  }
  void zero_grad() { impl_->grad.reset(); }

  /// Same values, no graph history, no gradient requirement.
  Tensor detach() const { return Tensor(impl_->shape, impl_->data); }

  Tensor reshape(Shape shape) const;

  const detail::ImplPtr<Scalar>& impl() const noexcept { return impl_; }

  /// Builds an op result. The node is recorded only when grad mode is on and a
  /// parent requires grad.
  static Tensor make_result(Shape shape, Array data, const char* op, std::initializer_list<Tensor> parents,
                            std::function<void(const Array&, const Array&)> backward) {
    Tensor out(std::move(shape), std::move(data));
    if (!GradMode::enabled()) return out;
    bool any = false;
    for (const Tensor& p : parents) any = any || p.requires_grad();
    if (!any) return out;
    auto node = std::make_shared<detail::GraphNode<Scalar>>();
    node->op = op;
    for (const Tensor& p : parents)
      if (p.requires_grad()) node->parents.push_back(p.impl_);
    node->backward = std::move(backward);
    out.impl_->node = std::move(node);
    out.impl_->requires_grad = true;
    return out;
  }

 private:
  static void validate(const Shape& shape) {
    if (shape.empty()) throw ShapeError("Tensor: empty shape");
    for (Index s : shape)
      if (s < 1) throw ShapeError("Tensor: non-positive extent in shape " + to_string(shape));
  }

  detail::ImplPtr<Scalar> impl_;
};

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::reshape(Shape shape) const {
  if (funkan::numel(shape) != numel())
    throw ShapeError("reshape: cannot view " + to_string(this->shape()) + " as " + to_string(shape));
  auto parent = impl_;
  return make_result(std::move(shape), impl_->data, "reshape", {*this},
                     [parent](const Array& g, const Array&) { detail::accumulate(*parent, g); });
}

/// Reverse-mode sweep from a scalar loss.
///
/// Leaf gradients are not summed across calls: a reachable leaf that still
/// holds a gradient from a previous sweep is an error until zero_grad().
template <typename Scalar>
void backward(const Tensor<Scalar>& loss) {
  using Impl = detail::TensorImpl<Scalar>;
  if (loss.numel() != 1) throw ShapeError("backward: loss must be a scalar, got shape " + to_string(loss.shape()));
  if (!loss.requires_grad()) throw std::logic_error("backward: loss does not depend on any tensor requiring grad");

  // Iterative post-order DFS; parent order is the recording order, so the
  // resulting topological order is deterministic.
  std::vector<Impl*> order;
  std::unordered_set<Impl*> visited;
  std::vector<std::pair<Impl*, std::size_t>> stack;
  stack.emplace_back(loss.impl().get(), 0);
  visited.insert(loss.impl().get());
  while (!stack.empty()) {
    auto& [impl, next] = stack.back();
    if (impl->node && next < impl->node->parents.size()) {
      Impl* parent = impl->node->parents[next++].get();
      if (visited.insert(parent).second) stack.emplace_back(parent, 0);
      continue;
    }
    order.push_back(impl);
    stack.pop_back();
  }

  for (Impl* impl : order) {
    if (!impl->node && impl->grad)
      throw std::logic_error("backward: a leaf already holds a gradient; call zero_grad() before another sweep");
    if (impl->node) impl->grad.reset();
  }

  loss.impl()->grad = detail::Array<Scalar>::Ones(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Impl* impl = *it;
    if (impl->node && impl->grad) impl->node->backward(*impl->grad, impl->data);
  }
}

}  // namespace funkan
