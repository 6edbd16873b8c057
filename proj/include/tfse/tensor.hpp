// Copyright 2026 The tfse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense row-major tensor with tape-free reverse-mode autodiff. Each result of
// a differentiable op keeps a Node pointing at its inputs; backward() walks
// the DAG reachable from a scalar loss in reverse topological order.

#ifndef TFSE_TENSOR_HPP_
#define TFSE_TENSOR_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tfse/error.hpp"

namespace tfse {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct TensorImpl;

template <typename T>
struct Node {
  std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
  // Reads out.grad and accumulates into the inputs' gradients.
  std::function<void(const TensorImpl<T>& out)> backward;
};

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  std::shared_ptr<Node<T>> node;

  std::vector<T>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    return grad;
  }
};

}  // namespace detail

// Thread-local switch; while disabled no op records graph nodes.
class GradMode {
 public:
  static bool enabled() noexcept;
  static void set_enabled(bool on) noexcept;
};

class NoGradGuard {
 public:
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : impl_(std::make_shared<detail::TensorImpl<T>>()) {
    impl_->data.assign(tfse::numel(shape), fill);
    impl_->shape = std::move(shape);
  }
  Tensor(Shape shape, std::vector<T> values)
      : impl_(std::make_shared<detail::TensorImpl<T>>()) {
    require(tfse::numel(shape) == values.size(), Errc::dimension,
            "tensor data length " + std::to_string(values.size()) +
                " does not match shape " + shape_str(shape));
    impl_->shape = std::move(shape);
    impl_->data = std::move(values);
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), T(0)); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), T(1)); }
  static Tensor scalar(T v) { return Tensor(Shape{1}, v); }

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  // Negative axes count from the end.
  std::size_t dim(int axis) const {
    const int r = static_cast<int>(rank());
    const int a = axis < 0 ? axis + r : axis;
    require(a >= 0 && a < r, Errc::dimension, "axis out of range");
    return impl_->shape[static_cast<std::size_t>(a)];
  }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<T> data() const { return impl_->data; }
  const std::vector<T>& values() const { return impl_->data; }
  T item() const {
    require(numel() == 1, Errc::contract, "item() on a non-scalar tensor");
    return impl_->data[0];
  }

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    impl_->requires_grad = on;
    return *this;
  }
  bool has_grad() const { return impl_->grad.size() == impl_->data.size(); }
  // Allocates a zero gradient on first access.
  std::span<T> grad() const { return impl_->ensure_grad(); }
  void zero_grad() const {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
  }
  bool is_leaf() const { return impl_->node == nullptr; }

  // Reverse-mode sweep from this scalar. Leaf gradients accumulate across
  // calls; intermediate gradients are reset at the start of every sweep.
  void backward() const;

  Tensor detach() const {
    Tensor out(impl_->shape, impl_->data);
    return out;
  }

  detail::TensorImpl<T>* impl() const { return impl_.get(); }
  const std::shared_ptr<detail::TensorImpl<T>>& impl_ptr() const { return impl_; }

  bool same(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  std::shared_ptr<detail::TensorImpl<T>> impl_;
};

// Builds a result tensor and, when grad mode is on and any input needs a
// gradient, attaches a Node with the given backward rule.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> values,
                      std::initializer_list<Tensor<T>> inputs,
                      std::function<void(const detail::TensorImpl<T>&)> backward) {
  Tensor<T> out(std::move(shape), std::move(values));
  if (!GradMode::enabled()) return out;
  bool needs = false;
  for (const auto& in : inputs) needs = needs || (in.defined() && in.requires_grad());
  if (!needs) return out;
  auto node = std::make_shared<detail::Node<T>>();
  for (const auto& in : inputs)
    if (in.defined() && in.requires_grad()) node->inputs.push_back(in.impl_ptr());
  node->backward = std::move(backward);
  out.impl()->node = std::move(node);
  out.impl()->requires_grad = true;
  return out;
}

// User-defined differentiable op over a single input. `backward_fn` maps
// (input, output, output_grad) to the input gradient.
template <typename T>
Tensor<T> custom_unary(
    const Tensor<T>& x, const std::function<std::vector<T>(std::span<const T>)>& forward_fn,
    const std::function<std::vector<T>(std::span<const T> in, std::span<const T> out,
                                       std::span<const T> out_grad)>& backward_fn) {
  std::vector<T> y = forward_fn(x.values());
  require(y.size() == x.numel(), Errc::dimension, "custom_unary must preserve shape");
  return make_result<T>(x.shape(), std::move(y), {x},
                        [x, backward_fn](const detail::TensorImpl<T>& out) {
                          auto g = backward_fn(x.values(), out.data, out.grad);
                          auto gx = x.grad();
                          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
                        });
}

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace tfse

#endif  // TFSE_TENSOR_HPP_
