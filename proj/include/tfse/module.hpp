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

// Parameter registry and the common block interface.

#ifndef TFSE_MODULE_HPP_
#define TFSE_MODULE_HPP_

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tfse/tensor.hpp"

namespace tfse {

using Rng = std::mt19937_64;

// Ordered name -> tensor registry. Registration order is the canonical order
// for checkpoints and optimizer state.
template <typename T>
class ParamSet {
 public:
  Tensor<T> add(const std::string& name, Tensor<T> t) {
    for (const auto& [n, _] : items_)
      require(n != name, Errc::contract, "duplicate parameter name " + name);
    t.set_requires_grad(true);
    items_.emplace_back(name, t);
    return t;
  }

  // W ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in))
  Tensor<T> uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return filled(name, std::move(shape), rng, -bound, bound);
  }
  Tensor<T> filled(const std::string& name, Shape shape, Rng& rng, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<T> v(numel(shape));
    for (auto& x : v) x = static_cast<T>(dist(rng));
    return add(name, Tensor<T>(std::move(shape), std::move(v)));
  }
  Tensor<T> constant(const std::string& name, Shape shape, T value) {
    return add(name, Tensor<T>(std::move(shape), value));
  }
  Tensor<T> values(const std::string& name, Shape shape, std::vector<T> v) {
    return add(name, Tensor<T>(std::move(shape), std::move(v)));
  }

  const std::vector<std::pair<std::string, Tensor<T>>>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : items_) n += t.numel();
    return n;
  }

  Tensor<T> find(const std::string& name) const {
    for (const auto& [n, t] : items_)
      if (n == name) return t;
    fail(Errc::contract, "no parameter named " + name);
  }

  void zero_grad() const {
    for (const auto& [_, t] : items_) t.zero_grad();
  }

  std::vector<Tensor<T>> tensors() const {
    std::vector<Tensor<T>> out;
    out.reserve(items_.size());
    for (const auto& [_, t] : items_) out.push_back(t);
    return out;
  }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> items_;
};

// Sequence-to-sequence block over [L, d_model].
template <typename T>
class Block {
 public:
  virtual ~Block() = default;
  virtual Tensor<T> forward(const Tensor<T>& x) const = 0;
};

}  // namespace tfse

#endif  // TFSE_MODULE_HPP_
