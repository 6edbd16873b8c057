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

#include "tfse/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tfse/ops.hpp"

namespace tfse {

template <typename T>
GradCheckResult grad_check(const std::function<Tensor<T>()>& f, const std::vector<Tensor<T>>& inputs,
                           T h, std::uint64_t seed, double floor) {
  std::vector<bool> prev_flags;
  for (const auto& in : inputs) {
    prev_flags.push_back(in.requires_grad());
    const_cast<Tensor<T>&>(in).set_requires_grad(true);
    in.zero_grad();
  }

  Tensor<T> weights;
  auto objective = [&](const Tensor<T>& y) {
    if (!weights.defined()) {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> dist(-1.0, 1.0);
      std::vector<T> w(y.numel());
      for (auto& v : w) v = y.numel() == 1 ? T(1) : T(dist(rng));
      weights = Tensor<T>(y.shape(), std::move(w));
    }
    return sum(mul(y, weights));
  };

  const bool prev_mode = GradMode::enabled();
  GradMode::set_enabled(true);
  objective(f()).backward();
  GradMode::set_enabled(prev_mode);
  std::vector<std::vector<T>> analytic;
  for (const auto& in : inputs) analytic.emplace_back(in.grad().begin(), in.grad().end());

  GradCheckResult res;
  {
    NoGradGuard guard;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      auto data = inputs[i].data();
      for (std::size_t j = 0; j < data.size(); ++j) {
        const T orig = data[j];
        data[j] = orig + h;
        const double up = objective(f()).item();
        data[j] = orig - h;
        const double down = objective(f()).item();
        data[j] = orig;
        const double num = (up - down) / (2.0 * static_cast<double>(h));
        const double ana = analytic[i][j];
        const double err =
            std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), floor});
        ++res.checked;
        if (err > res.max_rel_error || (std::isnan(err) && !std::isnan(res.max_rel_error))) {
          res.max_rel_error = std::isnan(err) ? INFINITY : err;
          res.worst_input = i;
          res.worst_index = j;
          res.analytic = ana;
          res.numeric = num;
        }
      }
    }
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    inputs[i].zero_grad();
    const_cast<Tensor<T>&>(inputs[i]).set_requires_grad(prev_flags[i]);
  }
  return res;
}

template <typename T>
GradCheckResult grad_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, const Tensor<T>& x,
                           T h, std::uint64_t seed, double floor) {
  return grad_check<T>(std::function<Tensor<T>()>([&] { return f(x); }),
                       std::vector<Tensor<T>>{x}, h, seed, floor);
}

template GradCheckResult grad_check(const std::function<Tensor<float>()>&,
                                    const std::vector<Tensor<float>>&, float, std::uint64_t, double);
template GradCheckResult grad_check(const std::function<Tensor<double>()>&,
                                    const std::vector<Tensor<double>>&, double, std::uint64_t,
                                    double);
template GradCheckResult grad_check(const std::function<Tensor<float>(const Tensor<float>&)>&,
                                    const Tensor<float>&, float, std::uint64_t, double);
template GradCheckResult grad_check(const std::function<Tensor<double>(const Tensor<double>&)>&,
                                    const Tensor<double>&, double, std::uint64_t, double);

}  // namespace tfse
