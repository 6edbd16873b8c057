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

#ifndef TFSE_GRAD_CHECK_HPP_
#define TFSE_GRAD_CHECK_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include "tfse/tensor.hpp"

namespace tfse {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Compares reverse-mode gradients of sum(w * f()) against central differences
// (f(x+h) - f(x-h)) / 2h for every coordinate of every tensor in `inputs`.
// The projection weights w are drawn once from `seed` (w = 1 for scalar f).
// Per-coordinate error is |a - n| / max(|a|, |n|, floor).
template <typename T>
GradCheckResult grad_check(const std::function<Tensor<T>()>& f, const std::vector<Tensor<T>>& inputs,
                           T h, std::uint64_t seed = 1, double floor = 1e-6);

template <typename T>
GradCheckResult grad_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, const Tensor<T>& x,
                           T h, std::uint64_t seed = 1, double floor = 1e-6);

}  // namespace tfse

#endif  // TFSE_GRAD_CHECK_HPP_
