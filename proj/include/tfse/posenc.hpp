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

#ifndef TFSE_POSENC_HPP_
#define TFSE_POSENC_HPP_

#include <string>
#include <utility>

#include "tfse/tensor.hpp"

namespace tfse {

enum class PEKind { none, sinusoidal, rotary };

PEKind parse_pe(const std::string& s);  // none | sin | rope
const char* pe_name(PEKind pe);

// Interleaved sinusoidal table: row p holds sin(p w_0), cos(p w_0), sin(p w_1), ...
// with w_i = 10000^(-2i/d).
template <typename T>
Tensor<T> sinpe(std::size_t length, std::size_t d_model);

// Rotates coordinate pairs (2i, 2i+1) of every row t of x [.., L, d] by the
// angle t * base^(-2i/d). Differentiable; d must be even.
template <typename T>
Tensor<T> rope(const Tensor<T>& x, double base = 10000.0);

template <typename T>
std::pair<Tensor<T>, Tensor<T>> rope_apply(const Tensor<T>& q, const Tensor<T>& k,
                                           double base = 10000.0) {
  return {rope(q, base), rope(k, base)};
}

}  // namespace tfse

#endif  // TFSE_POSENC_HPP_
