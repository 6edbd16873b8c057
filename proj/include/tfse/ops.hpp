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

// Differentiable operator set shared by every backbone. All ops are defined
// for float and double; shapes are row-major with the feature axis last.

#ifndef TFSE_OPS_HPP_
#define TFSE_OPS_HPP_

#include <vector>

#include "tfse/tensor.hpp"

namespace tfse {

enum class Act { relu, sigmoid, silu, tanh, exp, softplus, logsigmoid };

// [..,m,k] x [k,n] (shared right operand) or [..,m,k] x [..,k,n] (batched).
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// Swaps the two trailing axes.
template <typename T>
Tensor<T> transpose_last2(const Tensor<T>& x);

// x [..,in] . w [in,out] + b [out]; `b` may be undefined.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

// Trailing-axis broadcasts: x [..,d] with v [d].
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);
template <typename T>
Tensor<T> mul_channel(const Tensor<T>& x, const Tensor<T>& gain);

// x [..,m,n] + y [m,n], y repeated over the leading axes.
template <typename T>
Tensor<T> add_broadcast(const Tensor<T>& x, const Tensor<T>& y);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Act kind);

// Normalizes over the last axis; gain and bias may be undefined.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-5));

template <typename T>
Tensor<T> rms_norm(const Tensor<T>& x, const Tensor<T>& gain, T eps = T(1e-5));

// Softmax over the last axis with max subtraction; -inf maps to exactly 0.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x);

// x [L,C_in], kernel [k,C_in,C_out], bias [C_out] (may be undefined).
// Output length is L. Causal mode pads k-1 zeros on the left, otherwise
// (k-1)/2 on the left and the remainder on the right.
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                 bool causal);

// Per-channel variant: x [L,C], kernel [k,C], bias [C].
template <typename T>
Tensor<T> depthwise_conv1d(const Tensor<T>& x, const Tensor<T>& kernel,
                           const Tensor<T>& bias, bool causal);

// [L, H*dh] <-> [H, L, dh]
template <typename T>
Tensor<T> split_heads(const Tensor<T>& x, std::size_t heads);
template <typename T>
Tensor<T> merge_heads(const Tensor<T>& x);

template <typename T>
Tensor<T> slice_last(const Tensor<T>& x, std::size_t begin, std::size_t end);
template <typename T>
Tensor<T> concat_last(const std::vector<Tensor<T>>& parts);

// Reverses the leading (time) axis.
template <typename T>
Tensor<T> reverse_time(const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

// Mean over all elements of (pred - target)^2.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);

}  // namespace tfse

#endif  // TFSE_OPS_HPP_
