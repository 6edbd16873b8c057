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

// Matrix-memory LSTM (mLSTM) with stabilized exponential gating, the mLSTM
// block and its cascaded / parallel bidirectional compositions.

#ifndef TFSE_XLSTM_HPP_
#define TFSE_XLSTM_HPP_

#include <string>
#include <vector>

#include "tfse/module.hpp"

namespace tfse {

// Per-head recurrent state in stabilized form: C and n are stored scaled by
// exp(-m).
template <typename T>
struct MLSTMState {
  std::size_t head_dim = 0;
  std::vector<T> C;  // [d_head, d_head], C[a * d_head + b]
  std::vector<T> n;  // [d_head]
  T m = 0;

  static MLSTMState zeros(std::size_t d_head) {
    MLSTMState s;
    s.head_dim = d_head;
    s.C.assign(d_head * d_head, T(0));
    s.n.assign(d_head, T(0));
    return s;
  }
};

// One recurrence step for a single head:
//   m_t = max(f~ + m_{t-1}, i~),  i' = exp(i~ - m_t),  f' = exp(f~ + m_{t-1} - m_t)
//   C_t = f' C_{t-1} + i' v k^T,  n_t = f' n_{t-1} + i' k
//   h_t = C_t q / max(|n_t^T q|, exp(-m_t))
// f~ is the log-domain forget pre-activation. The exp(-m_t) floor is the
// stabilized image of max(|n^T q|, 1) in the unscaled recurrence.
template <typename T>
std::vector<T> mlstm_cell_step(MLSTMState<T>& state, const T* q, const T* k, const T* v,
                               T i_pre, T f_log);

// q, k, v [H, L, d_head]; i_pre, f_log [H, L]. Returns h [H, L, d_head].
// Differentiable in all arguments; the stabilizer is held constant in the
// backward pass, which is exact because h does not depend on it.
template <typename T>
Tensor<T> mlstm_scan(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                     const Tensor<T>& i_pre, const Tensor<T>& f_log);

// Block-diagonal projection: x [L, G*b], w [G, b, b].
template <typename T>
Tensor<T> headwise_linear(const Tensor<T>& x, const Tensor<T>& w);

struct XLSTMDims {
  std::size_t d_model = 256;
  std::size_t proj_factor = 2;
  std::size_t heads = 4;
  std::size_t conv_kernel = 4;
  std::size_t qkv_block = 4;

  std::size_t d_inner() const { return proj_factor * d_model; }
};

// Residual-free mLSTM path: mix(x) such that the block is x + mix(x).
template <typename T>
class MLSTMMixer {
 public:
  MLSTMMixer(ParamSet<T>& ps, const std::string& prefix, const XLSTMDims& dims, Rng& rng);
  Tensor<T> operator()(const Tensor<T>& x) const;

  // Overrides the forget-gate bias (testing the stabilizer at extreme gates).
  void set_forget_bias(T value) const;

 private:
  XLSTMDims dims_;
  Tensor<T> ln_g_, up_w_, conv_w_, conv_b_, wq_, wk_, wv_, wi_, bi_, wf_, bf_, out_g_, skip_,
      down_w_;
};

template <typename T>
class MLSTMBlock final : public Block<T> {
 public:
  MLSTMBlock(ParamSet<T>& ps, const std::string& prefix, const XLSTMDims& dims, Rng& rng)
      : mixer_(ps, prefix, dims, rng) {}
  Tensor<T> forward(const Tensor<T>& x) const override;
  const MLSTMMixer<T>& mixer() const { return mixer_; }

 private:
  MLSTMMixer<T> mixer_;
};

// reverse(bwd(reverse(fwd(x)))), each stage with its own residual.
template <typename T>
class CBixLSTMBlock final : public Block<T> {
 public:
  CBixLSTMBlock(ParamSet<T>& ps, const std::string& prefix, const XLSTMDims& dims, Rng& rng)
      : fwd_(ps, prefix + ".fwd", dims, rng), bwd_(ps, prefix + ".bwd", dims, rng) {}
  Tensor<T> forward(const Tensor<T>& x) const override;
  const MLSTMBlock<T>& forward_stage() const { return fwd_; }
  const MLSTMBlock<T>& backward_stage() const { return bwd_; }

 private:
  MLSTMBlock<T> fwd_, bwd_;
};

// x + fwd(x) + reverse(bwd(reverse(x))).
template <typename T>
class PBixLSTMBlock final : public Block<T> {
 public:
  PBixLSTMBlock(ParamSet<T>& ps, const std::string& prefix, const XLSTMDims& dims, Rng& rng)
      : fwd_(ps, prefix + ".fwd", dims, rng), bwd_(ps, prefix + ".bwd", dims, rng) {}
  Tensor<T> forward(const Tensor<T>& x) const override;
  const MLSTMMixer<T>& forward_branch() const { return fwd_; }
  const MLSTMMixer<T>& backward_branch() const { return bwd_; }

 private:
  MLSTMMixer<T> fwd_, bwd_;
};

}  // namespace tfse

#endif  // TFSE_XLSTM_HPP_
