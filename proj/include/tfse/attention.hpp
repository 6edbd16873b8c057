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

// Multi-head self-attention, Transformer block (post-norm) and Conformer
// block (macaron FFN, MHSA, convolution module), causal or non-causal.

#ifndef TFSE_ATTENTION_HPP_
#define TFSE_ATTENTION_HPP_

#include <string>

#include "tfse/module.hpp"
#include "tfse/posenc.hpp"

namespace tfse {

// Additive mask: 0 on and below the diagonal, -inf above.
template <typename T>
Tensor<T> causal_mask(std::size_t length);

template <typename T>
struct MhsaParams {
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;

  static MhsaParams create(ParamSet<T>& ps, const std::string& prefix, std::size_t d_model, Rng& rng);
};

// Scores are scaled by 1/sqrt(d_head). When `weights` is non-null it receives
// the [H, L, L] attention weights.
template <typename T>
Tensor<T> mhsa(const Tensor<T>& x, const MhsaParams<T>& p, std::size_t heads, bool causal, PEKind pe,
               Tensor<T>* weights = nullptr);

template <typename T>
struct FfnParams {
  Tensor<T> w1, b1, w2, b2;

  static FfnParams create(ParamSet<T>& ps, const std::string& prefix, std::size_t d_model,
                          std::size_t d_ff, Rng& rng);
};

struct AttentionDims {
  std::size_t d_model = 256;
  std::size_t d_ff = 1024;
  std::size_t heads = 8;
  bool causal = false;
  PEKind pe = PEKind::none;
  std::size_t conv_kernel = 31;  // Conformer depthwise kernel
};

// x -> LN(x + MHSA(x)) -> LN(. + FFN(.)), FFN = Linear-ReLU-Linear.
template <typename T>
class TransformerBlock final : public Block<T> {
 public:
  TransformerBlock(ParamSet<T>& ps, const std::string& prefix, const AttentionDims& dims, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const override;

 private:
  AttentionDims dims_;
  MhsaParams<T> attn_;
  FfnParams<T> ffn_;
  Tensor<T> ln1_g_, ln1_b_, ln2_g_, ln2_b_;
};

// x + FFN/2 -> + MHSA -> + ConvModule -> + FFN/2 -> LN. The convolution
// module is LN, pointwise GLU, depthwise conv, LN (in place of batch norm),
// swish, pointwise.
template <typename T>
class ConformerBlock final : public Block<T> {
 public:
  ConformerBlock(ParamSet<T>& ps, const std::string& prefix, const AttentionDims& dims, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const override;

 private:
  struct HalfFfn {
    Tensor<T> ln_g, ln_b;
    FfnParams<T> ffn;
  };
  Tensor<T> half_ffn(const HalfFfn& f, const Tensor<T>& x) const;
  Tensor<T> conv_module(const Tensor<T>& x) const;

  AttentionDims dims_;
  HalfFfn ff1_, ff2_;
  Tensor<T> attn_ln_g_, attn_ln_b_;
  MhsaParams<T> attn_;
  Tensor<T> conv_ln_g_, conv_ln_b_, pw1_w_, pw1_b_, dw_w_, dw_b_, norm_g_, norm_b_, pw2_w_, pw2_b_;
  Tensor<T> final_g_, final_b_;
};

}  // namespace tfse

#endif  // TFSE_ATTENTION_HPP_
