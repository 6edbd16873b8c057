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

#include "tfse/attention.hpp"

#include <cmath>
#include <limits>

#include "tfse/ops.hpp"

namespace tfse {

template <typename T>
Tensor<T> causal_mask(std::size_t length) {
  Tensor<T> m(Shape{length, length}, T(0));
  auto d = m.data();
  for (std::size_t i = 0; i < length; ++i)
    for (std::size_t j = i + 1; j < length; ++j) d[i * length + j] = -std::numeric_limits<T>::infinity();
  return m;
}

template <typename T>
MhsaParams<T> MhsaParams<T>::create(ParamSet<T>& ps, const std::string& prefix, std::size_t d,
                                    Rng& rng) {
  MhsaParams p;
  p.wq = ps.uniform(prefix + ".wq", {d, d}, d, rng);
  p.bq = ps.constant(prefix + ".bq", {d}, T(0));
  p.wk = ps.uniform(prefix + ".wk", {d, d}, d, rng);
  p.bk = ps.constant(prefix + ".bk", {d}, T(0));
  p.wv = ps.uniform(prefix + ".wv", {d, d}, d, rng);
  p.bv = ps.constant(prefix + ".bv", {d}, T(0));
  p.wo = ps.uniform(prefix + ".wo", {d, d}, d, rng);
  p.bo = ps.constant(prefix + ".bo", {d}, T(0));
  return p;
}

template <typename T>
Tensor<T> mhsa(const Tensor<T>& x, const MhsaParams<T>& p, std::size_t heads, bool causal, PEKind pe,
               Tensor<T>* weights) {
  require(x.rank() == 2, Errc::dimension, "mhsa expects [L, d_model]");
  const std::size_t len = x.dim(0), d = x.dim(1);
  require(heads >= 1 && d % heads == 0, Errc::config,
          "d_model " + std::to_string(d) + " is not divisible by H=" + std::to_string(heads));
  const std::size_t dh = d / heads;
  auto q = split_heads(linear(x, p.wq, p.bq), heads);
  auto k = split_heads(linear(x, p.wk, p.bk), heads);
  auto v = split_heads(linear(x, p.wv, p.bv), heads);
  if (pe == PEKind::rotary) {
    q = rope(q);
    k = rope(k);
  }
  auto scores = scale(matmul(q, transpose_last2(k)), T(1) / std::sqrt(static_cast<T>(dh)));
  if (causal) scores = add_broadcast(scores, causal_mask<T>(len));
  auto attn = softmax(scores);
  if (weights) *weights = attn;
  return linear(merge_heads(matmul(attn, v)), p.wo, p.bo);
}

template <typename T>
FfnParams<T> FfnParams<T>::create(ParamSet<T>& ps, const std::string& prefix, std::size_t d,
                                  std::size_t d_ff, Rng& rng) {
  FfnParams f;
  f.w1 = ps.uniform(prefix + ".w1", {d, d_ff}, d, rng);
  f.b1 = ps.constant(prefix + ".b1", {d_ff}, T(0));
  f.w2 = ps.uniform(prefix + ".w2", {d_ff, d}, d_ff, rng);
  f.b2 = ps.constant(prefix + ".b2", {d}, T(0));
  return f;
}

template <typename T>
TransformerBlock<T>::TransformerBlock(ParamSet<T>& ps, const std::string& prefix,
                                      const AttentionDims& dims, Rng& rng)
    : dims_(dims) {
  require(dims.d_model % dims.heads == 0, Errc::config, "d_model must be divisible by heads");
  attn_ = MhsaParams<T>::create(ps, prefix + ".attn", dims.d_model, rng);
  ffn_ = FfnParams<T>::create(ps, prefix + ".ffn", dims.d_model, dims.d_ff, rng);
  ln1_g_ = ps.constant(prefix + ".ln1.g", {dims.d_model}, T(1));
  ln1_b_ = ps.constant(prefix + ".ln1.b", {dims.d_model}, T(0));
  ln2_g_ = ps.constant(prefix + ".ln2.g", {dims.d_model}, T(1));
  ln2_b_ = ps.constant(prefix + ".ln2.b", {dims.d_model}, T(0));
}

template <typename T>
Tensor<T> TransformerBlock<T>::forward(const Tensor<T>& x) const {
  auto h = layer_norm(add(x, mhsa(x, attn_, dims_.heads, dims_.causal, dims_.pe)), ln1_g_, ln1_b_);
  auto f = linear(activation(linear(h, ffn_.w1, ffn_.b1), Act::relu), ffn_.w2, ffn_.b2);
  return layer_norm(add(h, f), ln2_g_, ln2_b_);
}

template <typename T>
ConformerBlock<T>::ConformerBlock(ParamSet<T>& ps, const std::string& prefix,
                                  const AttentionDims& dims, Rng& rng)
    : dims_(dims) {
  const std::size_t d = dims.d_model;
  require(d % dims.heads == 0, Errc::config, "d_model must be divisible by heads");
  require(dims.conv_kernel >= 1 && (dims.causal || dims.conv_kernel % 2 == 1), Errc::config,
          "non-causal Conformer needs an odd depthwise kernel");
  auto make_half = [&](const std::string& name) {
    HalfFfn f;
    f.ln_g = ps.constant(prefix + "." + name + ".ln.g", {d}, T(1));
    f.ln_b = ps.constant(prefix + "." + name + ".ln.b", {d}, T(0));
    f.ffn = FfnParams<T>::create(ps, prefix + "." + name, d, dims.d_ff, rng);
    return f;
  };
  ff1_ = make_half("ff1");
  attn_ln_g_ = ps.constant(prefix + ".attn.ln.g", {d}, T(1));
  attn_ln_b_ = ps.constant(prefix + ".attn.ln.b", {d}, T(0));
  attn_ = MhsaParams<T>::create(ps, prefix + ".attn", d, rng);
  conv_ln_g_ = ps.constant(prefix + ".conv.ln.g", {d}, T(1));
  conv_ln_b_ = ps.constant(prefix + ".conv.ln.b", {d}, T(0));
  pw1_w_ = ps.uniform(prefix + ".conv.pw1.w", {d, 2 * d}, d, rng);
  pw1_b_ = ps.constant(prefix + ".conv.pw1.b", {2 * d}, T(0));
  dw_w_ = ps.uniform(prefix + ".conv.dw.w", {dims.conv_kernel, d}, dims.conv_kernel, rng);
  dw_b_ = ps.constant(prefix + ".conv.dw.b", {d}, T(0));
  norm_g_ = ps.constant(prefix + ".conv.norm.g", {d}, T(1));
  norm_b_ = ps.constant(prefix + ".conv.norm.b", {d}, T(0));
  pw2_w_ = ps.uniform(prefix + ".conv.pw2.w", {d, d}, d, rng);
  pw2_b_ = ps.constant(prefix + ".conv.pw2.b", {d}, T(0));
  ff2_ = make_half("ff2");
  final_g_ = ps.constant(prefix + ".final.g", {d}, T(1));
  final_b_ = ps.constant(prefix + ".final.b", {d}, T(0));
}

template <typename T>
Tensor<T> ConformerBlock<T>::half_ffn(const HalfFfn& f, const Tensor<T>& x) const {
  auto h = layer_norm(x, f.ln_g, f.ln_b);
  h = linear(activation(linear(h, f.ffn.w1, f.ffn.b1), Act::silu), f.ffn.w2, f.ffn.b2);
  return add(x, scale(h, T(0.5)));
}

template <typename T>
Tensor<T> ConformerBlock<T>::conv_module(const Tensor<T>& x) const {
  const std::size_t d = dims_.d_model;
  auto h = linear(layer_norm(x, conv_ln_g_, conv_ln_b_), pw1_w_, pw1_b_);
  h = mul(slice_last(h, 0, d), activation(slice_last(h, d, 2 * d), Act::sigmoid));  // GLU
  h = depthwise_conv1d(h, dw_w_, dw_b_, dims_.causal);
  h = activation(layer_norm(h, norm_g_, norm_b_), Act::silu);
  return linear(h, pw2_w_, pw2_b_);
}

template <typename T>
Tensor<T> ConformerBlock<T>::forward(const Tensor<T>& x) const {
  auto h = half_ffn(ff1_, x);
  h = add(h, mhsa(layer_norm(h, attn_ln_g_, attn_ln_b_), attn_, dims_.heads, dims_.causal, dims_.pe));
  h = add(h, conv_module(h));
  h = half_ffn(ff2_, h);
  return layer_norm(h, final_g_, final_b_);
}

template Tensor<float> causal_mask(std::size_t);
template Tensor<double> causal_mask(std::size_t);
template struct MhsaParams<float>;
template struct MhsaParams<double>;
template struct FfnParams<float>;
template struct FfnParams<double>;
template Tensor<float> mhsa(const Tensor<float>&, const MhsaParams<float>&, std::size_t, bool, PEKind,
                            Tensor<float>*);
template Tensor<double> mhsa(const Tensor<double>&, const MhsaParams<double>&, std::size_t, bool,
                             PEKind, Tensor<double>*);
template class TransformerBlock<float>;
template class TransformerBlock<double>;
template class ConformerBlock<float>;
template class ConformerBlock<double>;

}  // namespace tfse
