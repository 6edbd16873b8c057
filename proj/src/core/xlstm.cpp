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

#include "tfse/xlstm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "tfse/ops.hpp"

namespace tfse {

namespace {

template <typename T>
T stabilized_denominator(T s, T m) {
  return std::max({std::abs(s), std::exp(-m), std::numeric_limits<T>::min()});
}

}  // namespace

template <typename T>
std::vector<T> mlstm_cell_step(MLSTMState<T>& st, const T* q, const T* k, const T* v, T i_pre,
                               T f_log) {
  require(std::isfinite(i_pre) && std::isfinite(f_log), Errc::numeric,
          "mlstm_cell_step: non-finite gate pre-activation");
  const std::size_t dh = st.head_dim;
  const T m = std::max(f_log + st.m, i_pre);
  const T ig = std::exp(i_pre - m);
  const T fg = std::exp(f_log + st.m - m);
  T s = 0;
  for (std::size_t a = 0; a < dh; ++a) {
    T* row = st.C.data() + a * dh;
    const T iv = ig * v[a];
    for (std::size_t b = 0; b < dh; ++b) row[b] = fg * row[b] + iv * k[b];
    st.n[a] = fg * st.n[a] + ig * k[a];
    s += st.n[a] * q[a];
  }
  st.m = m;
  const T den = stabilized_denominator(s, m);
  std::vector<T> h(dh);
  for (std::size_t a = 0; a < dh; ++a) {
    const T* row = st.C.data() + a * dh;
    T acc = 0;
    for (std::size_t b = 0; b < dh; ++b) acc += row[b] * q[b];
    h[a] = acc / den;
  }
  for (T x : h) require(std::isfinite(x), Errc::numeric, "mlstm_cell_step: non-finite output");
  require(std::isfinite(st.m), Errc::numeric, "mlstm_cell_step: non-finite stabilizer");
  return h;
}

template <typename T>
Tensor<T> mlstm_scan(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                     const Tensor<T>& i_pre, const Tensor<T>& f_log) {
  require(q.rank() == 3 && k.shape() == q.shape() && v.shape() == q.shape(), Errc::dimension,
          "mlstm_scan expects q, k, v of equal shape [H, L, d_head]");
  const std::size_t heads = q.dim(0), len = q.dim(1), dh = q.dim(2);
  require(i_pre.shape() == Shape{heads, len} && f_log.shape() == Shape{heads, len},
          Errc::dimension, "mlstm_scan: gates must be [H, L]");
  const bool track = GradMode::enabled() &&
                     (q.requires_grad() || k.requires_grad() || v.requires_grad() ||
                      i_pre.requires_grad() || f_log.requires_grad());

  // Saved for backward: C_t, n_t, m_t, den_t, s_t per head and step.
  struct Saved {
    std::vector<T> C, n, m, den, s;
  };
  auto saved = std::make_shared<Saved>();
  if (track) {
    saved->C.resize(heads * len * dh * dh);
    saved->n.resize(heads * len * dh);
    saved->m.resize(heads * len);
    saved->den.resize(heads * len);
    saved->s.resize(heads * len);
  }
  std::vector<T> out(heads * len * dh);
  const T* qv = q.values().data();
  const T* kv = k.values().data();
  const T* vv = v.values().data();
  const T* iv = i_pre.values().data();
  const T* fv = f_log.values().data();
  for (std::size_t h = 0; h < heads; ++h) {
    auto st = MLSTMState<T>::zeros(dh);
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t r = h * len + t;
      auto ht = mlstm_cell_step(st, qv + r * dh, kv + r * dh, vv + r * dh, iv[r], fv[r]);
      std::copy(ht.begin(), ht.end(), out.begin() + r * dh);
      if (track) {
        std::copy(st.C.begin(), st.C.end(), saved->C.begin() + r * dh * dh);
        std::copy(st.n.begin(), st.n.end(), saved->n.begin() + r * dh);
        T s = 0;
        for (std::size_t a = 0; a < dh; ++a) s += st.n[a] * qv[r * dh + a];
        saved->m[r] = st.m;
        saved->s[r] = s;
        saved->den[r] = stabilized_denominator(s, st.m);
      }
    }
  }

  return make_result<T>(
      q.shape(), std::move(out), {q, k, v, i_pre, f_log},
      [q, k, v, i_pre, f_log, saved, heads, len, dh](const detail::TensorImpl<T>& o) {
        const T* qv = q.values().data();
        const T* kv = k.values().data();
        const T* vv = v.values().data();
        const T* iv = i_pre.values().data();
        const T* fv = f_log.values().data();
        const T* gy = o.grad.data();
        const T* hy = o.data.data();
        std::vector<T> gq(q.numel(), T(0)), gk(k.numel(), T(0)), gv(v.numel(), T(0)),
            gi(i_pre.numel(), T(0)), gf(f_log.numel(), T(0));
        std::vector<T> gC(dh * dh), gn(dh), gC_acc(dh * dh), gn_acc(dh), gnum(dh), tmp(dh);
        for (std::size_t h = 0; h < heads; ++h) {
          std::fill(gC_acc.begin(), gC_acc.end(), T(0));
          std::fill(gn_acc.begin(), gn_acc.end(), T(0));
          for (std::size_t t = len; t-- > 0;) {
            const std::size_t r = h * len + t;
            const T* qt = qv + r * dh;
            const T* kt = kv + r * dh;
            const T* vt = vv + r * dh;
            const T* Ct = saved->C.data() + r * dh * dh;
            const T* nt = saved->n.data() + r * dh;
            const T m_prev = t > 0 ? saved->m[r - 1] : T(0);
            const T m = saved->m[r];
            const T ig = std::exp(iv[r] - m);
            const T fg = std::exp(fv[r] + m_prev - m);
            const T den = saved->den[r];
            const T s = saved->s[r];

            T gden = 0;
            for (std::size_t a = 0; a < dh; ++a) {
              gnum[a] = gy[r * dh + a] / den;
              gden -= gy[r * dh + a] * hy[r * dh + a] / den;
            }
            T gs = 0;
            if (std::abs(s) >= den) gs = s >= 0 ? gden : -gden;

            for (std::size_t a = 0; a < dh; ++a) {
              for (std::size_t b = 0; b < dh; ++b)
                gC[a * dh + b] = gC_acc[a * dh + b] + gnum[a] * qt[b];
              gn[a] = gn_acc[a] + gs * qt[a];
            }
            // gq = C^T gnum + gs n
            for (std::size_t b = 0; b < dh; ++b) tmp[b] = gs * nt[b];
            for (std::size_t a = 0; a < dh; ++a)
              for (std::size_t b = 0; b < dh; ++b) tmp[b] += Ct[a * dh + b] * gnum[a];
            for (std::size_t b = 0; b < dh; ++b) gq[r * dh + b] += tmp[b];

            // Previous state.
            T g_fg = 0;
            if (t > 0) {
              const T* Cp = saved->C.data() + (r - 1) * dh * dh;
              const T* np = saved->n.data() + (r - 1) * dh;
              for (std::size_t j = 0; j < dh * dh; ++j) g_fg += gC[j] * Cp[j];
              for (std::size_t a = 0; a < dh; ++a) g_fg += gn[a] * np[a];
            }
            // gCk = gC k,  gCv = gC^T v
            T g_ig = 0;
            std::fill(tmp.begin(), tmp.end(), T(0));
            for (std::size_t a = 0; a < dh; ++a) {
              T gck = 0;
              for (std::size_t b = 0; b < dh; ++b) {
                gck += gC[a * dh + b] * kt[b];
                tmp[b] += gC[a * dh + b] * vt[a];
              }
              g_ig += vt[a] * gck;
              gv[r * dh + a] += ig * gck;
            }
            for (std::size_t b = 0; b < dh; ++b) {
              g_ig += gn[b] * kt[b];
              gk[r * dh + b] += ig * (tmp[b] + gn[b]);
            }
            gi[r] += g_ig * ig;
            gf[r] += g_fg * fg;
            for (std::size_t j = 0; j < dh * dh; ++j) gC_acc[j] = fg * gC[j];
            for (std::size_t a = 0; a < dh; ++a) gn_acc[a] = fg * gn[a];
          }
        }
        auto acc = [](const Tensor<T>& t, const std::vector<T>& g) {
          if (!t.requires_grad()) return;
          auto dst = t.grad();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
        };
        acc(q, gq);
        acc(k, gk);
        acc(v, gv);
        acc(i_pre, gi);
        acc(f_log, gf);
      });
}

template <typename T>
Tensor<T> headwise_linear(const Tensor<T>& x, const Tensor<T>& w) {
  require(x.rank() == 2 && w.rank() == 3 && w.dim(1) == w.dim(2), Errc::dimension,
          "headwise_linear expects x [L, G*b] and w [G, b, b]");
  const std::size_t len = x.dim(0), groups = w.dim(0), bs = w.dim(1), width = groups * bs;
  require(x.dim(1) == width, Errc::dimension,
          "headwise_linear: width " + std::to_string(x.dim(1)) + " != " + std::to_string(width));
  std::vector<T> out(len * width, T(0));
  const T* xv = x.values().data();
  const T* wv = w.values().data();
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t g = 0; g < groups; ++g) {
      const T* xr = xv + t * width + g * bs;
      const T* wg = wv + g * bs * bs;
      T* yr = out.data() + t * width + g * bs;
      for (std::size_t i = 0; i < bs; ++i)
        for (std::size_t j = 0; j < bs; ++j) yr[j] += xr[i] * wg[i * bs + j];
    }
  return make_result<T>(
      x.shape(), std::move(out), {x, w}, [x, w, len, groups, bs, width](const detail::TensorImpl<T>& o) {
        const T* xv = x.values().data();
        const T* wv = w.values().data();
        const T* gy = o.grad.data();
        T* gx = x.requires_grad() ? x.grad().data() : nullptr;
        T* gw = w.requires_grad() ? w.grad().data() : nullptr;
        for (std::size_t t = 0; t < len; ++t)
          for (std::size_t g = 0; g < groups; ++g) {
            const T* xr = xv + t * width + g * bs;
            const T* gr = gy + t * width + g * bs;
            for (std::size_t i = 0; i < bs; ++i)
              for (std::size_t j = 0; j < bs; ++j) {
                if (gx) gx[t * width + g * bs + i] += gr[j] * wv[g * bs * bs + i * bs + j];
                if (gw) gw[g * bs * bs + i * bs + j] += xr[i] * gr[j];
              }
          }
      });
}

template <typename T>
MLSTMMixer<T>::MLSTMMixer(ParamSet<T>& ps, const std::string& prefix, const XLSTMDims& dims,
                          Rng& rng)
    : dims_(dims) {
  const std::size_t d = dims.d_model, di = dims.d_inner(), nh = dims.heads, bs = dims.qkv_block;
  require(d >= 1 && di >= 1 && nh >= 1 && di % nh == 0, Errc::config,
          "xLSTM heads (" + std::to_string(nh) + ") must divide d_inner (" + std::to_string(di) + ")");
  require(bs >= 1 && di % bs == 0, Errc::config, "qkv block size must divide d_inner");
  require(dims.conv_kernel >= 1, Errc::config, "xLSTM conv kernel must be >= 1");
  ln_g_ = ps.constant(prefix + ".norm.g", {d}, T(1));
  up_w_ = ps.uniform(prefix + ".up_proj.w", {d, 2 * di}, d, rng);
  conv_w_ = ps.uniform(prefix + ".conv.w", {dims.conv_kernel, di}, dims.conv_kernel, rng);
  conv_b_ = ps.constant(prefix + ".conv.b", {di}, T(0));
  wq_ = ps.uniform(prefix + ".q.w", {di / bs, bs, bs}, bs, rng);
  wk_ = ps.uniform(prefix + ".k.w", {di / bs, bs, bs}, bs, rng);
  wv_ = ps.uniform(prefix + ".v.w", {di / bs, bs, bs}, bs, rng);
  wi_ = ps.constant(prefix + ".igate.w", {3 * di, nh}, T(0));
  {
    std::normal_distribution<double> dist(0.0, 0.1);
    std::vector<T> b(nh);
    for (auto& x : b) x = static_cast<T>(dist(rng));
    bi_ = ps.values(prefix + ".igate.b", {nh}, std::move(b));
  }
  wf_ = ps.constant(prefix + ".fgate.w", {3 * di, nh}, T(0));
  {
    std::vector<T> b(nh);
    for (std::size_t h = 0; h < nh; ++h)
      b[h] = static_cast<T>(nh == 1 ? 3.0 : 3.0 + 3.0 * double(h) / double(nh - 1));
    bf_ = ps.values(prefix + ".fgate.b", {nh}, std::move(b));
  }
  out_g_ = ps.constant(prefix + ".outnorm.g", {di}, T(1));
  skip_ = ps.constant(prefix + ".skip", {di}, T(1));
  down_w_ = ps.uniform(prefix + ".down_proj.w", {di, d}, di, rng);
}

template <typename T>
void MLSTMMixer<T>::set_forget_bias(T value) const {
  for (auto& b : bf_.data()) b = value;
}

template <typename T>
Tensor<T> MLSTMMixer<T>::operator()(const Tensor<T>& x) const {
  const std::size_t di = dims_.d_inner(), nh = dims_.heads, dh = di / nh;
  auto up = linear(layer_norm(x, ln_g_, Tensor<T>()), up_w_, Tensor<T>());
  auto xm = slice_last(up, 0, di);
  auto z = slice_last(up, di, 2 * di);
  auto act = activation(depthwise_conv1d(xm, conv_w_, conv_b_, true), Act::silu);
  auto q = headwise_linear(act, wq_);
  auto k = headwise_linear(act, wk_);
  auto v = headwise_linear(xm, wv_);
  auto gate_in = concat_last<T>({q, k, v});
  auto ig = transpose_last2(linear(gate_in, wi_, bi_));
  auto lf = activation(transpose_last2(linear(gate_in, wf_, bf_)), Act::logsigmoid);
  auto hs = mlstm_scan(split_heads(q, nh), scale(split_heads(k, nh), T(1) / std::sqrt(T(dh))),
                       split_heads(v, nh), ig, lf);
  auto y = mul_channel(merge_heads(layer_norm(hs, Tensor<T>(), Tensor<T>())), out_g_);
  y = add(y, mul_channel(act, skip_));
  y = mul(y, activation(z, Act::silu));
  return linear(y, down_w_, Tensor<T>());
}

template <typename T>
Tensor<T> MLSTMBlock<T>::forward(const Tensor<T>& x) const {
  return add(x, mixer_(x));
}

template <typename T>
Tensor<T> CBixLSTMBlock<T>::forward(const Tensor<T>& x) const {
  return reverse_time(bwd_.forward(reverse_time(fwd_.forward(x))));
}

template <typename T>
Tensor<T> PBixLSTMBlock<T>::forward(const Tensor<T>& x) const {
  return add(add(x, fwd_(x)), reverse_time(bwd_(reverse_time(x))));
}

#define TFSE_INSTANTIATE_XLSTM(T)                                                             \
  template struct MLSTMState<T>;                                                              \
  template std::vector<T> mlstm_cell_step(MLSTMState<T>&, const T*, const T*, const T*, T, T); \
  template Tensor<T> mlstm_scan(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,         \
                                const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> headwise_linear(const Tensor<T>&, const Tensor<T>&);                     \
  template class MLSTMMixer<T>;                                                               \
  template class MLSTMBlock<T>;                                                               \
  template class CBixLSTMBlock<T>;                                                            \
  template class PBixLSTMBlock<T>;

TFSE_INSTANTIATE_XLSTM(float)
TFSE_INSTANTIATE_XLSTM(double)

}  // namespace tfse
