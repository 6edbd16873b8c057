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

#include "tfse/ssm.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tfse/ops.hpp"

namespace tfse {

ScanMode parse_scan_mode(const std::string& s) {
  if (s == "sequential" || s == "seq") return ScanMode::sequential;
  if (s == "parallel" || s == "par") return ScanMode::parallel;
  fail(Errc::config, "unknown scan mode '" + s + "' (expected sequential|parallel)");
}

const char* scan_mode_name(ScanMode m) {
  return m == ScanMode::parallel ? "parallel" : "sequential";
}

namespace {

template <typename T>
void check_finite(const Tensor<T>& t, const char* what) {
  for (T v : t.values())
    require(std::isfinite(v), Errc::numeric, std::string("selective_scan: non-finite ") + what);
}

// Writes y and, when states is non-null, every h_t at states[t * D * N].
template <typename T>
void scan_sequential(std::size_t len, std::size_t dim, std::size_t nst, const T* u, const T* dt,
                     const T* a, const T* b, const T* c, const T* dsk, T* y, T* states) {
  std::vector<T> h(dim * nst, T(0));
  for (std::size_t t = 0; t < len; ++t) {
    const T* bt = b + t * nst;
    const T* ct = c + t * nst;
    for (std::size_t d = 0; d < dim; ++d) {
      const T delta = dt[t * dim + d];
      const T du = delta * u[t * dim + d];
      T* hd = h.data() + d * nst;
      const T* ad = a + d * nst;
      T acc = 0;
      for (std::size_t n = 0; n < nst; ++n) {
        hd[n] = std::exp(delta * ad[n]) * hd[n] + du * bt[n];
        acc += ct[n] * hd[n];
      }
      y[t * dim + d] = acc + dsk[d] * u[t * dim + d];
    }
    if (states) std::copy(h.begin(), h.end(), states + t * dim * nst);
  }
}

template <typename T>
void scan_parallel(std::size_t len, std::size_t dim, std::size_t nst, const T* u, const T* dt,
                   const T* a, const T* b, const T* c, const T* dsk, T* y, T* states) {
  const std::size_t width = dim * nst;
  std::size_t padded = 1;
  while (padded < len) padded <<= 1;
  // Element t is the affine map h -> ea[t] * h + eb[t]; padding is the identity.
  std::vector<T> ea(padded * width, T(1)), eb(padded * width, T(0));
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t d = 0; d < dim; ++d) {
      const T delta = dt[t * dim + d];
      const T du = delta * u[t * dim + d];
      for (std::size_t n = 0; n < nst; ++n) {
        ea[t * width + d * nst + n] = std::exp(delta * a[d * nst + n]);
        eb[t * width + d * nst + n] = du * b[t * nst + n];
      }
    }
  // Up-sweep. Slot i accumulates (slot i - stride) then (slot i).
  for (std::size_t stride = 1; stride < padded; stride <<= 1)
    for (std::size_t i = 2 * stride - 1; i < padded; i += 2 * stride) {
      const T* a1 = ea.data() + (i - stride) * width;
      const T* b1 = eb.data() + (i - stride) * width;
      T* a2 = ea.data() + i * width;
      T* b2 = eb.data() + i * width;
      for (std::size_t j = 0; j < width; ++j) {
        b2[j] = a2[j] * b1[j] + b2[j];
        a2[j] = a2[j] * a1[j];
      }
    }
  // Down-sweep to exclusive prefixes, root reset to the identity.
  std::fill(ea.begin() + (padded - 1) * width, ea.begin() + padded * width, T(1));
  std::fill(eb.begin() + (padded - 1) * width, eb.begin() + padded * width, T(0));
  std::vector<T> ta(width), tb(width);
  for (std::size_t stride = padded >> 1; stride >= 1; stride >>= 1) {
    for (std::size_t i = 2 * stride - 1; i < padded; i += 2 * stride) {
      T* la = ea.data() + (i - stride) * width;
      T* lb = eb.data() + (i - stride) * width;
      T* pa = ea.data() + i * width;
      T* pb = eb.data() + i * width;
      std::copy(la, la + width, ta.begin());
      std::copy(lb, lb + width, tb.begin());
      std::copy(pa, pa + width, la);
      std::copy(pb, pb + width, lb);
      // right = prefix then left subtree
      for (std::size_t j = 0; j < width; ++j) {
        pb[j] = ta[j] * pb[j] + tb[j];
        pa[j] = ta[j] * pa[j];
      }
    }
    if (stride == 1) break;
  }
  // Exclusive prefix applied to h = 0 is eb; one more step gives h_t.
  for (std::size_t t = 0; t < len; ++t) {
    const T* prev = eb.data() + t * width;
    for (std::size_t d = 0; d < dim; ++d) {
      const T delta = dt[t * dim + d];
      const T du = delta * u[t * dim + d];
      T acc = 0;
      for (std::size_t n = 0; n < nst; ++n) {
        const std::size_t j = d * nst + n;
        const T h = std::exp(delta * a[j]) * prev[j] + du * b[t * nst + n];
        if (states) states[t * width + j] = h;
        acc += c[t * nst + n] * h;
      }
      y[t * dim + d] = acc + dsk[d] * u[t * dim + d];
    }
  }
}

template <typename T>
void accumulate(const Tensor<T>& t, const std::vector<T>& g) {
  if (!t.requires_grad()) return;
  auto dst = t.grad();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

}  // namespace

template <typename T>
Tensor<T> selective_scan(const Tensor<T>& u, const Tensor<T>& delta, const Tensor<T>& A,
                         const Tensor<T>& B, const Tensor<T>& C, const Tensor<T>& D_skip,
                         ScanMode mode) {
  require(u.rank() == 2 && A.rank() == 2 && B.rank() == 2 && C.rank() == 2, Errc::dimension,
          "selective_scan expects u [L,D], A [D,N], B/C [L,N]");
  const std::size_t len = u.dim(0), dim = u.dim(1), nst = A.dim(1);
  require(delta.shape() == u.shape(), Errc::dimension,
          "selective_scan: delta " + shape_str(delta.shape()) + " vs u " + shape_str(u.shape()));
  require(A.dim(0) == dim, Errc::dimension, "selective_scan: A has " +
                                                std::to_string(A.dim(0)) + " rows, D=" +
                                                std::to_string(dim));
  require(B.dim(0) == len && B.dim(1) == nst && C.shape() == B.shape(), Errc::dimension,
          "selective_scan: B/C must be [L,N]");
  require(D_skip.numel() == dim, Errc::dimension, "selective_scan: skip length != D");
  check_finite(u, "u");
  check_finite(delta, "delta");
  check_finite(A, "A");
  check_finite(B, "B");
  check_finite(C, "C");
  check_finite(D_skip, "D");

  const bool track = GradMode::enabled() &&
                     (u.requires_grad() || delta.requires_grad() || A.requires_grad() ||
                      B.requires_grad() || C.requires_grad() || D_skip.requires_grad());
  std::vector<T> y(len * dim);
  auto states = std::make_shared<std::vector<T>>(track ? len * dim * nst : 0);
  auto run = mode == ScanMode::parallel ? scan_parallel<T> : scan_sequential<T>;
  run(len, dim, nst, u.values().data(), delta.values().data(), A.values().data(),
      B.values().data(), C.values().data(), D_skip.values().data(), y.data(),
      track ? states->data() : nullptr);

  return make_result<T>(
      Shape{len, dim}, std::move(y), {u, delta, A, B, C, D_skip},
      [u, delta, A, B, C, D_skip, states, len, dim, nst](const detail::TensorImpl<T>& o) {
        const T* uv = u.values().data();
        const T* dv = delta.values().data();
        const T* av = A.values().data();
        const T* bv = B.values().data();
        const T* cv = C.values().data();
        const T* sv = D_skip.values().data();
        const T* gy = o.grad.data();
        const T* hs = states->data();
        const std::size_t width = dim * nst;
        std::vector<T> gu(len * dim, T(0)), gd(len * dim, T(0)), ga(width, T(0)),
            gb(len * nst, T(0)), gc(len * nst, T(0)), gs(dim, T(0));
        // gh carries dL/dh_t from step t+1.
        std::vector<T> gh(width, T(0));
        for (std::size_t t = len; t-- > 0;) {
          for (std::size_t d = 0; d < dim; ++d) {
            const T g_out = gy[t * dim + d];
            const T dt = dv[t * dim + d];
            const T ut = uv[t * dim + d];
            T g_delta = 0, g_u = 0;
            for (std::size_t n = 0; n < nst; ++n) {
              const std::size_t j = d * nst + n;
              const T h_t = hs[t * width + j];
              const T h_prev = t > 0 ? hs[(t - 1) * width + j] : T(0);
              gc[t * nst + n] += g_out * h_t;
              const T g = gh[j] + g_out * cv[t * nst + n];
              const T abar = std::exp(dt * av[j]);
              const T g_abar = g * h_prev * abar;
              g_delta += g_abar * av[j] + g * bv[t * nst + n] * ut;
              ga[j] += g_abar * dt;
              gb[t * nst + n] += g * dt * ut;
              g_u += g * dt * bv[t * nst + n];
              gh[j] = g * abar;
            }
            gd[t * dim + d] += g_delta;
            gu[t * dim + d] += g_u + g_out * sv[d];
            gs[d] += g_out * ut;
          }
        }
        accumulate(u, gu);
        accumulate(delta, gd);
        accumulate(A, ga);
        accumulate(B, gb);
        accumulate(C, gc);
        accumulate(D_skip, gs);
      });
}

template <typename T>
MambaMixer<T>::MambaMixer(ParamSet<T>& ps, const std::string& prefix, const MambaDims& dims,
                          Rng& rng)
    : dims_(dims) {
  const std::size_t d = dims.d_model, di = dims.d_inner(), n = dims.d_state, r = dims.rank();
  require(d >= 1 && n >= 1 && dims.d_conv >= 1 && dims.expand >= 1, Errc::config,
          "invalid Mamba dimensions");
  norm_g_ = ps.constant(prefix + ".norm.g", {d}, T(1));
  in_w_ = ps.uniform(prefix + ".in_proj.w", {d, 2 * di}, d, rng);
  conv_w_ = ps.uniform(prefix + ".conv.w", {dims.d_conv, di}, dims.d_conv, rng);
  conv_b_ = ps.constant(prefix + ".conv.b", {di}, T(0));
  x_w_ = ps.uniform(prefix + ".x_proj.w", {di, r + 2 * n}, di, rng);
  dt_w_ = ps.uniform(prefix + ".dt_proj.w", {r, di}, r, rng);
  // softplus(bias) = dt, dt log-uniform in [1e-3, 1e-1]
  std::uniform_real_distribution<double> dist(std::log(1e-3), std::log(1e-1));
  std::vector<T> bias(di);
  for (auto& b : bias) {
    const double dt = std::max(std::exp(dist(rng)), 1e-4);
    b = static_cast<T>(dt + std::log(-std::expm1(-dt)));
  }
  dt_b_ = ps.values(prefix + ".dt_proj.b", {di}, std::move(bias));
  std::vector<T> alog(di * n);
  for (std::size_t i = 0; i < di; ++i)
    for (std::size_t j = 0; j < n; ++j) alog[i * n + j] = static_cast<T>(std::log(double(j + 1)));
  a_log_ = ps.values(prefix + ".A_log", {di, n}, std::move(alog));
  d_skip_ = ps.constant(prefix + ".D", {di}, T(1));
  out_w_ = ps.uniform(prefix + ".out_proj.w", {di, d}, di, rng);
}

template <typename T>
Tensor<T> MambaMixer<T>::operator()(const Tensor<T>& x) const {
  const std::size_t di = dims_.d_inner(), n = dims_.d_state, r = dims_.rank();
  auto xz = linear(rms_norm(x, norm_g_), in_w_, Tensor<T>());
  auto xs = slice_last(xz, 0, di);
  auto z = slice_last(xz, di, 2 * di);
  xs = activation(depthwise_conv1d(xs, conv_w_, conv_b_, true), Act::silu);
  auto proj = linear(xs, x_w_, Tensor<T>());
  auto delta = activation(linear(slice_last(proj, 0, r), dt_w_, dt_b_), Act::softplus);
  auto b = slice_last(proj, r, r + n);
  auto c = slice_last(proj, r + n, r + 2 * n);
  auto a = scale(activation(a_log_, Act::exp), T(-1));
  auto y = selective_scan(xs, delta, a, b, c, d_skip_, dims_.scan);
  return linear(mul(y, activation(z, Act::silu)), out_w_, Tensor<T>());
}

template <typename T>
Tensor<T> MambaBlock<T>::forward(const Tensor<T>& x) const {
  return add(x, mixer_(x));
}

template <typename T>
Tensor<T> BiMambaBlock<T>::forward(const Tensor<T>& x) const {
  return add(add(x, fwd_(x)), reverse_time(bwd_(reverse_time(x))));
}

template Tensor<float> selective_scan(const Tensor<float>&, const Tensor<float>&,
                                      const Tensor<float>&, const Tensor<float>&,
                                      const Tensor<float>&, const Tensor<float>&, ScanMode);
template Tensor<double> selective_scan(const Tensor<double>&, const Tensor<double>&,
                                       const Tensor<double>&, const Tensor<double>&,
                                       const Tensor<double>&, const Tensor<double>&, ScanMode);
template class MambaMixer<float>;
template class MambaMixer<double>;
template class MambaBlock<float>;
template class MambaBlock<double>;
template class BiMambaBlock<float>;
template class BiMambaBlock<double>;

}  // namespace tfse
