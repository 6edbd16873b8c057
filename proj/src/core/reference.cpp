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

#include "tfse/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tfse {

std::vector<double> reference_selective_scan(std::span<const double> u, std::span<const double> delta,
                                             std::span<const double> A, std::span<const double> B,
                                             std::span<const double> C, std::span<const double> skip,
                                             std::size_t L, std::size_t D, std::size_t N) {
  require(u.size() == L * D && delta.size() == L * D && A.size() == D * N && B.size() == L * N &&
              C.size() == L * N && skip.size() == D,
          Errc::dimension, "reference_selective_scan: inconsistent sizes");
  std::vector<long double> h(D * N, 0.0L);
  std::vector<double> y(L * D);
  for (std::size_t t = 0; t < L; ++t)
    for (std::size_t d = 0; d < D; ++d) {
      long double acc = 0;
      for (std::size_t n = 0; n < N; ++n) {
        const long double dt = delta[t * D + d];
        long double& hv = h[d * N + n];
        hv = std::exp(dt * static_cast<long double>(A[d * N + n])) * hv +
             dt * static_cast<long double>(B[t * N + n]) * static_cast<long double>(u[t * D + d]);
        acc += static_cast<long double>(C[t * N + n]) * hv;
      }
      y[t * D + d] = static_cast<double>(acc + static_cast<long double>(skip[d]) * u[t * D + d]);
    }
  return y;
}

std::vector<double> reference_mlstm(std::span<const double> q, std::span<const double> k,
                                    std::span<const double> v, std::span<const double> i_pre,
                                    std::span<const double> f_log, std::size_t L, std::size_t dh) {
  require(q.size() == L * dh && k.size() == L * dh && v.size() == L * dh && i_pre.size() == L &&
              f_log.size() == L,
          Errc::dimension, "reference_mlstm: inconsistent sizes");
  std::vector<long double> C(dh * dh, 0.0L), n(dh, 0.0L);
  std::vector<double> h(L * dh);
  for (std::size_t t = 0; t < L; ++t) {
    const long double ig = std::exp(static_cast<long double>(i_pre[t]));
    const long double fg = std::exp(static_cast<long double>(f_log[t]));
    long double s = 0;
    for (std::size_t a = 0; a < dh; ++a) {
      for (std::size_t b = 0; b < dh; ++b)
        C[a * dh + b] = fg * C[a * dh + b] + ig * v[t * dh + a] * k[t * dh + b];
      n[a] = fg * n[a] + ig * k[t * dh + a];
    }
    for (std::size_t a = 0; a < dh; ++a) s += n[a] * q[t * dh + a];
    const long double den = std::max(std::abs(s), 1.0L);
    for (std::size_t a = 0; a < dh; ++a) {
      long double num = 0;
      for (std::size_t b = 0; b < dh; ++b) num += C[a * dh + b] * q[t * dh + b];
      h[t * dh + a] = static_cast<double>(num / den);
    }
  }
  return h;
}

std::vector<std::complex<double>> reference_dft(std::span<const double> x, std::size_t nfft) {
  require(x.size() <= nfft, Errc::dimension, "reference_dft: frame longer than nfft");
  std::vector<std::complex<double>> out(nfft / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    long double re = 0, im = 0;
    for (std::size_t n = 0; n < x.size(); ++n) {
      const long double ang = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>((k * n) % nfft) /
                              static_cast<long double>(nfft);
      re += x[n] * std::cos(ang);
      im += x[n] * std::sin(ang);
    }
    out[k] = {static_cast<double>(re), static_cast<double>(im)};
  }
  return out;
}

template <typename T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<T> v(numel(shape));
  for (auto& x : v) x = static_cast<T>(dist(rng));
  return Tensor<T>(std::move(shape), std::move(v));
}

template <typename T>
std::vector<double> perturbation_response(const std::function<Tensor<T>(const Tensor<T>&)>& f,
                                          const Tensor<T>& x, std::size_t t, Rng& rng) {
  require(x.rank() == 2 && t < x.dim(0), Errc::contract, "perturbation_response: bad frame index");
  NoGradGuard guard;
  const Tensor<T> base = f(x);
  Tensor<T> xp = x.detach();
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  auto d = xp.data();
  const std::size_t c = x.dim(1);
  for (std::size_t j = 0; j < c; ++j) d[t * c + j] += static_cast<T>(dist(rng));
  const Tensor<T> pert = f(xp);
  require(pert.shape() == base.shape() && base.rank() == 2, Errc::dimension,
          "perturbation_response: f must map [L, C] to [L, C']");
  const std::size_t rows = base.dim(0), cols = base.dim(1);
  std::vector<double> diff(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j)
      diff[r] = std::max(diff[r], std::abs(static_cast<double>(pert.values()[r * cols + j]) -
                                           static_cast<double>(base.values()[r * cols + j])));
  return diff;
}

template Tensor<float> random_tensor(Shape, Rng&, double, double);
template Tensor<double> random_tensor(Shape, Rng&, double, double);
template std::vector<double> perturbation_response(
    const std::function<Tensor<float>(const Tensor<float>&)>&, const Tensor<float>&, std::size_t, Rng&);
template std::vector<double> perturbation_response(
    const std::function<Tensor<double>(const Tensor<double>&)>&, const Tensor<double>&, std::size_t,
    Rng&);

}  // namespace tfse
