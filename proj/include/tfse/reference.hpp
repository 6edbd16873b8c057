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

// Slow, independent reference implementations used as oracles by the
// verification suite and the tests.

#ifndef TFSE_REFERENCE_HPP_
#define TFSE_REFERENCE_HPP_

#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "tfse/module.hpp"

namespace tfse {

// Step-by-step selective scan in long double. Layouts as selective_scan:
// u, delta [L*D]; A [D*N]; B, C [L*N]; skip [D].
std::vector<double> reference_selective_scan(std::span<const double> u, std::span<const double> delta,
                                             std::span<const double> A, std::span<const double> B,
                                             std::span<const double> C, std::span<const double> skip,
                                             std::size_t L, std::size_t D, std::size_t N);

// Unstabilized single-head mLSTM: i' = exp(i~), f' = exp(f~),
// h = C q / max(|n^T q|, 1). q, k, v [L*dh]; i_pre, f_log [L].
std::vector<double> reference_mlstm(std::span<const double> q, std::span<const double> k,
                                    std::span<const double> v, std::span<const double> i_pre,
                                    std::span<const double> f_log, std::size_t L, std::size_t dh);

// Direct O(n^2) DFT of x zero-padded to nfft; bins 0..nfft/2.
std::vector<std::complex<double>> reference_dft(std::span<const double> x, std::size_t nfft);

// Perturbs row t of x [L, C] with fresh random values and returns, per
// output row, the largest absolute change of f's output.
template <typename T>
std::vector<double> perturbation_response(const std::function<Tensor<T>(const Tensor<T>&)>& f,
                                          const Tensor<T>& x, std::size_t t, Rng& rng);

template <typename T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0);

}  // namespace tfse

#endif  // TFSE_REFERENCE_HPP_
