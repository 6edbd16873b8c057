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

// Selective state-space scan (sequential and associative-parallel forms),
// the Mamba block and the external bidirectional BiMamba block.

#ifndef TFSE_SSM_HPP_
#define TFSE_SSM_HPP_

#include <memory>
#include <string>

#include "tfse/module.hpp"

namespace tfse {

enum class ScanMode { sequential, parallel };

ScanMode parse_scan_mode(const std::string& s);
const char* scan_mode_name(ScanMode m);

// u, delta [L, D]; A [D, N]; B, C [L, N]; D_skip [D].
//   h_t = exp(delta_t * A) * h_{t-1} + delta_t * B_t * u_t
//   y_t = C_t . h_t + D_skip * u_t
// with h_{-1} = 0. Differentiable in every argument.
template <typename T>
Tensor<T> selective_scan(const Tensor<T>& u, const Tensor<T>& delta, const Tensor<T>& A,
                         const Tensor<T>& B, const Tensor<T>& C, const Tensor<T>& D_skip,
                         ScanMode mode);

template <typename T>
Tensor<T> selective_scan_seq(const Tensor<T>& u, const Tensor<T>& delta, const Tensor<T>& A,
                             const Tensor<T>& B, const Tensor<T>& C, const Tensor<T>& D_skip) {
  return selective_scan(u, delta, A, B, C, D_skip, ScanMode::sequential);
}

// Blelloch up-sweep/down-sweep over the affine pairs (a_t, b_t) with
// (a1, b1) then (a2, b2) composing to (a2 a1, a2 b1 + b2).
template <typename T>
Tensor<T> selective_scan_par(const Tensor<T>& u, const Tensor<T>& delta, const Tensor<T>& A,
                             const Tensor<T>& B, const Tensor<T>& C, const Tensor<T>& D_skip) {
  return selective_scan(u, delta, A, B, C, D_skip, ScanMode::parallel);
}

struct MambaDims {
  std::size_t d_model = 256;
  std::size_t d_state = 16;
  std::size_t expand = 2;
  std::size_t d_conv = 4;
  std::size_t dt_rank = 0;  // 0 => ceil(d_model / 16)
  ScanMode scan = ScanMode::sequential;

  std::size_t d_inner() const { return expand * d_model; }
  std::size_t rank() const { return dt_rank ? dt_rank : (d_model + 15) / 16; }
};

// Residual-free Mamba mixer with its RMS pre-norm: mix(x) = Mamba(norm(x)).
template <typename T>
class MambaMixer {
 public:
  MambaMixer(ParamSet<T>& ps, const std::string& prefix, const MambaDims& dims, Rng& rng);
  Tensor<T> operator()(const Tensor<T>& x) const;

 private:
  MambaDims dims_;
  Tensor<T> norm_g_, in_w_, conv_w_, conv_b_, x_w_, dt_w_, dt_b_, a_log_, d_skip_, out_w_;
};

// x + mix(x)
template <typename T>
class MambaBlock final : public Block<T> {
 public:
  MambaBlock(ParamSet<T>& ps, const std::string& prefix, const MambaDims& dims, Rng& rng)
      : mixer_(ps, prefix, dims, rng) {}
  Tensor<T> forward(const Tensor<T>& x) const override;
  const MambaMixer<T>& mixer() const { return mixer_; }

 private:
  MambaMixer<T> mixer_;
};

// x + fwd(x) + reverse(bwd(reverse(x))) with independent branch parameters.
template <typename T>
class BiMambaBlock final : public Block<T> {
 public:
  BiMambaBlock(ParamSet<T>& ps, const std::string& prefix, const MambaDims& dims, Rng& rng)
      : fwd_(ps, prefix + ".fwd", dims, rng), bwd_(ps, prefix + ".bwd", dims, rng) {}
  Tensor<T> forward(const Tensor<T>& x) const override;
  const MambaMixer<T>& forward_branch() const { return fwd_; }
  const MambaMixer<T>& backward_branch() const { return bwd_; }

 private:
  MambaMixer<T> fwd_, bwd_;
};

}  // namespace tfse

#endif  // TFSE_SSM_HPP_
