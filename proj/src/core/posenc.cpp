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

#include "tfse/posenc.hpp"

#include <cmath>
#include <vector>

namespace tfse {

PEKind parse_pe(const std::string& s) {
  if (s == "none") return PEKind::none;
  if (s == "sin" || s == "sinusoidal") return PEKind::sinusoidal;
  if (s == "rope" || s == "rotary") return PEKind::rotary;
  fail(Errc::config, "unknown positional encoding '" + s + "' (expected none|sin|rope)");
}

const char* pe_name(PEKind pe) {
  switch (pe) {
    case PEKind::none: return "none";
    case PEKind::sinusoidal: return "sin";
    case PEKind::rotary: return "rope";
  }
  return "none";
}

template <typename T>
Tensor<T> sinpe(std::size_t length, std::size_t d_model) {
  std::vector<T> v(length * d_model);
  for (std::size_t p = 0; p < length; ++p) {
    for (std::size_t j = 0; j < d_model; ++j) {
      const std::size_t i = j / 2;
      const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / d_model);
      const double a = static_cast<double>(p) * freq;
      v[p * d_model + j] = static_cast<T>(j % 2 == 0 ? std::sin(a) : std::cos(a));
    }
  }
  return Tensor<T>(Shape{length, d_model}, std::move(v));
}

namespace {

template <typename T>
void rotate(const T* in, T* out, std::size_t rows, std::size_t len, std::size_t d, double base,
            double sign) {
  std::vector<double> freq(d / 2);
  for (std::size_t i = 0; i < d / 2; ++i) freq[i] = std::pow(base, -2.0 * static_cast<double>(i) / d);
  for (std::size_t r = 0; r < rows; ++r) {
    const double pos = static_cast<double>(r % len);
    for (std::size_t i = 0; i < d / 2; ++i) {
      const double a = sign * pos * freq[i];
      const T c = static_cast<T>(std::cos(a)), s = static_cast<T>(std::sin(a));
      const T x0 = in[r * d + 2 * i], x1 = in[r * d + 2 * i + 1];
      out[r * d + 2 * i] += x0 * c - x1 * s;
      out[r * d + 2 * i + 1] += x0 * s + x1 * c;
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> rope(const Tensor<T>& x, double base) {
  require(x.rank() >= 2, Errc::dimension, "rope expects [.., L, d]");
  const std::size_t d = x.dim(-1), len = x.dim(-2), rows = x.numel() / d;
  require(d % 2 == 0, Errc::config, "rope needs an even head width, got " + std::to_string(d));
  std::vector<T> out(x.numel(), T(0));
  rotate(x.values().data(), out.data(), rows, len, d, base, 1.0);
  return make_result<T>(x.shape(), std::move(out), {x},
                        [x, rows, len, d, base](const detail::TensorImpl<T>& o) {
                          rotate(o.grad.data(), x.grad().data(), rows, len, d, base, -1.0);
                        });
}

template Tensor<float> sinpe(std::size_t, std::size_t);
template Tensor<double> sinpe(std::size_t, std::size_t);
template Tensor<float> rope(const Tensor<float>&, double);
template Tensor<double> rope(const Tensor<double>&, double);

}  // namespace tfse
