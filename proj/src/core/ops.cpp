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

#include "tfse/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace tfse {

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatR<T>>;

template <typename T>
void accumulate(const Tensor<T>& dst, const std::vector<T>& g) {
  if (!dst.requires_grad()) return;
  auto gd = dst.grad();
  for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += g[i];
}

template <typename T>
bool wants(const Tensor<T>& t) {
  return t.defined() && t.requires_grad();
}

void check_same(const Shape& a, const Shape& b, const char* op) {
  require(a == b, Errc::dimension,
          std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

template <typename T>
T sigmoid_of(T v) {
  if (v >= 0) return T(1) / (T(1) + std::exp(-v));
  const T e = std::exp(v);
  return e / (T(1) + e);
}

template <typename T>
T softplus_of(T v) {
  // log(1 + e^v) without overflow
  return v > T(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() >= 2 && b.rank() >= 2, Errc::dimension, "matmul needs rank >= 2");
  const std::size_t m = a.dim(-2), k = a.dim(-1), kb = b.dim(-2), n = b.dim(-1);
  require(k == kb, Errc::dimension,
          "matmul inner extents differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t batch = a.numel() / (m * k);
  const bool shared = b.rank() == 2;
  if (!shared) {
    require(b.numel() / (k * n) == batch && b.rank() == a.rank(), Errc::dimension,
            "matmul batch extents differ: " + shape_str(a.shape()) + " x " +
                shape_str(b.shape()));
  }
  Shape out_shape = a.shape();
  out_shape.back() = n;
  std::vector<T> out(batch * m * n);
  const T* ad = a.values().data();
  const T* bd = b.values().data();
  if (shared && batch > 1) {
    MapR<T>(out.data(), batch * m, n).noalias() =
        CMapR<T>(ad, batch * m, k) * CMapR<T>(bd, k, n);
  } else {
    for (std::size_t i = 0; i < batch; ++i) {
      MapR<T>(out.data() + i * m * n, m, n).noalias() =
          CMapR<T>(ad + i * m * k, m, k) * CMapR<T>(bd + (shared ? 0 : i * k * n), k, n);
    }
  }
  return make_result<T>(std::move(out_shape), std::move(out), {a, b},
                        [a, b, m, k, n, batch, shared](const detail::TensorImpl<T>& o) {
                          const T* g = o.grad.data();
                          const T* ad = a.values().data();
                          const T* bd = b.values().data();
                          if (wants(a)) {
                            T* ga = a.grad().data();
                            if (shared) {
                              MapR<T>(ga, batch * m, k).noalias() +=
                                  CMapR<T>(g, batch * m, n) * CMapR<T>(bd, k, n).transpose();
                            } else {
                              for (std::size_t i = 0; i < batch; ++i)
                                MapR<T>(ga + i * m * k, m, k).noalias() +=
                                    CMapR<T>(g + i * m * n, m, n) *
                                    CMapR<T>(bd + i * k * n, k, n).transpose();
                            }
                          }
                          if (wants(b)) {
                            T* gb = b.grad().data();
                            if (shared) {
                              MapR<T>(gb, k, n).noalias() +=
                                  CMapR<T>(ad, batch * m, k).transpose() *
                                  CMapR<T>(g, batch * m, n);
                            } else {
                              for (std::size_t i = 0; i < batch; ++i)
                                MapR<T>(gb + i * k * n, k, n).noalias() +=
                                    CMapR<T>(ad + i * m * k, m, k).transpose() *
                                    CMapR<T>(g + i * m * n, m, n);
                            }
                          }
                        });
}

template <typename T>
Tensor<T> transpose_last2(const Tensor<T>& x) {
  require(x.rank() >= 2, Errc::dimension, "transpose needs rank >= 2");
  const std::size_t m = x.dim(-2), n = x.dim(-1), batch = x.numel() / (m * n);
  Shape s = x.shape();
  std::swap(s[s.size() - 1], s[s.size() - 2]);
  std::vector<T> out(x.numel());
  const T* xd = x.values().data();
  for (std::size_t b = 0; b < batch; ++b)
    MapR<T>(out.data() + b * m * n, n, m) = CMapR<T>(xd + b * m * n, m, n).transpose();
  return make_result<T>(std::move(s), std::move(out), {x},
                        [x, m, n, batch](const detail::TensorImpl<T>& o) {
                          T* gx = x.grad().data();
                          for (std::size_t b = 0; b < batch; ++b)
                            MapR<T>(gx + b * m * n, m, n) +=
                                CMapR<T>(o.grad.data() + b * m * n, n, m).transpose();
                        });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require(w.rank() == 2 && x.dim(-1) == w.dim(0), Errc::dimension,
          "linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
  const std::size_t in = w.dim(0), out_dim = w.dim(1), rows = x.numel() / in;
  if (b.defined())
    require(b.numel() == out_dim, Errc::dimension, "linear: bias length mismatch");
  Shape s = x.shape();
  s.back() = out_dim;
  std::vector<T> out(rows * out_dim);
  MapR<T> y(out.data(), rows, out_dim);
  y.noalias() = CMapR<T>(x.values().data(), rows, in) * CMapR<T>(w.values().data(), in, out_dim);
  if (b.defined())
    y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b.values().data(),
                                                                       out_dim);
  return make_result<T>(
      std::move(s), std::move(out), {x, w, b},
      [x, w, b, rows, in, out_dim](const detail::TensorImpl<T>& o) {
        CMapR<T> g(o.grad.data(), rows, out_dim);
        if (wants(x))
          MapR<T>(x.grad().data(), rows, in).noalias() +=
              g * CMapR<T>(w.values().data(), in, out_dim).transpose();
        if (wants(w))
          MapR<T>(w.grad().data(), in, out_dim).noalias() +=
              CMapR<T>(x.values().data(), rows, in).transpose() * g;
        if (wants(b))
          Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(b.grad().data(), out_dim) +=
              g.colwise().sum();
      });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same(a.shape(), b.shape(), "add");
  std::vector<T> out(a.numel());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, [a, b](const detail::TensorImpl<T>& o) {
    accumulate(a, o.grad);
    accumulate(b, o.grad);
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same(a.shape(), b.shape(), "sub");
  std::vector<T> out(a.numel());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, [a, b](const detail::TensorImpl<T>& o) {
    accumulate(a, o.grad);
    if (wants(b)) {
      auto gb = b.grad();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same(a.shape(), b.shape(), "mul");
  std::vector<T> out(a.numel());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, [a, b](const detail::TensorImpl<T>& o) {
    const auto& av = a.values();
    const auto& bv = b.values();
    if (wants(a)) {
      auto ga = a.grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i] * bv[i];
    }
    if (wants(b)) {
      auto gb = b.grad();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += o.grad[i] * av[i];
    }
  });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  const std::size_t d = x.dim(-1);
  require(bias.numel() == d, Errc::dimension, "add_bias: bias length mismatch");
  std::vector<T> out(x.values());
  const auto& bv = bias.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % d];
  return make_result<T>(x.shape(), std::move(out), {x, bias},
                        [x, bias, d](const detail::TensorImpl<T>& o) {
                          accumulate(x, o.grad);
                          if (wants(bias)) {
                            auto gb = bias.grad();
                            for (std::size_t i = 0; i < o.grad.size(); ++i) gb[i % d] += o.grad[i];
                          }
                        });
}

template <typename T>
Tensor<T> mul_channel(const Tensor<T>& x, const Tensor<T>& gain) {
  const std::size_t d = x.dim(-1);
  require(gain.numel() == d, Errc::dimension, "mul_channel: gain length mismatch");
  std::vector<T> out(x.values());
  const auto& gv = gain.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= gv[i % d];
  return make_result<T>(x.shape(), std::move(out), {x, gain},
                        [x, gain, d](const detail::TensorImpl<T>& o) {
                          const auto& xv = x.values();
                          const auto& gv = gain.values();
                          if (wants(x)) {
                            auto gx = x.grad();
                            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i] * gv[i % d];
                          }
                          if (wants(gain)) {
                            auto gg = gain.grad();
                            for (std::size_t i = 0; i < o.grad.size(); ++i)
                              gg[i % d] += o.grad[i] * xv[i];
                          }
                        });
}

template <typename T>
Tensor<T> add_broadcast(const Tensor<T>& x, const Tensor<T>& y) {
  require(y.rank() == 2 && x.rank() >= 2 && x.dim(-2) == y.dim(0) && x.dim(-1) == y.dim(1),
          Errc::dimension,
          "add_broadcast: " + shape_str(x.shape()) + " + " + shape_str(y.shape()));
  const std::size_t block = y.numel();
  std::vector<T> out(x.values());
  const auto& yv = y.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += yv[i % block];
  return make_result<T>(x.shape(), std::move(out), {x, y},
                        [x, y, block](const detail::TensorImpl<T>& o) {
                          accumulate(x, o.grad);
                          if (wants(y)) {
                            auto gy = y.grad();
                            for (std::size_t i = 0; i < o.grad.size(); ++i) gy[i % block] += o.grad[i];
                          }
                        });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> out(x.values());
  for (auto& v : out) v *= factor;
  return make_result<T>(x.shape(), std::move(out), {x},
                        [x, factor](const detail::TensorImpl<T>& o) {
                          auto gx = x.grad();
                          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i] * factor;
                        });
}

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Act kind) {
  const auto& xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const T v = xv[i];
    switch (kind) {
      case Act::relu: out[i] = v > T(0) ? v : T(0); break;
      case Act::sigmoid: out[i] = sigmoid_of(v); break;
      case Act::silu: out[i] = v * sigmoid_of(v); break;
      case Act::tanh: out[i] = std::tanh(v); break;
      case Act::exp: out[i] = std::exp(v); break;
      case Act::softplus: out[i] = softplus_of(v); break;
      case Act::logsigmoid: out[i] = -softplus_of(-v); break;
    }
  }
  return make_result<T>(x.shape(), std::move(out), {x}, [x, kind](const detail::TensorImpl<T>& o) {
    const auto& xv = x.values();
    auto gx = x.grad();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const T v = xv[i], y = o.data[i], g = o.grad[i];
      T d = 0;
      switch (kind) {
        case Act::relu: d = v > T(0) ? T(1) : T(0); break;
        case Act::sigmoid: d = y * (T(1) - y); break;
        case Act::silu: {
          const T s = sigmoid_of(v);
          d = s * (T(1) + v * (T(1) - s));
          break;
        }
        case Act::tanh: d = T(1) - y * y; break;
        case Act::exp: d = y; break;
        case Act::softplus: d = sigmoid_of(v); break;
        case Act::logsigmoid: d = sigmoid_of(-v); break;
      }
      gx[i] += g * d;
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  const std::size_t d = x.dim(-1), rows = x.numel() / d;
  require(d >= 1, Errc::dimension, "layer_norm over an empty axis");
  if (gain.defined()) require(gain.numel() == d, Errc::dimension, "layer_norm: gain length");
  if (bias.defined()) require(bias.numel() == d, Errc::dimension, "layer_norm: bias length");
  const auto& xv = x.values();
  std::vector<T> xhat(xv.size()), inv(rows), out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * d;
    T mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= T(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= T(d);
    inv[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (row[j] - mu) * inv[r];
      xhat[r * d + j] = h;
      T y = h;
      if (gain.defined()) y *= gain.values()[j];
      if (bias.defined()) y += bias.values()[j];
      out[r * d + j] = y;
    }
  }
  return make_result<T>(
      x.shape(), std::move(out), {x, gain, bias},
      [x, gain, bias, d, rows, xhat = std::move(xhat), inv = std::move(inv)](
          const detail::TensorImpl<T>& o) {
        const auto& g = o.grad;
        if (wants(gain)) {
          auto gg = gain.grad();
          for (std::size_t i = 0; i < g.size(); ++i) gg[i % d] += g[i] * xhat[i];
        }
        if (wants(bias)) {
          auto gb = bias.grad();
          for (std::size_t i = 0; i < g.size(); ++i) gb[i % d] += g[i];
        }
        if (!wants(x)) return;
        auto gx = x.grad();
        std::vector<T> gh(d);
        for (std::size_t r = 0; r < rows; ++r) {
          T m1 = 0, m2 = 0;
          for (std::size_t j = 0; j < d; ++j) {
            gh[j] = g[r * d + j] * (gain.defined() ? gain.values()[j] : T(1));
            m1 += gh[j];
            m2 += gh[j] * xhat[r * d + j];
          }
          m1 /= T(d);
          m2 /= T(d);
          for (std::size_t j = 0; j < d; ++j)
            gx[r * d + j] += inv[r] * (gh[j] - m1 - xhat[r * d + j] * m2);
        }
      });
}

template <typename T>
Tensor<T> rms_norm(const Tensor<T>& x, const Tensor<T>& gain, T eps) {
  const std::size_t d = x.dim(-1), rows = x.numel() / d;
  if (gain.defined()) require(gain.numel() == d, Errc::dimension, "rms_norm: gain length");
  const auto& xv = x.values();
  std::vector<T> inv(rows), out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    T ss = 0;
    for (std::size_t j = 0; j < d; ++j) ss += xv[r * d + j] * xv[r * d + j];
    inv[r] = T(1) / std::sqrt(ss / T(d) + eps);
    for (std::size_t j = 0; j < d; ++j)
      out[r * d + j] = xv[r * d + j] * inv[r] * (gain.defined() ? gain.values()[j] : T(1));
  }
  return make_result<T>(x.shape(), std::move(out), {x, gain},
                        [x, gain, d, rows, inv = std::move(inv)](const detail::TensorImpl<T>& o) {
                          const auto& xv = x.values();
                          const auto& g = o.grad;
                          if (wants(gain)) {
                            auto gg = gain.grad();
                            for (std::size_t i = 0; i < g.size(); ++i)
                              gg[i % d] += g[i] * xv[i] * inv[i / d];
                          }
                          if (!wants(x)) return;
                          auto gx = x.grad();
                          for (std::size_t r = 0; r < rows; ++r) {
                            T dot = 0;
                            for (std::size_t j = 0; j < d; ++j)
                              dot += g[r * d + j] * (gain.defined() ? gain.values()[j] : T(1)) *
                                     xv[r * d + j];
                            const T c = inv[r] * inv[r] * inv[r] * dot / T(d);
                            for (std::size_t j = 0; j < d; ++j)
                              gx[r * d + j] +=
                                  g[r * d + j] * (gain.defined() ? gain.values()[j] : T(1)) * inv[r] -
                                  xv[r * d + j] * c;
                          }
                        });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  const std::size_t n = x.dim(-1), rows = x.numel() / n;
  const auto& xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * n;
    T* y = out.data() + r * n;
    const T mx = *std::max_element(row, row + n);
    if (mx == -std::numeric_limits<T>::infinity()) {
      std::fill(y, y + n, T(0));
      continue;
    }
    T s = 0;
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = std::exp(row[j] - mx);
      s += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) y[j] /= s;
  }
  return make_result<T>(x.shape(), std::move(out), {x}, [x, n, rows](const detail::TensorImpl<T>& o) {
    auto gx = x.grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* y = o.data.data() + r * n;
      const T* g = o.grad.data() + r * n;
      T dot = 0;
      for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += y[j] * (g[j] - dot);
    }
  });
}

namespace {

struct Span1 {
  std::size_t dst0, src0, count;
};

// Rows t of the output that read input row t + tap - pad_left.
Span1 tap_span(std::size_t len, std::size_t tap, std::size_t pad_left) {
  const long lo = std::max<long>(0, static_cast<long>(pad_left) - static_cast<long>(tap));
  const long hi = std::min<long>(static_cast<long>(len),
                                 static_cast<long>(len + pad_left) - static_cast<long>(tap));
  if (hi <= lo) return {0, 0, 0};
  return {static_cast<std::size_t>(lo),
          static_cast<std::size_t>(lo + static_cast<long>(tap) - static_cast<long>(pad_left)),
          static_cast<std::size_t>(hi - lo)};
}

}  // namespace

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias, bool causal) {
  require(x.rank() == 2 && kernel.rank() == 3, Errc::dimension, "conv1d expects x [L,C] and kernel [k,Cin,Cout]");
  const std::size_t len = x.dim(0), cin = x.dim(1), taps = kernel.dim(0), cout = kernel.dim(2);
  require(taps >= 1, Errc::dimension, "conv1d kernel size must be >= 1");
  require(kernel.dim(1) == cin, Errc::dimension,
          "conv1d channel mismatch: input has " + std::to_string(cin) + ", kernel expects " +
              std::to_string(kernel.dim(1)));
  if (bias.defined()) require(bias.numel() == cout, Errc::dimension, "conv1d bias length");
  const std::size_t pad_left = causal ? taps - 1 : (taps - 1) / 2;
  std::vector<T> out(len * cout, T(0));
  MapR<T> y(out.data(), len, cout);
  CMapR<T> xm(x.values().data(), len, cin);
  for (std::size_t j = 0; j < taps; ++j) {
    const Span1 s = tap_span(len, j, pad_left);
    if (!s.count) continue;
    y.middleRows(s.dst0, s.count).noalias() +=
        xm.middleRows(s.src0, s.count) * CMapR<T>(kernel.values().data() + j * cin * cout, cin, cout);
  }
  if (bias.defined())
    y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.values().data(), cout);
  return make_result<T>(
      Shape{len, cout}, std::move(out), {x, kernel, bias},
      [x, kernel, bias, len, cin, cout, taps, pad_left](const detail::TensorImpl<T>& o) {
        CMapR<T> g(o.grad.data(), len, cout);
        CMapR<T> xm(x.values().data(), len, cin);
        for (std::size_t j = 0; j < taps; ++j) {
          const Span1 s = tap_span(len, j, pad_left);
          if (!s.count) continue;
          if (wants(x))
            MapR<T>(x.grad().data(), len, cin).middleRows(s.src0, s.count).noalias() +=
                g.middleRows(s.dst0, s.count) *
                CMapR<T>(kernel.values().data() + j * cin * cout, cin, cout).transpose();
          if (wants(kernel))
            MapR<T>(kernel.grad().data() + j * cin * cout, cin, cout).noalias() +=
                xm.middleRows(s.src0, s.count).transpose() * g.middleRows(s.dst0, s.count);
        }
        if (wants(bias))
          Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.grad().data(), cout) +=
              g.colwise().sum();
      });
}

template <typename T>
Tensor<T> depthwise_conv1d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                           bool causal) {
  require(x.rank() == 2 && kernel.rank() == 2, Errc::dimension,
          "depthwise_conv1d expects x [L,C] and kernel [k,C]");
  const std::size_t len = x.dim(0), ch = x.dim(1), taps = kernel.dim(0);
  require(taps >= 1, Errc::dimension, "depthwise kernel size must be >= 1");
  require(kernel.dim(1) == ch, Errc::dimension, "depthwise_conv1d channel mismatch");
  if (bias.defined()) require(bias.numel() == ch, Errc::dimension, "depthwise bias length");
  const std::size_t pad_left = causal ? taps - 1 : (taps - 1) / 2;
  const auto& xv = x.values();
  const auto& kv = kernel.values();
  std::vector<T> out(len * ch, T(0));
  if (bias.defined())
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t c = 0; c < ch; ++c) out[t * ch + c] = bias.values()[c];
  for (std::size_t j = 0; j < taps; ++j) {
    const Span1 s = tap_span(len, j, pad_left);
    for (std::size_t i = 0; i < s.count; ++i) {
      T* yr = out.data() + (s.dst0 + i) * ch;
      const T* xr = xv.data() + (s.src0 + i) * ch;
      const T* kr = kv.data() + j * ch;
      for (std::size_t c = 0; c < ch; ++c) yr[c] += xr[c] * kr[c];
    }
  }
  return make_result<T>(
      Shape{len, ch}, std::move(out), {x, kernel, bias},
      [x, kernel, bias, len, ch, taps, pad_left](const detail::TensorImpl<T>& o) {
        const auto& xv = x.values();
        const auto& kv = kernel.values();
        const bool gx_on = wants(x), gk_on = wants(kernel);
        T* gx = gx_on ? x.grad().data() : nullptr;
        T* gk = gk_on ? kernel.grad().data() : nullptr;
        for (std::size_t j = 0; j < taps; ++j) {
          const Span1 s = tap_span(len, j, pad_left);
          for (std::size_t i = 0; i < s.count; ++i) {
            const T* gr = o.grad.data() + (s.dst0 + i) * ch;
            const std::size_t src = (s.src0 + i) * ch;
            for (std::size_t c = 0; c < ch; ++c) {
              if (gx_on) gx[src + c] += gr[c] * kv[j * ch + c];
              if (gk_on) gk[j * ch + c] += gr[c] * xv[src + c];
            }
          }
        }
        if (wants(bias)) {
          auto gb = bias.grad();
          for (std::size_t i = 0; i < o.grad.size(); ++i) gb[i % ch] += o.grad[i];
        }
      });
}

template <typename T>
Tensor<T> split_heads(const Tensor<T>& x, std::size_t heads) {
  require(x.rank() == 2, Errc::dimension, "split_heads expects [L, d]");
  const std::size_t len = x.dim(0), d = x.dim(1);
  require(heads >= 1 && d % heads == 0, Errc::config,
          "feature width " + std::to_string(d) + " not divisible by " + std::to_string(heads) +
              " heads");
  const std::size_t dh = d / heads;
  const auto& xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t t = 0; t < len; ++t)
      std::copy_n(xv.data() + t * d + h * dh, dh, out.data() + (h * len + t) * dh);
  return make_result<T>(Shape{heads, len, dh}, std::move(out), {x},
                        [x, heads, len, dh, d](const detail::TensorImpl<T>& o) {
                          auto gx = x.grad();
                          for (std::size_t h = 0; h < heads; ++h)
                            for (std::size_t t = 0; t < len; ++t)
                              for (std::size_t e = 0; e < dh; ++e)
                                gx[t * d + h * dh + e] += o.grad[(h * len + t) * dh + e];
                        });
}

template <typename T>
Tensor<T> merge_heads(const Tensor<T>& x) {
  require(x.rank() == 3, Errc::dimension, "merge_heads expects [H, L, dh]");
  const std::size_t heads = x.dim(0), len = x.dim(1), dh = x.dim(2), d = heads * dh;
  const auto& xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t t = 0; t < len; ++t)
      std::copy_n(xv.data() + (h * len + t) * dh, dh, out.data() + t * d + h * dh);
  return make_result<T>(Shape{len, d}, std::move(out), {x},
                        [x, heads, len, dh, d](const detail::TensorImpl<T>& o) {
                          auto gx = x.grad();
                          for (std::size_t h = 0; h < heads; ++h)
                            for (std::size_t t = 0; t < len; ++t)
                              for (std::size_t e = 0; e < dh; ++e)
                                gx[(h * len + t) * dh + e] += o.grad[t * d + h * dh + e];
                        });
}

template <typename T>
Tensor<T> slice_last(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  const std::size_t d = x.dim(-1), rows = x.numel() / d;
  require(begin < end && end <= d, Errc::dimension, "slice_last: bad range");
  const std::size_t w = end - begin;
  Shape s = x.shape();
  s.back() = w;
  const auto& xv = x.values();
  std::vector<T> out(rows * w);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(xv.data() + r * d + begin, w, out.data() + r * w);
  return make_result<T>(std::move(s), std::move(out), {x},
                        [x, d, rows, begin, w](const detail::TensorImpl<T>& o) {
                          auto gx = x.grad();
                          for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t j = 0; j < w; ++j) gx[r * d + begin + j] += o.grad[r * w + j];
                        });
}

template <typename T>
Tensor<T> concat_last(const std::vector<Tensor<T>>& parts) {
  require(!parts.empty(), Errc::dimension, "concat_last of nothing");
  const std::size_t rows = parts[0].numel() / parts[0].dim(-1);
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.numel() / p.dim(-1) == rows && p.rank() == parts[0].rank(), Errc::dimension,
            "concat_last: leading extents differ");
    total += p.dim(-1);
  }
  Shape s = parts[0].shape();
  s.back() = total;
  std::vector<T> out(rows * total);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.dim(-1);
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(p.values().data() + r * w, w, out.data() + r * total + off);
    off += w;
  }
  Tensor<T> result(std::move(s), std::move(out));
  if (!GradMode::enabled()) return result;
  bool needs = false;
  for (const auto& p : parts) needs = needs || p.requires_grad();
  if (!needs) return result;
  auto node = std::make_shared<detail::Node<T>>();
  for (const auto& p : parts)
    if (p.requires_grad()) node->inputs.push_back(p.impl_ptr());
  node->backward = [parts, rows, total](const detail::TensorImpl<T>& o) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      const std::size_t w = p.dim(-1);
      if (p.requires_grad()) {
        auto gp = p.grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < w; ++j) gp[r * w + j] += o.grad[r * total + off + j];
      }
      off += w;
    }
  };
  result.impl()->node = std::move(node);
  result.impl()->requires_grad = true;
  return result;
}

template <typename T>
Tensor<T> reverse_time(const Tensor<T>& x) {
  const std::size_t len = x.dim(0), row = x.numel() / std::max<std::size_t>(len, 1);
  const auto& xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t t = 0; t < len; ++t)
    std::copy_n(xv.data() + (len - 1 - t) * row, row, out.data() + t * row);
  return make_result<T>(x.shape(), std::move(out), {x}, [x, len, row](const detail::TensorImpl<T>& o) {
    auto gx = x.grad();
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t j = 0; j < row; ++j) gx[(len - 1 - t) * row + j] += o.grad[t * row + j];
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  require(numel(shape) == x.numel(), Errc::dimension,
          "reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  return make_result<T>(std::move(shape), x.values(), {x},
                        [x](const detail::TensorImpl<T>& o) { accumulate(x, o.grad); });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T s = 0;
  for (T v : x.values()) s += v;
  return make_result<T>(Shape{1}, {s}, {x}, [x](const detail::TensorImpl<T>& o) {
    auto gx = x.grad();
    for (auto& g : gx) g += o.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / T(x.numel()));
}

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  check_same(pred.shape(), target.shape(), "mse_loss");
  const auto& p = pred.values();
  const auto& q = target.values();
  T s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - q[i]) * (p[i] - q[i]);
  const T n = T(p.size());
  return make_result<T>(Shape{1}, {s / n}, {pred, target},
                        [pred, target, n](const detail::TensorImpl<T>& o) {
                          const auto& p = pred.values();
                          const auto& q = target.values();
                          const T c = T(2) * o.grad[0] / n;
                          if (wants(pred)) {
                            auto gp = pred.grad();
                            for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += c * (p[i] - q[i]);
                          }
                          if (wants(target)) {
                            auto gt = target.grad();
                            for (std::size_t i = 0; i < gt.size(); ++i) gt[i] -= c * (p[i] - q[i]);
                          }
                        });
}

#define TFSE_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> transpose_last2(const Tensor<T>&);                                      \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> mul_channel(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> add_broadcast(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> scale(const Tensor<T>&, T);                                             \
  template Tensor<T> activation(const Tensor<T>&, Act);                                      \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);    \
  template Tensor<T> rms_norm(const Tensor<T>&, const Tensor<T>&, T);                        \
  template Tensor<T> softmax(const Tensor<T>&);                                              \
  template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, bool);     \
  template Tensor<T> depthwise_conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                      bool);                                                 \
  template Tensor<T> split_heads(const Tensor<T>&, std::size_t);                             \
  template Tensor<T> merge_heads(const Tensor<T>&);                                          \
  template Tensor<T> slice_last(const Tensor<T>&, std::size_t, std::size_t);                 \
  template Tensor<T> concat_last(const std::vector<Tensor<T>>&);                             \
  template Tensor<T> reverse_time(const Tensor<T>&);                                         \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                       \
  template Tensor<T> sum(const Tensor<T>&);                                                  \
  template Tensor<T> mean(const Tensor<T>&);                                                 \
  template Tensor<T> mse_loss(const Tensor<T>&, const Tensor<T>&);

TFSE_INSTANTIATE_OPS(float)
TFSE_INSTANTIATE_OPS(double)

}  // namespace tfse
