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

#include "tfse/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tfse/attention.hpp"
#include "tfse/dsp.hpp"
#include "tfse/grad_check.hpp"
#include "tfse/model.hpp"
#include "tfse/ops.hpp"
#include "tfse/reference.hpp"
#include "tfse/ssm.hpp"
#include "tfse/xlstm.hpp"

namespace tfse {

bool VerifyReport::passed() const {
  return !checks.empty() &&
         std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.passed; });
}

namespace {

using Fn = std::function<Tensor<double>()>;

// exp with a backward rule that is off by a factor of two.
Tensor<double> faulty_exp(const Tensor<double>& x) {
  return custom_unary<double>(
      x,
      [](std::span<const double> in) {
        std::vector<double> out(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::exp(in[i]);
        return out;
      },
      [](std::span<const double>, std::span<const double> out, std::span<const double> g) {
        std::vector<double> r(out.size());
        for (std::size_t i = 0; i < out.size(); ++i) r[i] = 2.0 * out[i] * g[i];
        return r;
      });
}

class Suite {
 public:
  explicit Suite(const VerifyOptions& o) : opts_(o) {}

  void add(std::string name, bool ok, double value, double threshold, std::string detail = "") {
    VerifyCheck c{std::move(name), ok, value, threshold, std::move(detail)};
    if (opts_.on_check) opts_.on_check(c);
    report_.checks.push_back(std::move(c));
  }

  void guarded(const std::string& name, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      add(name, false, 0, 0, std::string("exception: ") + e.what());
    }
  }

  void grad(const std::string& name, const Fn& f, const std::vector<Tensor<double>>& inputs,
            double tol = 1e-3) {
    guarded(name, [&] {
      const auto r = grad_check<double>(f, inputs, 1e-5, 7);
      std::ostringstream d;
      d << "checked " << r.checked << " coordinates, worst analytic " << r.analytic << " numeric "
        << r.numeric;
      add(name, r.max_rel_error < tol, r.max_rel_error, tol, d.str());
    });
  }

  VerifyReport take() { return std::move(report_); }
  const VerifyOptions& opts() const { return opts_; }

 private:
  VerifyOptions opts_;
  VerifyReport report_;
};

std::vector<Tensor<double>> with_params(const Tensor<double>& x, const ParamSet<double>& ps) {
  auto v = ps.tensors();
  v.insert(v.begin(), x);
  return v;
}

void check_ops(Suite& s, Rng& rng) {
  auto a = random_tensor<double>({3, 4}, rng).set_requires_grad(true);
  auto b = random_tensor<double>({4, 5}, rng).set_requires_grad(true);
  auto g = random_tensor<double>({5}, rng).set_requires_grad(true);
  auto be = random_tensor<double>({5}, rng).set_requires_grad(true);
  const bool fault = s.opts().inject_fault;
  s.grad("grad: matmul/layer_norm/softmax/exp chain",
         [=] {
           auto h = layer_norm(matmul(a, b), g, be);
           h = fault ? faulty_exp(h) : activation(h, Act::exp);
           return softmax(h);
         },
         {a, b, g, be}, 1e-4);
  auto x = random_tensor<double>({7, 3}, rng).set_requires_grad(true);
  auto k = random_tensor<double>({4, 3, 2}, rng).set_requires_grad(true);
  auto kb = random_tensor<double>({2}, rng).set_requires_grad(true);
  s.grad("grad: causal conv1d + silu + rms_norm",
         [=] { return rms_norm(activation(conv1d(x, k, kb, true), Act::silu), kb); }, {x, k, kb},
         1e-4);
  // Negative control: the wrong rule must be caught.
  auto y = random_tensor<double>({6}, rng).set_requires_grad(true);
  s.guarded("negative control: wrong backward rule detected", [&] {
    const auto r = grad_check<double>([=] { return faulty_exp(y); }, {y}, 1e-6, 3);
    s.add("negative control: wrong backward rule detected", r.max_rel_error > 1e-2, r.max_rel_error,
          1e-2, "error must exceed the threshold");
  });
}

void check_blocks(Suite& s, Rng& rng) {
  AttentionDims ad{8, 16, 2, false, PEKind::none, 3};
  {
    ParamSet<double> ps;
    TransformerBlock<double> blk(ps, "t", ad, rng);
    auto x = random_tensor<double>({5, 8}, rng).set_requires_grad(true);
    s.grad("grad: Transformer block", [&, x] { return blk.forward(x); }, with_params(x, ps));
  }
  {
    ParamSet<double> ps;
    auto d = ad;
    d.causal = true;
    d.pe = PEKind::rotary;
    ConformerBlock<double> blk(ps, "c", d, rng);
    auto x = random_tensor<double>({5, 8}, rng).set_requires_grad(true);
    s.grad("grad: Conformer block (causal, rope)", [&, x] { return blk.forward(x); },
           with_params(x, ps));
  }
  MambaDims md{8, 4, 2, 4, 0, ScanMode::sequential};
  {
    ParamSet<double> ps;
    MambaBlock<double> blk(ps, "m", md, rng);
    auto x = random_tensor<double>({6, 8}, rng).set_requires_grad(true);
    s.grad("grad: Mamba block", [&, x] { return blk.forward(x); }, with_params(x, ps));
  }
  {
    ParamSet<double> ps;
    auto d = md;
    d.scan = ScanMode::parallel;
    BiMambaBlock<double> blk(ps, "b", d, rng);
    auto x = random_tensor<double>({6, 8}, rng).set_requires_grad(true);
    s.grad("grad: BiMamba block (parallel scan)", [&, x] { return blk.forward(x); },
           with_params(x, ps));
  }
  XLSTMDims xd{8, 2, 2, 4, 4};
  {
    ParamSet<double> ps;
    MLSTMBlock<double> blk(ps, "x", xd, rng);
    auto x = random_tensor<double>({5, 8}, rng).set_requires_grad(true);
    s.grad("grad: mLSTM block", [&, x] { return blk.forward(x); }, with_params(x, ps));
  }
  {
    ParamSet<double> ps;
    CBixLSTMBlock<double> blk(ps, "c", xd, rng);
    auto x = random_tensor<double>({5, 8}, rng).set_requires_grad(true);
    s.grad("grad: C-BixLSTM block", [&, x] { return blk.forward(x); }, with_params(x, ps));
  }
  {
    ParamSet<double> ps;
    PBixLSTMBlock<double> blk(ps, "p", xd, rng);
    auto x = random_tensor<double>({5, 8}, rng).set_requires_grad(true);
    s.grad("grad: P-BixLSTM block", [&, x] { return blk.forward(x); }, with_params(x, ps));
  }
}

void check_scan(Suite& s, Rng& rng) {
  s.guarded("scan: parallel == sequential == reference", [&] {
    double worst32 = 0, worst64 = 0, worst_ref = 0;
    std::uniform_int_distribution<std::size_t> len(1, 257), st(1, 8), dim(1, 6);
    for (int it = 0; it < 200; ++it) {
      const std::size_t L = len(rng), N = st(rng), D = dim(rng);
      auto u = random_tensor<double>({L, D}, rng);
      auto dt = random_tensor<double>({L, D}, rng, 0.001, 0.5);
      auto A = random_tensor<double>({D, N}, rng, -2.0, -0.05);
      auto B = random_tensor<double>({L, N}, rng);
      auto C = random_tensor<double>({L, N}, rng);
      auto Dk = random_tensor<double>({D}, rng);
      auto ys = selective_scan_seq(u, dt, A, B, C, Dk);
      auto yp = selective_scan_par(u, dt, A, B, C, Dk);
      auto yr = reference_selective_scan(u.values(), dt.values(), A.values(), B.values(),
                                         C.values(), Dk.values(), L, D, N);
      auto f = [](const Tensor<double>& t) {
        return Tensor<float>(t.shape(), std::vector<float>(t.values().begin(), t.values().end()));
      };
      auto ys32 = selective_scan_seq(f(u), f(dt), f(A), f(B), f(C), f(Dk));
      auto yp32 = selective_scan_par(f(u), f(dt), f(A), f(B), f(C), f(Dk));
      double scale = 1e-12;
      for (double v : yr) scale = std::max(scale, std::abs(v));
      for (std::size_t i = 0; i < yr.size(); ++i) {
        worst64 = std::max(worst64, std::abs(ys.values()[i] - yp.values()[i]) / scale);
        worst_ref = std::max(worst_ref, std::abs(ys.values()[i] - yr[i]) / scale);
        worst32 = std::max(worst32, std::abs(double(ys32.values()[i]) - double(yp32.values()[i])) / scale);
      }
    }
    s.add("scan: parallel vs sequential, 64-bit", worst64 < 1e-10, worst64, 1e-10);
    s.add("scan: parallel vs sequential, 32-bit", worst32 < 1e-5, worst32, 1e-5);
    s.add("scan: sequential vs long-double reference", worst_ref < 1e-10, worst_ref, 1e-10);
  });
}

void check_mlstm(Suite& s, Rng& rng) {
  s.guarded("mLSTM: stabilized == naive", [&] {
    double worst = 0;
    const std::size_t L = 24, dh = 6;
    for (int it = 0; it < 50; ++it) {
      auto q = random_tensor<double>({1, L, dh}, rng);
      auto k = random_tensor<double>({1, L, dh}, rng);
      auto v = random_tensor<double>({1, L, dh}, rng);
      auto ig = random_tensor<double>({1, L}, rng, -5, 5);
      auto fl = random_tensor<double>({1, L}, rng, -5, 5);
      auto h = mlstm_scan(q, k, v, ig, fl);
      auto r = reference_mlstm(q.values(), k.values(), v.values(), ig.values(), fl.values(), L, dh);
      for (std::size_t i = 0; i < r.size(); ++i)
        worst = std::max(worst, std::abs(h.values()[i] - r[i]) / std::max(std::abs(r[i]), 1e-3));
    }
    s.add("mLSTM: stabilized == naive (gates in [-5,5])", worst < 1e-10, worst, 1e-10);
  });
  s.guarded("mLSTM: finite at gates +-100", [&] {
    std::size_t bad = 0;
    std::uniform_int_distribution<int> coin(0, 1);
    for (int it = 0; it < 10000; ++it) {
      auto st = MLSTMState<double>::zeros(4);
      for (int t = 0; t < 8; ++t) {
        auto q = random_tensor<double>({4}, rng);
        auto k = random_tensor<double>({4}, rng);
        auto v = random_tensor<double>({4}, rng);
        const double ig = coin(rng) ? 100.0 : -100.0, fl = coin(rng) ? 100.0 : -100.0;
        auto h = mlstm_cell_step(st, q.values().data(), k.values().data(), v.values().data(), ig, fl);
        for (double x : h) bad += !std::isfinite(x);
      }
    }
    s.add("mLSTM: finite outputs at gates +-100 (1e4 cases)", bad == 0, double(bad), 0);
  });
}

void check_causality(Suite& s, Rng& rng) {
  const Backbone kinds[] = {Backbone::transformer, Backbone::conformer, Backbone::mamba, Backbone::xlstm};
  for (Backbone b : kinds) {
    ModelConfig cfg;
    cfg.backbone = b;
    cfg.blocks = 2;
    cfg.causal = true;
    cfg.d_model = 16;
    cfg.d_ff = 32;
    cfg.heads = 2;
    cfg.conv_kernel = 5;
    cfg.d_state = 4;
    cfg.xlstm_heads = 2;
    const std::string name = "causality: " + cfg.name() + " (causal)";
    s.guarded(name, [&] {
      EnhancementModel<float> model(cfg, 3);
      const std::size_t L = 12;
      double worst = 0;
      std::function<Tensor<float>(const Tensor<float>&)> f = [&](const Tensor<float>& x) {
        return model.forward(x);
      };
      for (int trial = 0; trial < 5; ++trial) {
        auto x = random_tensor<float>({L, kBins}, rng, 0.0, 2.0);
        const std::size_t t = std::uniform_int_distribution<std::size_t>(1, L - 1)(rng);
        const auto d = perturbation_response(f, x, t, rng);
        for (std::size_t r = 0; r < t; ++r) worst = std::max(worst, d[r]);
      }
      s.add(name, worst <= 1e-5, worst, 1e-5);
    });
  }
}

void check_dsp(Suite& s, Rng& rng) {
  s.guarded("dsp: STFT/ISTFT round trip", [&] {
    Waveform w;
    std::normal_distribution<double> g(0, 0.3);
    w.samples.resize(2 * kSampleRate);
    for (auto& x : w.samples) x = g(rng);
    const auto y = istft(stft(w), w.size());
    double num = 0, den = 0;
    for (std::size_t i = kFrameLen / 2; i + kFrameLen / 2 < w.size(); ++i) {
      num += (y.samples[i] - w.samples[i]) * (y.samples[i] - w.samples[i]);
      den += w.samples[i] * w.samples[i];
    }
    const double rel = std::sqrt(num / den);
    s.add("dsp: STFT/ISTFT interior round trip", rel < 1e-6, rel, 1e-6);
  });
  s.guarded("dsp: FFT vs direct DFT", [&] {
    std::vector<double> frame(kFrameLen);
    for (auto& x : frame) x = std::uniform_real_distribution<double>(-1, 1)(rng);
    std::vector<std::complex<double>> fast(kBins);
    rfft(frame, kFrameLen, fast);
    const auto slow = reference_dft(frame, kFrameLen);
    double worst = 0;
    for (std::size_t k = 0; k < kBins; ++k) worst = std::max(worst, std::abs(fast[k] - slow[k]));
    s.add("dsp: FFT vs direct DFT", worst < 1e-9, worst, 1e-9);
  });
  s.guarded("dsp: PSM identities", [&] {
    Spectrogram a, b;
    a.frames = b.frames = 1;
    a.values.assign(kBins, {0.0, 0.0});
    b.values.assign(kBins, {0.0, 0.0});
    for (std::size_t k = 0; k < kBins; ++k) {
      const double mag = 0.1 + double(k) / kBins, ph = double(k) * 0.37;
      a.values[k] = std::polar(mag, ph);
      b.values[k] = std::polar(mag, ph + std::numbers::pi / 3);
    }
    const auto same = psm(a, a, false);
    const auto sixty = psm(a, b, false);
    double e1 = 0, e2 = 0;
    for (std::size_t k = 0; k < kBins; ++k) {
      e1 = std::max(e1, std::abs(same.values[k] - 1.0));
      e2 = std::max(e2, std::abs(sixty.values[k] - 0.5));
    }
    s.add("dsp: PSM == 1 for zero noise", e1 < 1e-12, e1, 1e-12);
    s.add("dsp: PSM == 0.5 at 60 degrees", e2 < 1e-12, e2, 1e-12);
  });
  s.guarded("dsp: mix_at_snr", [&] {
    Waveform sp, no;
    std::normal_distribution<double> g(0, 1);
    sp.samples.resize(8000);
    no.samples.resize(16000);
    for (auto& x : sp.samples) x = 0.2 * g(rng);
    for (auto& x : no.samples) x = 0.05 * g(rng);
    double worst = 0;
    for (int snr = -10; snr <= 20; ++snr) {
      const auto m = mix_at_snr(sp, no, snr, rng);
      const double meas = 10 * std::log10(mean_power(sp.samples) / mean_power(m.scaled_noise.samples));
      worst = std::max(worst, std::abs(meas - snr));
    }
    s.add("dsp: mix_at_snr measured SNR", worst < 1e-6, worst, 1e-6);
  });
}

}  // namespace

VerifyReport run_verify(const VerifyOptions& opts) {
  Suite s(opts);
  Rng rng(20240611);
  check_ops(s, rng);
  check_blocks(s, rng);
  check_scan(s, rng);
  check_mlstm(s, rng);
  check_causality(s, rng);
  check_dsp(s, rng);
  return s.take();
}

}  // namespace tfse
