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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Usage: acceptance <configs dir>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tfse/attention.hpp"
#include "tfse/bench.hpp"
#include "tfse/config.hpp"
#include "tfse/dsp.hpp"
#include "tfse/estoi.hpp"
#include "tfse/grad_check.hpp"
#include "tfse/model.hpp"
#include "tfse/ops.hpp"
#include "tfse/reference.hpp"
#include "tfse/score.hpp"
#include "tfse/ssm.hpp"
#include "tfse/synth.hpp"
#include "tfse/train.hpp"
#include "tfse/xlstm.hpp"

using namespace tfse;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::vector<RunConfig> load_configs(const std::string& dir) {
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".cfg") paths.push_back(e.path());
  std::sort(paths.begin(), paths.end());
  std::vector<RunConfig> out;
  for (const auto& p : paths) out.push_back(RunConfig::load(p.string()));
  return out;
}

template <typename T>
Tensor<T> vec_tensor(Shape s, const std::vector<double>& v) {
  return Tensor<T>(std::move(s), std::vector<T>(v.begin(), v.end()));
}

template <typename T>
std::vector<double> as_vec(const Tensor<T>& t) { return {t.values().begin(), t.values().end()}; }

// 1
Outcome param_counts(const std::string& dir) {
  const std::map<std::string, double> table = {
      {"Transformer-4", 3.29}, {"Conformer-4", 6.22}, {"Mamba-5", 2.32},     {"Mamba-7", 3.20},
      {"Mamba-13", 5.83},      {"xLSTM-5", 2.21},     {"xLSTM-7", 3.04},     {"xLSTM-14", 5.95},
      {"BiMamba-3", 2.76},     {"BiMamba-4", 3.64},   {"BiMamba-7", 6.26},   {"C-BixLSTM-3", 2.63},
      {"C-BixLSTM-4", 3.46},   {"C-BixLSTM-7", 5.95}, {"P-BixLSTM-3", 2.63}, {"P-BixLSTM-4", 3.46},
      {"P-BixLSTM-7", 5.95}};
  Outcome o;
  std::map<std::string, bool> seen;
  double worst = 0;
  std::string worst_name;
  for (const auto& rc : load_configs(dir)) {
    const std::string name = rc.model.name();
    const auto it = table.find(name);
    if (it == table.end()) continue;
    const EnhancementModel<float> m(rc.model, rc.seed);
    const double rel = std::abs(m.count_params() / 1e6 - it->second) / it->second;
    const double tol = name == "Transformer-4" ? 0.005 : 0.05;
    if (rel > tol) {
      o.pass = false;
      o.detail += name + " off by " + fmt("%.2f%% ", 100 * rel);
    }
    if (rel > worst) worst = rel, worst_name = name;
    seen[name] = true;
  }
  for (const auto& [name, _] : table)
    if (!seen.count(name)) o.pass = false, o.detail += "no config for " + name + " ";
  if (o.pass)
    o.detail = std::to_string(seen.size()) + " models, worst " + worst_name + fmt(" at %.3f%%", 100 * worst);
  return o;
}

// 2
Outcome causality(const std::string& dir) {
  Outcome o;
  Rng rng(2024);
  std::size_t models = 0;
  double worst = 0;
  for (const auto& rc : load_configs(dir)) {
    if (!rc.model.causal) continue;
    ++models;
    const EnhancementModel<float> m(rc.model, rc.seed);
    const auto f = [&](const Tensor<float>& x) { return m.forward(x); };
    constexpr std::size_t L = 24;
    for (int trial = 0; trial < 20; ++trial) {
      const auto x = random_tensor<float>({L, kBins}, rng, 0.0, 2.0);
      const std::size_t t = std::uniform_int_distribution<std::size_t>(1, L - 1)(rng);
      const auto d = perturbation_response<float>(f, x, t, rng);
      for (std::size_t s = 0; s < t; ++s) worst = std::max(worst, d[s]);
    }
  }
  o.pass = models > 0 && worst <= 1e-5;
  o.detail = std::to_string(models) + " causal configs x 20 pairs, max change before t " + fmt("%.2e", worst);
  return o;
}

// 3
Outcome scan_oracle() {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> len(1, 257), dim(1, 8), st(1, 16);
  double w32 = 0, w64 = 0, wref = 0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t L = len(rng), D = dim(rng), N = st(rng);
    const auto u = oracle::random_vec(L * D, rng), dt = oracle::random_vec(L * D, rng, 0.001, 0.5),
               A = oracle::random_vec(D * N, rng, -4, -0.1), B = oracle::random_vec(L * N, rng),
               C = oracle::random_vec(L * N, rng), Dk = oracle::random_vec(D, rng);
    auto run = [&](auto tag, ScanMode mode) {
      using T = decltype(tag);
      return as_vec(selective_scan(vec_tensor<T>({L, D}, u), vec_tensor<T>({L, D}, dt), vec_tensor<T>({D, N}, A),
                                   vec_tensor<T>({L, N}, B), vec_tensor<T>({L, N}, C), vec_tensor<T>({D}, Dk), mode));
    };
    const auto s64 = run(double{}, ScanMode::sequential);
    w64 = std::max(w64, oracle::rel_diff(run(double{}, ScanMode::parallel), s64));
    w32 = std::max(w32, oracle::rel_diff(run(float{}, ScanMode::parallel), run(float{}, ScanMode::sequential)));
    wref = std::max(wref, oracle::rel_diff(s64, oracle::selective_scan(u, dt, A, B, C, Dk, L, D, N)));
  }
  Outcome o;
  o.pass = w32 < 1e-5 && w64 < 1e-10 && wref < 1e-6;
  o.detail = fmt("par vs seq: 32-bit %.2e, 64-bit %.2e; seq vs long-double oracle %.2e", w32, w64, wref);
  return o;
}

// 4
Outcome mlstm_stabilization() {
  std::mt19937_64 rng(4);
  constexpr std::size_t H = 2, L = 32, dh = 4;
  auto logsig = [](double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); };
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto q = oracle::random_vec(H * L * dh, rng), k = oracle::random_vec(H * L * dh, rng),
               v = oracle::random_vec(H * L * dh, rng), ig = oracle::random_vec(H * L, rng, -5, 5);
    auto fl = oracle::random_vec(H * L, rng, -5, 5);
    for (auto& f : fl) f = logsig(f);
    const auto h = mlstm_scan(vec_tensor<double>({H, L, dh}, q), vec_tensor<double>({H, L, dh}, k),
                              vec_tensor<double>({H, L, dh}, v), vec_tensor<double>({H, L}, ig),
                              vec_tensor<double>({H, L}, fl));
    for (std::size_t hh = 0; hh < H; ++hh) {
      auto sl = [&](const oracle::Vec& x, std::size_t w) {
        return oracle::Vec(x.begin() + hh * L * w, x.begin() + (hh + 1) * L * w);
      };
      const auto ref = oracle::mlstm_naive(sl(q, dh), sl(k, dh), sl(v, dh), sl(ig, 1), sl(fl, 1), L, dh);
      worst = std::max(worst, oracle::rel_diff(oracle::Vec(h.values().begin() + hh * L * dh,
                                                           h.values().begin() + (hh + 1) * L * dh),
                                               ref));
    }
  }
  std::size_t bad = 0;
  std::uniform_real_distribution<double> gate(-100, 100);
  std::bernoulli_distribution edge(0.5);
  for (int c = 0; c < 10000; ++c) {
    const std::size_t n = 4;
    const auto q = oracle::random_vec(n * dh, rng), k = oracle::random_vec(n * dh, rng),
               v = oracle::random_vec(n * dh, rng);
    oracle::Vec ig(n), fl(n);
    for (std::size_t t = 0; t < n; ++t) {
      ig[t] = edge(rng) ? (edge(rng) ? 100.0 : -100.0) : gate(rng);
      fl[t] = logsig(edge(rng) ? (edge(rng) ? 100.0 : -100.0) : gate(rng));
    }
    const auto h = mlstm_scan(vec_tensor<double>({1, n, dh}, q), vec_tensor<double>({1, n, dh}, k),
                              vec_tensor<double>({1, n, dh}, v), vec_tensor<double>({1, n}, ig),
                              vec_tensor<double>({1, n}, fl));
    const auto h32 = mlstm_scan(vec_tensor<float>({1, n, dh}, q), vec_tensor<float>({1, n, dh}, k),
                                vec_tensor<float>({1, n, dh}, v), vec_tensor<float>({1, n}, ig),
                                vec_tensor<float>({1, n}, fl));
    for (double x : h.values()) bad += !std::isfinite(x);
    for (float x : h32.values()) bad += !std::isfinite(x);
  }
  Outcome o;
  o.pass = worst < 1e-10 && bad == 0;
  o.detail = fmt("vs naive recurrence %.2e; non-finite outputs in 10000 fuzz cases: %.0f", worst, double(bad));
  return o;
}

// 5
Outcome gradient_checks() {
  Rng rng(5);
  std::vector<std::pair<std::string, double>> res;
  auto block_check = [&](const std::string& name, auto make) {
    ParamSet<double> ps;
    auto blk = make(ps);
    auto x = random_tensor<double>({5, 8}, rng).set_requires_grad(true);
    std::vector<Tensor<double>> in{x};
    for (const auto& t : ps.tensors()) in.push_back(t);
    res.emplace_back(name, grad_check<double>([&] { return blk->forward(x); }, in, 1e-5).max_rel_error);
  };
  for (bool causal : {false, true}) {
    const AttentionDims ad{8, 16, 2, causal, PEKind::rotary, 3};
    const std::string tag = causal ? " (causal)" : "";
    block_check("transformer" + tag, [&](ParamSet<double>& ps) { return std::make_unique<TransformerBlock<double>>(ps, "t", ad, rng); });
    block_check("conformer" + tag, [&](ParamSet<double>& ps) { return std::make_unique<ConformerBlock<double>>(ps, "c", ad, rng); });
  }
  for (ScanMode mode : {ScanMode::sequential, ScanMode::parallel}) {
    const MambaDims md{8, 4, 2, 4, 0, mode};
    const std::string tag = mode == ScanMode::parallel ? " (parallel scan)" : "";
    block_check("mamba" + tag, [&](ParamSet<double>& ps) { return std::make_unique<MambaBlock<double>>(ps, "m", md, rng); });
    block_check("bimamba" + tag, [&](ParamSet<double>& ps) { return std::make_unique<BiMambaBlock<double>>(ps, "b", md, rng); });
  }
  const XLSTMDims xd{8, 2, 2, 4, 4};
  block_check("mlstm", [&](ParamSet<double>& ps) { return std::make_unique<MLSTMBlock<double>>(ps, "x", xd, rng); });
  block_check("c-bixlstm", [&](ParamSet<double>& ps) { return std::make_unique<CBixLSTMBlock<double>>(ps, "c", xd, rng); });
  block_check("p-bixlstm", [&](ParamSet<double>& ps) { return std::make_unique<PBixLSTMBlock<double>>(ps, "p", xd, rng); });

  for (Backbone b : {Backbone::transformer, Backbone::conformer, Backbone::mamba, Backbone::bimamba, Backbone::xlstm,
                     Backbone::c_bixlstm, Backbone::p_bixlstm}) {
    ModelConfig c;
    c.backbone = b;
    c.causal = backbone_causal_default(b);
    c.blocks = 1;
    c.d_model = 8;
    c.d_ff = 16;
    c.heads = 2;
    c.conv_kernel = 3;
    c.d_state = 4;
    c.xlstm_heads = 2;
    const EnhancementModel<double> m(c, 7);
    const auto x = random_tensor<double>({3, kBins}, rng, 0, 2), target = random_tensor<double>({3, kBins}, rng, 0, 1);
    res.emplace_back(std::string("model ") + backbone_key(b),
                     grad_check<double>([&] { return psm_mse_loss(m.forward(x), target); }, m.params().tensors(), 1e-5)
                         .max_rel_error);
  }
  Outcome o;
  double worst = 0;
  std::string worst_name;
  for (const auto& [name, err] : res) {
    if (err >= 1e-3) o.pass = false, o.detail += name + fmt(" %.2e; ", err);
    if (err > worst) worst = err, worst_name = name;
  }
  if (o.pass) o.detail = std::to_string(res.size()) + " checks, worst " + worst_name + fmt(" %.2e", worst);
  return o;
}

// 6
Outcome dsp() {
  std::mt19937_64 rng(6);
  Waveform w;
  w.samples = oracle::random_vec(16000 * 2 + 123, rng);
  const auto y = istft(stft(w), w.size());
  double num = 0, den = 0;
  for (std::size_t n = kFrameLen; n + kFrameLen < w.size(); ++n) {
    num += (y.samples[n] - w.samples[n]) * (y.samples[n] - w.samples[n]);
    den += w.samples[n] * w.samples[n];
  }
  const double rt = std::sqrt(num / den);

  Spectrogram s, x;
  s.frames = x.frames = 3;
  s.values.resize(3 * kBins);
  x.values.resize(3 * kBins);
  std::uniform_real_distribution<double> mag(0.1, 2.0), ph(-M_PI, M_PI);
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const double m = mag(rng), p = ph(rng);
    s.values[i] = std::polar(m, p);
    x.values[i] = std::polar(m, p + M_PI / 3);
  }
  double unit = 0, half = 0;
  for (bool clamp : {false, true}) {
    for (double v : psm(s, s, clamp).values) unit = std::max(unit, std::abs(v - 1.0));
    for (double v : psm(s, x, clamp).values) half = std::max(half, std::abs(v - 0.5));
  }

  double snr_err = 0;
  Rng r2(7);
  const auto speech = synth_speech(r2, 2.0), noise = synth_noise(r2, 5.0);
  for (int snr = -10; snr <= 20; ++snr) {
    const auto mix = mix_at_snr(speech, noise, snr, r2);
    double ps = 0, pn = 0;
    for (std::size_t n = 0; n < speech.size(); ++n) {
      const double nz = mix.mixture.samples[n] - speech.samples[n];
      ps += speech.samples[n] * speech.samples[n];
      pn += nz * nz;
    }
    snr_err = std::max(snr_err, std::abs(10 * std::log10(ps / pn) - snr));
  }
  Outcome o;
  o.pass = rt < 1e-6 && unit < 1e-12 && half < 1e-12 && snr_err < 1e-6;
  o.detail = fmt("round trip %.2e; PSM |M-1| %.1e, |M-0.5| ", rt, unit) + fmt("%.1e; mix SNR error %.2e dB", half, snr_err);
  return o;
}

// 7
Outcome scheduler() {
  Outcome o;
  const double ref = lr_at(40000, 40000, 256);
  o.pass = std::abs(ref - 3.125e-4) <= 1e-15;
  for (auto [w, d] : {std::pair<std::size_t, std::size_t>{40000, 256}, {400, 32}, {100, 256}, {7, 8}}) {
    const double peak = lr_at(w, w, d);
    const double expect = 1.0 / std::sqrt(double(w)) / std::sqrt(double(d));
    if (std::abs(peak - expect) > 1e-15 * expect) o.pass = false;
    std::vector<std::size_t> grid;
    for (std::size_t s = 1; s <= 3 * w; s += std::max<std::size_t>(1, w / 200)) grid.push_back(s);
    grid.push_back(w);
    grid.push_back(w - 1 ? w - 1 : 1);
    grid.push_back(w + 1);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const double a = lr_at(grid[i - 1], w, d), b = lr_at(grid[i], w, d);
      if (grid[i] <= w && !(b > a)) o.pass = false;
      if (grid[i - 1] >= w && !(b < a)) o.pass = false;
      if (b > peak || a > peak) o.pass = false;
    }
  }
  o.detail = fmt("lr(40000; 40000, 256) = %.6e, peak at step_w on 4 grids", ref);
  return o;
}

// 8
Outcome toy_training(const std::string& dir) {
  const fs::path eval_dir = fs::temp_directory_path() / "tfse-acceptance-eval";
  fs::remove_all(eval_dir);
  write_synth_corpus(eval_dir.string(), 2, 2, 6, 3.0, 777);
  std::vector<EvalItem> items;
  for (const auto& it : load_eval_manifest((eval_dir / "eval.lst").string()))
    if (it.snr_db == 0.0) items.push_back(it);
  const auto oracle_tab = score_oracle(items, 1).columns.at(0);
  Outcome o;
  for (const char* b : {"transformer", "conformer", "mamba", "xlstm"}) {
    const auto rc = RunConfig::load((fs::path(dir) / "toy.cfg").string(), std::string("backbone=") + b);
    EnhancementModel<float> m(rc.model, rc.seed);
    TrainOptions opts;
    opts.write_outputs = false;
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = train(m, rc, "", opts);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double head = smoothed(res.log, 20, false), tail = smoothed(res.log, 20, true);
    const auto col = score_model(m, items, 1).columns.at(0);
    const double gain = col.enhanced_snr_db - col.noisy_snr_db;
    const bool ok = tail <= 0.5 * head && gain >= 3.0 && oracle_tab.enhanced_snr_db >= col.enhanced_snr_db &&
                    oracle_tab.enhanced_estoi >= col.enhanced_estoi;
    o.pass = o.pass && ok;
    o.detail += std::string(b) + fmt(": loss x%.2f, +%.1f dB", tail / head, gain) + fmt(" (%.0f steps, %.0fs); ", double(res.log.size()), secs);
  }
  o.detail += fmt("oracle +%.1f dB", oracle_tab.enhanced_snr_db - oracle_tab.noisy_snr_db);
  fs::remove_all(eval_dir);
  return o;
}

// 9
Outcome throughput(const std::string& dir) {
  auto cfg = [&](const char* file) { return RunConfig::load((fs::path(dir) / file).string()); };
  const auto tr = cfg("transformer4.cfg"), bm = cfg("bimamba4.cfg"), cx = cfg("cbixlstm4.cfg");
  const EnhancementModel<float> t4(tr.model, 1), b4(bm.model, 1);
  BenchSettings s;
  s.batch = 1;
  s.runs = 3;
  s.warmup = 1;
  auto growth = [&](const EnhancementModel<float>& m) {
    return measure_rtf(m, 40.0, s).rtf / measure_rtf(m, 10.0, s).rtf;
  };
  const double gt = growth(t4), gb = growth(b4);

  TrainStepSettings ts;
  ts.steps = 3;
  ts.warmup = 1;
  ts.batch = 2;
  ts.clip_seconds = 2.0;
  EnhancementModel<float> bt(bm.model, 1), ct(cx.model, 1);
  const double sb = measure_train_step(bt, ts), sc = measure_train_step(ct, ts);
  Outcome o;
  o.pass = !tr.model.causal && gt / gb >= 1.5 && sc > sb;
  o.detail = fmt("RTF(40s)/RTF(10s) Transformer-4 %.2f vs BiMamba-4 %.2f (x%.2f); ", gt, gb, gt / gb) +
             fmt("sec/step C-BixLSTM-4 %.3f vs BiMamba-4 %.3f", sc, sb);
  return o;
}

// 10
Outcome estoi_sanity() {
  Rng rng(10);
  const auto x = synth_speech(rng, 3.0), n = synth_noise(rng, 3.0);
  const double self = estoi(x, x);
  std::vector<double> snrs, scores;
  for (int snr = -10; snr <= 20; snr += 2) {
    snrs.push_back(snr);
    scores.push_back(estoi(x, mix_at_snr(x, n, snr, rng).mixture));
  }
  const double rho = oracle::spearman(snrs, scores);
  const auto y = mix_at_snr(x, n, 0.0, rng).mixture;
  const double base = estoi(x, y);
  double drift = 0;
  for (double g : {0.001, 0.5, 7.0, 1000.0}) {
    Waveform xs = x, ys = y;
    for (auto& v : xs.samples) v *= g;
    for (auto& v : ys.samples) v *= 1.0 / g;
    drift = std::max({drift, std::abs(estoi(xs, y) - base), std::abs(estoi(x, ys) - base)});
  }
  Outcome o;
  o.pass = std::abs(self - 1.0) <= 1e-9 && rho > 0.95 && drift <= 1e-9;
  o.detail = fmt("estoi(x,x)-1 = %.1e; Spearman %.3f; scale drift %.1e", self - 1.0, rho, drift);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <configs dir>\n", argv[0]);
    return 2;
  }
  const std::string dir = argv[1];
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"parameter counts", [&] { return param_counts(dir); }},
      {"causality", [&] { return causality(dir); }},
      {"scan oracle", scan_oracle},
      {"mLSTM stabilization", mlstm_stabilization},
      {"gradient checks", gradient_checks},
      {"DSP", dsp},
      {"scheduler", scheduler},
      {"toy training", [&] { return toy_training(dir); }},
      {"throughput trends", [&] { return throughput(dir); }},
      {"ESTOI sanity", estoi_sanity},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
