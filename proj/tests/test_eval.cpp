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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "test_util.hpp"
#include "tfse/bench.hpp"
#include "tfse/dsp.hpp"
#include "tfse/estoi.hpp"
#include "tfse/model.hpp"
#include "tfse/score.hpp"
#include "tfse/synth.hpp"

using namespace tfse;

namespace {

Waveform scaled(const Waveform& w, double g) {
  Waveform o = w;
  for (auto& v : o.samples) v *= g;
  return o;
}

Waveform plus(const Waveform& a, const Waveform& b) {
  Waveform o = a;
  for (std::size_t i = 0; i < o.size(); ++i) o.samples[i] += b.samples[i];
  return o;
}

ModelConfig small(Backbone b, std::size_t blocks) {
  ModelConfig c;
  c.backbone = b;
  c.causal = backbone_causal_default(b);
  c.blocks = blocks;
  c.d_model = 32;
  c.d_ff = 64;
  c.heads = 4;
  c.conv_kernel = 7;
  c.d_state = 8;
  c.xlstm_heads = 2;
  return c;
}

}  // namespace

TEST_CASE("estoi identities") {
  Rng rng(1);
  const auto x = synth_speech(rng, 3.0);
  CHECK(estoi(x, x) == doctest::Approx(1.0).epsilon(1e-9));
  const auto y = plus(x, scaled(synth_noise(rng, 3.0), 0.3));
  const double base = estoi(x, y);
  CHECK(base < 1.0);
  for (double g : {0.01, 3.0, 250.0}) {
    CHECK(std::abs(estoi(scaled(x, g), y) - base) < 1e-9);
    CHECK(std::abs(estoi(x, scaled(y, g)) - base) < 1e-9);
  }
}

TEST_CASE("estoi of independent noise is near zero") {
  Rng rng(2);
  double worst = 0;
  for (int i = 0; i < 20; ++i) {
    const auto s = synth_speech(rng, 2.0), n = synth_noise(rng, 2.0);
    worst = std::max(worst, std::abs(estoi(s, n)));
  }
  CHECK(worst < 0.1);
}

TEST_CASE("estoi rises with mixture SNR") {
  Rng rng(3);
  const auto s = synth_speech(rng, 3.0), n = synth_noise(rng, 3.0);
  std::vector<double> snrs, scores;
  for (int snr = -10; snr <= 20; snr += 2) {
    const auto mix = mix_at_snr(s, n, snr, rng);
    snrs.push_back(snr);
    scores.push_back(estoi(s, mix.mixture));
  }
  CHECK(oracle::spearman(snrs, scores) > 0.95);
}

TEST_CASE("estoi input errors") {
  Rng rng(4);
  const auto x = synth_speech(rng, 2.0);
  Waveform shorter = x;
  shorter.samples.pop_back();
  CHECK_ERRC(estoi(x, shorter), Errc::dimension);
  Waveform tiny;
  tiny.samples.assign(4000, 0.1);
  CHECK_ERRC(estoi(tiny, tiny), Errc::length);
  Waveform other = x;
  other.sample_rate = 8000;
  CHECK_ERRC(estoi(other, other), Errc::rate);
}

TEST_CASE("snr_db") {
  Rng rng(5);
  const auto s = synth_speech(rng, 1.0);
  CHECK(snr_db(s.samples, s.samples) == kSnrCapDb);
  CHECK(snr_db(s.samples, std::vector<double>(s.size(), 0.0)) == doctest::Approx(0.0).epsilon(1e-12));
  const auto mix = mix_at_snr(s, synth_noise(rng, 2.0), 5.0, rng);
  CHECK(std::abs(snr_db(s.samples, mix.mixture.samples) - 5.0) < 1e-6);
  CHECK_ERRC(snr_db(s.samples, std::vector<double>(3, 0.0)), Errc::dimension);
  CHECK_ERRC(snr_db(std::vector<double>(3, 0.0), std::vector<double>(3, 1.0)), Errc::degenerate);
}

TEST_CASE("resampler keeps a tone and suppresses aliasing") {
  std::vector<double> x(16000);
  for (std::size_t n = 0; n < x.size(); ++n) x[n] = std::sin(2 * M_PI * 1000.0 * n / 16000.0);
  const auto y = resample(x, 5, 8);
  CHECK(y.size() == 10000);
  double err = 0;
  for (std::size_t n = 500; n + 500 < y.size(); ++n) err = std::max(err, std::abs(y[n] - std::sin(2 * M_PI * 1000.0 * n / 10000.0)));
  CHECK(err < 1e-2);
  // 7 kHz lies above the 5 kHz target Nyquist and must vanish.
  for (std::size_t n = 0; n < x.size(); ++n) x[n] = std::sin(2 * M_PI * 7000.0 * n / 16000.0);
  double peak = 0;
  const auto z = resample(x, 5, 8);
  for (std::size_t n = 500; n + 500 < z.size(); ++n) peak = std::max(peak, std::abs(z[n]));
  CHECK(peak < 1e-2);
}

TEST_CASE("scoring tables") {
  const auto dir = testutil::scratch_dir("score");
  write_synth_corpus(dir.string(), 2, 2, 2, 2.0, 9);
  const auto items = load_eval_manifest((dir / "eval.lst").string());
  REQUIRE(items.size() == 10);

  const auto noisy = score_items(items, [](const Waveform& x, const Waveform&) { return x; }, 1);
  REQUIRE(noisy.columns.size() == 5);
  const double expect[] = {-5, 0, 5, 10, 15};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(noisy.columns[i].snr_db == expect[i]);
    CHECK(noisy.columns[i].count == 2);
    CHECK(noisy.columns[i].enhanced_estoi == noisy.columns[i].noisy_estoi);
    CHECK(noisy.columns[i].noisy_snr_db == doctest::Approx(expect[i]).epsilon(1e-6));
  }
  std::istringstream csv(noisy.to_csv());
  std::string header;
  std::getline(csv, header);
  CHECK(header == "metric,-5,0,5,10,15");

  // An all-ones mask model reproduces the noisy scores.
  EnhancementModel<double> ident(small(Backbone::mamba, 1), 1);
  auto w = ident.params().find("output.conv.w");
  auto b = ident.params().find("output.conv.b");
  std::fill(w.data().begin(), w.data().end(), 0.0);
  std::fill(b.data().begin(), b.data().end(), 80.0);
  const auto id = score_model(ident, items, 1);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(id.columns[i].enhanced_estoi == doctest::Approx(noisy.columns[i].noisy_estoi).epsilon(1e-6));

  const auto oracle_tab = score_oracle(items, 1);
  for (const auto& c : oracle_tab.columns) {
    CHECK(c.enhanced_estoi > c.noisy_estoi);
    CHECK(c.enhanced_snr_db > c.noisy_snr_db);
  }
  CHECK(score_oracle(items, 1).to_csv() == oracle_tab.to_csv());

  EnhancementModel<float> m(small(Backbone::transformer, 1), 2);
  CHECK(score_model(m, items, 4).to_csv() == score_model(m, items, 4).to_csv());
}

TEST_CASE("external scorer plug-in") {
  const auto dir = testutil::scratch_dir("scorer");
  const auto script = dir / "scorer.sh";
  {
    std::ofstream f(script);
    f << "#!/bin/sh\ntest -f \"$1\" && test -f \"$2\" && echo 2.5\n";
  }
  std::filesystem::permissions(script, std::filesystem::perms::owner_all);
  write_synth_corpus(dir.string(), 1, 1, 1, 2.0, 3);
  const auto items = load_eval_manifest((dir / "eval.lst").string());
  const auto t = score_items(items, [](const Waveform& x, const Waveform&) { return x; }, 1, script.string());
  CHECK(t.has_external);
  CHECK(t.columns[0].noisy_external == 2.5);
  CHECK(t.to_csv().find("enhanced_external") != std::string::npos);
  const auto bad = dir / "bad.sh";
  {
    std::ofstream f(bad);
    f << "#!/bin/sh\necho nothing\n";
  }
  std::filesystem::permissions(bad, std::filesystem::perms::owner_all);
  CHECK_ERRC(score_items(items, [](const Waveform& x, const Waveform&) { return x; }, 1, bad.string()), Errc::format);
}

TEST_CASE("rtf definition and measurement") {
  CHECK(rtf_value(2.0, 1, 20.0) == doctest::Approx(0.1));
  CHECK(rtf_value(8.0, 4, 20.0) == doctest::Approx(0.1));
  const EnhancementModel<float> m(small(Backbone::transformer, 2), 1);
  BenchSettings s;
  s.runs = 8;
  s.warmup = 2;
  const auto r = measure_rtf(m, 4.0, s);
  CHECK(r.rtf > 0.0);
  CHECK(r.runs == 8);
  CHECK(r.cv < 0.2);
  s.runs = 0;
  CHECK_ERRC(measure_rtf(m, 4.0, s), Errc::config);
}

TEST_CASE("sec/step grows with depth") {
  TrainStepSettings s;
  s.steps = 4;
  s.warmup = 1;
  s.batch = 2;
  s.clip_seconds = 1.0;
  EnhancementModel<float> shallow(small(Backbone::mamba, 1), 1), deep(small(Backbone::mamba, 6), 1);
  const double a = measure_train_step(shallow, s), b = measure_train_step(deep, s);
  CHECK(a > 0.0);
  CHECK(b > a);
}

TEST_CASE("bench report and exclusive lock") {
  const auto dir = testutil::scratch_dir("bench");
  const std::string lock = (dir / "bench.lock").string();
  RunConfig rc;
  rc.model = small(Backbone::bimamba, 1);
  rc.bench.lengths_s = {1.0, 2.0};
  rc.bench.batch = 1;
  rc.bench.runs = 2;
  rc.bench.warmup = 1;
  rc.bench.train_steps = 2;
  rc.bench.train_warmup = 1;
  rc.bench.train_clip_seconds = 0.5;
  const auto rep = run_bench(rc, "", true, lock);
  CHECK(rep.model == "BiMamba-1");
  CHECK(rep.params == EnhancementModel<float>(rc.model, 1).count_params());
  CHECK(rep.sec_per_step > 0.0);
  REQUIRE(rep.rtf.size() == 2);
  CHECK(rtf_growth(rep) == doctest::Approx(rep.rtf[1].rtf / rep.rtf[0].rtf));
  std::istringstream csv(rep.to_csv());
  std::string line;
  std::size_t rows = 0;
  std::getline(csv, line);
  CHECK(line == "model,params,length_s,rtf,rtf_cv,runs,sec_per_step");
  while (std::getline(csv, line)) rows += !line.empty();
  CHECK(rows == 2);

  {
    ExclusiveLock held(lock);
    CHECK_ERRC(ExclusiveLock{lock}, Errc::busy);
    CHECK_ERRC(run_bench(rc, "", false, lock), Errc::busy);
  }
  ExclusiveLock again(lock);
}
