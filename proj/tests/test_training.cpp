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
#include <limits>

#include "oracles.hpp"
#include "test_util.hpp"
#include "tfse/dsp.hpp"
#include "tfse/grad_check.hpp"
#include "tfse/model.hpp"
#include "tfse/ops.hpp"
#include "tfse/reference.hpp"
#include "tfse/train.hpp"

using namespace tfse;
using testutil::to_vec;

namespace {

RunConfig tiny_run(Backbone b) {
  RunConfig rc;
  rc.model.backbone = b;
  rc.model.causal = backbone_causal_default(b);
  rc.model.blocks = 1;
  rc.model.d_model = 8;
  rc.model.d_ff = 16;
  rc.model.heads = 2;
  rc.model.conv_kernel = 3;
  rc.model.d_state = 4;
  rc.model.xlstm_heads = 2;
  rc.train.batch_size = 2;
  rc.train.clip_seconds = 0.25;
  rc.train.synth_speech = 3;
  rc.train.synth_noise = 2;
  rc.train.synth_seconds = 1.0;
  rc.train.steps_per_epoch = 3;
  rc.train.epochs = 2;
  rc.train.step_w = 10;
  rc.seed = 11;
  return rc;
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  CHECK(lr_at(40000, 40000, 256) == doctest::Approx(3.125e-4).epsilon(1e-12));
  CHECK(lr_at(1, 40000, 256) == doctest::Approx(7.8125e-9).epsilon(1e-12));
  CHECK(lr_at(1, 40000, 256) == doctest::Approx(std::pow(40000.0, -1.5) * 0.0625).epsilon(1e-12));
  CHECK(lr_at(400, 400, 256) == doctest::Approx(std::pow(400.0, -0.5) / 16.0).epsilon(1e-12));
  double peak = 0;
  std::size_t arg = 0;
  for (std::size_t s = 1; s <= 2000; ++s) {
    const double lr = lr_at(s, 400, 256);
    CHECK(lr > 0.0);
    if (lr > peak) peak = lr, arg = s;
    if (s > 1 && s <= 400) CHECK(lr > lr_at(s - 1, 400, 256));
    if (s > 400) CHECK(lr < lr_at(s - 1, 400, 256));
  }
  CHECK(arg == 400);
  CHECK_ERRC(lr_at(0, 400, 256), Errc::contract);
}

TEST_CASE("value clipping") {
  ParamSet<double> ps;
  auto p = ps.values("p", {5}, {0, 0, 0, 0, 0});
  const double g[5] = {2.5, -3.0, 0.3, -1.0, 1.0};
  std::copy(g, g + 5, p.grad().begin());
  CHECK(clip_gradients(ps) == 3.0);
  CHECK(to_vec(Tensor<double>({5}, std::vector<double>(p.grad().begin(), p.grad().end()))) ==
        oracle::Vec{1.0, -1.0, 0.3, -1.0, 1.0});
}

TEST_CASE("adam") {
  {
    ParamSet<double> ps;
    auto p = ps.values("p", {3}, {0.5, -2, 7});
    auto st = AdamState::zeros(ps);
    p.zero_grad();
    adam_step(ps, st, 0.1);
    CHECK(to_vec(p) == oracle::Vec{0.5, -2, 7});
    CHECK(st.m[0] == std::vector<double>(3, 0.0));
  }
  {
    ParamSet<double> ps;
    auto p = ps.values("p", {1}, {2.0});
    auto st = AdamState::zeros(ps);
    p.grad()[0] = 1.0;
    adam_step(ps, st, 0.01);
    CHECK(2.0 - p.values()[0] == doctest::Approx(0.01).epsilon(1e-6));
  }
  // 1-D quadratic (x - 3)^2.
  ParamSet<double> ps;
  auto x = ps.values("x", {1}, {0.0});
  auto st = AdamState::zeros(ps);
  const auto three = testutil::tensor<double>({1}, {3.0});
  for (int i = 0; i < 500; ++i) {
    ps.zero_grad();
    const auto d = sub(x, three);
    sum(mul(d, d)).backward();
    adam_step(ps, st, 0.05);
  }
  CHECK(std::abs(x.values()[0] - 3.0) < 1e-3);
}

TEST_CASE("psm mse loss") {
  std::mt19937_64 rng(1);
  const auto t = random_tensor<double>({4, 6}, rng, 0, 1);
  CHECK(psm_mse_loss(t, t).item() == 0.0);
  auto shifted = to_vec(t);
  for (auto& v : shifted) v += 0.5;
  CHECK(psm_mse_loss(testutil::tensor<double>({4, 6}, shifted), t).item() == doctest::Approx(0.25).epsilon(1e-14));

  auto pred = random_tensor<double>({4, 6}, rng, 0, 1).set_requires_grad(true);
  psm_mse_loss(pred, t).backward();
  for (std::size_t i = 0; i < 24; ++i)
    CHECK(pred.grad()[i] == doctest::Approx(2 * (pred.values()[i] - t.values()[i]) / 24).epsilon(1e-12));
  pred.zero_grad();
  const auto r = grad_check<double>([&] { return psm_mse_loss(pred, t); }, {pred}, 1e-6);
  CHECK(r.max_rel_error < 1e-6);
  CHECK(psm_mse_loss(testutil::tensor<double>({4, 6}, shifted), t).item() > 0.0);
  CHECK_ERRC(psm_mse_loss(t, random_tensor<double>({4, 5}, rng)), Errc::dimension);
}

TEST_CASE("dynamic mixing batches") {
  auto rc = tiny_run(Backbone::mamba);
  rc.train.batch_size = 12;
  const auto corpus = load_training_corpus(rc.train, rc.seed);
  Rng a(5), b(5);
  const auto ba = sample_batch(a, corpus, rc.train), bb = sample_batch(b, corpus, rc.train);
  REQUIRE(ba.size() == 12);
  const std::size_t clip = static_cast<std::size_t>(rc.train.clip_seconds * kSampleRate);
  for (std::size_t i = 0; i < ba.size(); ++i) {
    const auto& ex = ba[i];
    CHECK(ex.snr_db == bb[i].snr_db);
    CHECK(ex.noisy.values == bb[i].noisy.values);
    CHECK(ex.target.values == bb[i].target.values);
    CHECK((ex.snr_db >= rc.train.snr_min && ex.snr_db <= rc.train.snr_max));
    for (double v : ex.target.values) REQUIRE((v >= 0.0 && v <= 1.0));
    // Re-measure the SNR from the time-domain signals recovered from the spectra.
    const std::size_t len = std::min({clip, corpus.speech[ex.speech_index].size(), corpus.noise[ex.noise_index].size()});
    const auto s = istft(ex.clean, len), x = istft(ex.noisy, len);
    double ps = 0, pn = 0;
    for (std::size_t n = 0; n < len; ++n) {
      ps += s.samples[n] * s.samples[n];
      pn += (x.samples[n] - s.samples[n]) * (x.samples[n] - s.samples[n]);
    }
    CHECK(std::abs(10 * std::log10(ps / pn) - ex.snr_db) < 1e-6);
    CHECK(std::abs(ex.measured_snr_db - ex.snr_db) < 1e-6);
  }
  Corpus empty;
  CHECK_ERRC(sample_batch(a, empty, rc.train), Errc::data);
  empty.speech = corpus.speech;
  CHECK_ERRC(sample_batch(a, empty, rc.train), Errc::data);
  rc.train.synth_speech = 0;
  CHECK_ERRC(load_training_corpus(rc.train, 1), Errc::data);
  rc.train.corpus = (testutil::scratch_dir("nocorpus") / "missing.lst").string();
  CHECK_ERRC(load_training_corpus(rc.train, 1), Errc::data);
}

TEST_CASE("a training step clips what it applies") {
  const auto rc = tiny_run(Backbone::transformer);
  EnhancementModel<double> m(rc.model, 1);
  const auto corpus = load_training_corpus(rc.train, rc.seed);
  Rng rng(2);
  auto adam = AdamState::zeros(m.params());
  double gmax = -1;
  auto cfg = rc;
  cfg.train.grad_clip = 1e-4;  // small enough that clipping engages
  const double loss = train_step(m, adam, sample_batch(rng, corpus, cfg.train), cfg, 1, &gmax);
  CHECK(loss > 0.0);
  CHECK(gmax > 1e-4);
  for (const auto& [_, p] : m.params().items())
    for (double g : p.grad()) REQUIRE(std::abs(g) <= 1e-4);
}

TEST_CASE("training runs are reproducible and resumable") {
  namespace fs = std::filesystem;
  const auto rc = tiny_run(Backbone::mamba);
  const auto da = testutil::scratch_dir("train-a"), db = testutil::scratch_dir("train-b"),
             dc = testutil::scratch_dir("train-c");
  {
    EnhancementModel<float> m(rc.model, rc.seed);
    const auto r = train(m, rc, da.string());
    REQUIRE(r.log.size() == 6);
    for (const auto& rec : r.log) CHECK(rec.lr == doctest::Approx(lr_at(rec.step, 10, 8)));
  }
  {
    EnhancementModel<float> m(rc.model, rc.seed);
    train(m, rc, db.string());
  }
  CHECK(read_text_file((da / "loss.csv").string()) == read_text_file((db / "loss.csv").string()));
  CHECK(fs::exists(da / "checkpoint" / "params.tfa"));
  CHECK(fs::exists(da / "config.txt"));

  // Stop after the first epoch, then resume from its checkpoint.
  {
    EnhancementModel<float> m(rc.model, rc.seed);
    TrainOptions o;
    o.max_steps = 3;
    train(m, rc, dc.string(), o);
  }
  {
    EnhancementModel<float> m(rc.model, 999);
    TrainOptions o;
    o.resume = true;
    const auto r = train(m, rc, dc.string(), o);
    CHECK(r.start_step == 3);
    CHECK(r.log.size() == 3);
  }
  CHECK(read_text_file((dc / "loss.csv").string()) == read_text_file((da / "loss.csv").string()));
  const auto a = EnhancementModel<float>::load((da / "checkpoint").string());
  const auto c = EnhancementModel<float>::load((dc / "checkpoint").string());
  for (std::size_t i = 0; i < a->params().size(); ++i)
    CHECK(a->params().items()[i].second.values() == c->params().items()[i].second.values());

  EnhancementModel<float> fresh(rc.model, 1);
  TrainOptions o;
  o.resume = true;
  CHECK_ERRC(train(fresh, rc, (da / "nothing").string(), o), Errc::io);
}

TEST_CASE("backbones share the data pipeline") {
  const auto da = testutil::scratch_dir("share-a"), db = testutil::scratch_dir("share-b");
  auto ra = tiny_run(Backbone::transformer), rb = tiny_run(Backbone::xlstm);
  ra.train.epochs = rb.train.epochs = 1;
  EnhancementModel<float> ma(ra.model, ra.seed), mb(rb.model, rb.seed);
  train(ma, ra, da.string());
  train(mb, rb, db.string());
  // The data RNG state after the same number of batches is identical.
  CHECK(read_text_file((da / "checkpoint" / "state.txt").string()) ==
        read_text_file((db / "checkpoint" / "state.txt").string()));
  const auto corpus = load_training_corpus(ra.train, ra.seed);
  Rng r1(3), r2(3);
  CHECK(sample_batch(r1, corpus, ra.train)[1].noisy.values == sample_batch(r2, corpus, rb.train)[1].noisy.values);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
  const auto rc = tiny_run(Backbone::transformer);
  EnhancementModel<float> m(rc.model, 3);
  auto b = m.params().find("output.conv.b");
  b.data()[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    TrainOptions o;
    o.write_outputs = false;
    train(m, rc, "", o);
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::numeric);
    const std::string msg = e.what();
    CHECK(msg.find("step 1") != std::string::npos);
    CHECK(msg.find("lr=") != std::string::npos);
    CHECK(msg.find("grad_max_abs=") != std::string::npos);
  }
}
