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
#include <limits>
#include <random>

#include "oracles.hpp"
#include "test_util.hpp"
#include "tfse/attention.hpp"
#include "tfse/grad_check.hpp"
#include "tfse/ops.hpp"
#include "tfse/reference.hpp"

using namespace tfse;
using testutil::to_vec;

namespace {

// Multi-head attention written out with plain loops.
oracle::Vec naive_mhsa(const oracle::Vec& x, const MhsaParams<double>& p, std::size_t L, std::size_t d,
                       std::size_t H, bool causal) {
  auto proj = [&](const Tensor<double>& w, const Tensor<double>& b) {
    auto y = oracle::matmul(x, to_vec(w), L, d, d);
    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t j = 0; j < d; ++j) y[t * d + j] += b.values()[j];
    return y;
  };
  const auto q = proj(p.wq, p.bq), k = proj(p.wk, p.bk), v = proj(p.wv, p.bv);
  const std::size_t dh = d / H;
  oracle::Vec ctx(L * d, 0.0);
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t i = 0; i < L; ++i) {
      oracle::Vec s(L);
      double mx = -1e300;
      for (std::size_t j = 0; j < L; ++j) {
        double dot = 0;
        for (std::size_t a = 0; a < dh; ++a) dot += q[i * d + h * dh + a] * k[j * d + h * dh + a];
        s[j] = dot / std::sqrt(static_cast<double>(dh));
        if (!(causal && j > i)) mx = std::max(mx, s[j]);
      }
      double z = 0;
      for (std::size_t j = 0; j < L; ++j) {
        s[j] = (causal && j > i) ? 0.0 : std::exp(s[j] - mx);
        z += s[j];
      }
      for (std::size_t j = 0; j < L; ++j)
        for (std::size_t a = 0; a < dh; ++a) ctx[i * d + h * dh + a] += s[j] / z * v[j * d + h * dh + a];
    }
  auto out = oracle::matmul(ctx, to_vec(p.wo), L, d, d);
  for (std::size_t t = 0; t < L; ++t)
    for (std::size_t j = 0; j < d; ++j) out[t * d + j] += p.bo.values()[j];
  return out;
}

MhsaParams<double> random_params(ParamSet<double>& ps, std::size_t d, Rng& rng) {
  auto p = MhsaParams<double>::create(ps, "a", d, rng);
  for (auto* b : {&p.bq, &p.bk, &p.bv, &p.bo})
    for (auto& v : b->data()) v = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  return p;
}

std::vector<double> perturb_rows(const std::function<Tensor<float>(const Tensor<float>&)>& f,
                                 const Tensor<float>& x, std::size_t t, Rng& rng) {
  return perturbation_response<float>(f, x, t, rng);
}

}  // namespace

TEST_CASE("causal_mask") {
  const double inf = std::numeric_limits<double>::infinity();
  const auto m3 = causal_mask<double>(3);
  CHECK(to_vec(m3) == oracle::Vec{0, -inf, -inf, 0, 0, -inf, 0, 0, 0});
  CHECK(to_vec(causal_mask<double>(1)) == oracle::Vec{0});
  std::mt19937_64 rng(1);
  const auto s = softmax(add(random_tensor<double>({6, 6}, rng, -3, 3), causal_mask<double>(6)));
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = i + 1; j < 6; ++j) CHECK(s.values()[i * 6 + j] == 0.0);
}

TEST_CASE("mhsa matches the naive oracle") {
  Rng rng(2);
  for (bool causal : {false, true}) {
    ParamSet<double> ps;
    const auto p = random_params(ps, 12, rng);
    const auto x = random_tensor<double>({7, 12}, rng);
    Tensor<double> weights;
    const auto y = mhsa(x, p, 3, causal, PEKind::none, &weights);
    CHECK(oracle::max_abs_diff(to_vec(y), naive_mhsa(to_vec(x), p, 7, 12, 3, causal)) < 1e-12);
    REQUIRE(weights.shape() == Shape{3, 7, 7});
    for (std::size_t h = 0; h < 3; ++h)
      for (std::size_t i = 0; i < 7; ++i) {
        double row = 0;
        for (std::size_t j = 0; j < 7; ++j) {
          const double w = weights.values()[(h * 7 + i) * 7 + j];
          row += w;
          if (causal && j > i) CHECK(w == 0.0);
        }
        CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
      }
  }
}

TEST_CASE("mhsa special cases") {
  Rng rng(3);
  ParamSet<double> ps;
  const auto p = random_params(ps, 8, rng);
  const auto x = random_tensor<double>({5, 8}, rng);
  // Causal frame 0 can only attend to itself: out_0 = (x_0 Wv + bv) Wo + bo.
  const auto y = mhsa(x, p, 2, true, PEKind::none);
  const oracle::Vec x0(x.values().begin(), x.values().begin() + 8);
  auto v0 = oracle::matmul(x0, to_vec(p.wv), 1, 8, 8);
  for (std::size_t j = 0; j < 8; ++j) v0[j] += p.bv.values()[j];
  auto o0 = oracle::matmul(v0, to_vec(p.wo), 1, 8, 8);
  for (std::size_t j = 0; j < 8; ++j) CHECK(y.values()[j] == doctest::Approx(o0[j] + p.bo.values()[j]).epsilon(1e-12));

  // Identical rows give identical values, so every output row is the same.
  oracle::Vec same;
  for (int t = 0; t < 5; ++t) same.insert(same.end(), x0.begin(), x0.end());
  const auto ys = mhsa(testutil::tensor<double>({5, 8}, same), p, 2, false, PEKind::rotary);
  for (std::size_t t = 1; t < 5; ++t)
    for (std::size_t j = 0; j < 8; ++j) CHECK(ys.values()[t * 8 + j] == doctest::Approx(ys.values()[j]).epsilon(1e-12));
}

TEST_CASE("mhsa causal perturbation sweep") {
  Rng rng(4);
  ParamSet<float> ps;
  const auto p = MhsaParams<float>::create(ps, "a", 16, rng);
  const auto x = random_tensor<float>({12, 16}, rng);
  for (PEKind pe : {PEKind::none, PEKind::rotary})
    for (std::size_t t = 0; t < 12; ++t) {
      const auto d = perturb_rows([&](const Tensor<float>& in) { return mhsa(in, p, 4, true, pe); }, x, t, rng);
      for (std::size_t s = 0; s < t; ++s) CHECK(d[s] <= 1e-6);
      CHECK(d[t] > 0.0);
    }
}

TEST_CASE("non-causal attention without PE is permutation equivariant") {
  Rng rng(5);
  ParamSet<double> ps;
  AttentionDims ad{8, 16, 2, false, PEKind::none, 3};
  TransformerBlock<double> blk(ps, "t", ad, rng);
  const auto x = random_tensor<double>({6, 8}, rng);
  const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  oracle::Vec xp(48);
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t j = 0; j < 8; ++j) xp[t * 8 + j] = x.values()[perm[t] * 8 + j];
  const auto y = blk.forward(x), yp = blk.forward(testutil::tensor<double>({6, 8}, xp));
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t j = 0; j < 8; ++j) CHECK(yp.values()[t * 8 + j] == doctest::Approx(y.values()[perm[t] * 8 + j]).epsilon(1e-10));

  // With RoPE the equivariance breaks.
  ParamSet<double> ps2;
  ad.pe = PEKind::rotary;
  TransformerBlock<double> rblk(ps2, "r", ad, rng);
  const auto ry = rblk.forward(x), ryp = rblk.forward(testutil::tensor<double>({6, 8}, xp));
  double diff = 0;
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t j = 0; j < 8; ++j) diff = std::max(diff, std::abs(ryp.values()[t * 8 + j] - ry.values()[perm[t] * 8 + j]));
  CHECK(diff > 1e-6);
}

TEST_CASE("transformer block") {
  Rng rng(6);
  {
    ParamSet<float> ps;
    TransformerBlock<float> blk(ps, "t", AttentionDims{256, 1024, 8, false, PEKind::none, 31}, rng);
    CHECK(ps.count() == oracle::count::transformer_block(256, 1024));
    CHECK(ps.count() == 789760);
  }
  ParamSet<double> ps;
  TransformerBlock<double> blk(ps, "t", AttentionDims{8, 16, 2, false, PEKind::none, 3}, rng);
  for (std::size_t L : {1u, 4u, 33u}) CHECK(blk.forward(random_tensor<double>({L, 8}, rng)).shape() == Shape{L, 8});
  auto x = random_tensor<double>({5, 8}, rng).set_requires_grad(true);
  std::vector<Tensor<double>> inputs{x};
  for (const auto& t : ps.tensors()) inputs.push_back(t);
  const auto r = grad_check<double>([&] { return blk.forward(x); }, inputs, 1e-5);
  CHECK(r.max_rel_error < 1e-3);
  ParamSet<double> bad;
  CHECK_ERRC(TransformerBlock<double>(bad, "b", AttentionDims{10, 16, 4, false, PEKind::none, 3}, rng), Errc::config);
}

TEST_CASE("conformer block") {
  Rng rng(7);
  {
    ParamSet<float> ps;
    ConformerBlock<float> blk(ps, "c", AttentionDims{256, 1024, 8, false, PEKind::none, 31}, rng);
    CHECK(ps.count() == oracle::count::conformer_block(256, 1024, 31));
  }
  for (bool causal : {false, true}) {
    ParamSet<float> ps;
    ConformerBlock<float> blk(ps, "c", AttentionDims{16, 32, 4, causal, PEKind::none, 7}, rng);
    for (std::size_t L : {1u, 7u, 100u}) CHECK(blk.forward(random_tensor<float>({L, 16}, rng)).shape() == Shape{L, 16});
    const auto x = random_tensor<float>({20, 16}, rng);
    for (std::size_t t = 0; t < 20; t += 3) {
      const auto d = perturb_rows([&](const Tensor<float>& in) { return blk.forward(in); }, x, t, rng);
      if (causal) {
        for (std::size_t s = 0; s < t; ++s) CHECK(d[s] <= 1e-6);
      } else if (t > 0) {
        CHECK(d[0] > 0.0);
      }
    }
  }
  ParamSet<double> ps;
  ConformerBlock<double> blk(ps, "c", AttentionDims{8, 16, 2, false, PEKind::none, 3}, rng);
  auto x = random_tensor<double>({5, 8}, rng).set_requires_grad(true);
  std::vector<Tensor<double>> inputs{x};
  for (const auto& t : ps.tensors()) inputs.push_back(t);
  CHECK(grad_check<double>([&] { return blk.forward(x); }, inputs, 1e-5).max_rel_error < 1e-3);
}
