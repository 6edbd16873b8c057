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
#include <random>

#include "oracles.hpp"
#include "test_util.hpp"
#include "tfse/grad_check.hpp"
#include "tfse/ops.hpp"
#include "tfse/reference.hpp"
#include "tfse/xlstm.hpp"

using namespace tfse;
using testutil::tensor;
using testutil::to_vec;

namespace {

double norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("single step from the zero state") {
  std::mt19937_64 rng(1);
  const auto q = oracle::random_vec(4, rng), k = oracle::random_vec(4, rng), v = oracle::random_vec(4, rng);
  // i_pre = 0 and f_log < 0 keep the stabilizer at 0, so i' = 1.
  auto st = MLSTMState<double>::zeros(4);
  const auto h = mlstm_cell_step(st, q.data(), k.data(), v.data(), 0.0, -0.7);
  double kq = 0;
  for (int a = 0; a < 4; ++a) kq += k[a] * q[a];
  for (int a = 0; a < 4; ++a) CHECK(h[a] == doctest::Approx(v[a] * kq / std::max(std::abs(kq), 1.0)).epsilon(1e-14));
  CHECK(st.m == 0.0);
}

TEST_CASE("closed input gate reads from history only") {
  std::mt19937_64 rng(2);
  const auto q1 = oracle::random_vec(4, rng), k1 = oracle::random_vec(4, rng), v1 = oracle::random_vec(4, rng);
  const auto q2 = oracle::random_vec(4, rng), k2 = oracle::random_vec(4, rng), v2 = oracle::random_vec(4, rng);
  const auto v2b = oracle::random_vec(4, rng);
  auto a = MLSTMState<double>::zeros(4), b = MLSTMState<double>::zeros(4);
  mlstm_cell_step(a, q1.data(), k1.data(), v1.data(), 0.3, -0.2);
  mlstm_cell_step(b, q1.data(), k1.data(), v1.data(), 0.3, -0.2);
  const auto ha = mlstm_cell_step(a, q2.data(), k2.data(), v2.data(), -60.0, -0.5);
  const auto hb = mlstm_cell_step(b, q2.data(), k2.data(), v2b.data(), -60.0, -0.5);
  for (int i = 0; i < 4; ++i) CHECK(ha[i] == doctest::Approx(hb[i]).epsilon(1e-12));
}

TEST_CASE("stabilized scan equals the naive recurrence") {
  std::mt19937_64 rng(3);
  constexpr std::size_t H = 3, L = 40, dh = 5;
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto q = oracle::random_vec(H * L * dh, rng), k = oracle::random_vec(H * L * dh, rng),
               v = oracle::random_vec(H * L * dh, rng);
    const auto ig = oracle::random_vec(H * L, rng, -5, 5);
    auto fl = oracle::random_vec(H * L, rng, -5, 5);
    for (auto& f : fl) f = -std::log1p(std::exp(-f));  // logsigmoid, as the block feeds it
    const auto h = mlstm_scan(tensor<double>({H, L, dh}, q), tensor<double>({H, L, dh}, k), tensor<double>({H, L, dh}, v),
                              tensor<double>({H, L}, ig), tensor<double>({H, L}, fl));
    for (std::size_t hh = 0; hh < H; ++hh) {
      auto sl = [&](const oracle::Vec& x, std::size_t w) { return oracle::Vec(x.begin() + hh * L * w, x.begin() + (hh + 1) * L * w); };
      const auto ref = oracle::mlstm_naive(sl(q, dh), sl(k, dh), sl(v, dh), sl(ig, 1), sl(fl, 1), L, dh);
      const oracle::Vec got(h.values().begin() + hh * L * dh, h.values().begin() + (hh + 1) * L * dh);
      worst = std::max(worst, oracle::rel_diff(got, ref));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("extreme gates stay finite and respect the denominator bound") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> gate(-100, 100);
  for (int c = 0; c < 2000; ++c) {
    auto st = MLSTMState<double>::zeros(4);
    for (int t = 0; t < 5; ++t) {
      const auto q = oracle::random_vec(4, rng), k = oracle::random_vec(4, rng), v = oracle::random_vec(4, rng);
      const auto h = mlstm_cell_step(st, q.data(), k.data(), v.data(), gate(rng), -std::log1p(std::exp(-gate(rng))));
      for (double x : h) REQUIRE(std::isfinite(x));
      // ||h|| <= ||C q|| with C = exp(m) * C_stabilized.
      std::vector<double> cq(4, 0.0);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) cq[a] += st.C[a * 4 + b] * q[b];
      CHECK(norm(h) <= norm(cq) * std::exp(st.m) * (1 + 1e-12) + 1e-300);
    }
  }
  auto st = MLSTMState<double>::zeros(2);
  const double q[2] = {1, 0}, k[2] = {1, 1}, v[2] = {1, 2};
  CHECK_ERRC(mlstm_cell_step(st, q, k, v, std::nan(""), 0.0), Errc::numeric);
}

TEST_CASE("mlstm scan gradient") {
  std::mt19937_64 rng(5);
  std::vector<Tensor<double>> in{random_tensor<double>({2, 5, 3}, rng), random_tensor<double>({2, 5, 3}, rng),
                                 random_tensor<double>({2, 5, 3}, rng), random_tensor<double>({2, 5}, rng, -2, 2),
                                 random_tensor<double>({2, 5}, rng, -3, -0.05)};
  const auto r = grad_check<double>([&] { return mlstm_scan(in[0], in[1], in[2], in[3], in[4]); }, in, 1e-6);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("mlstm block") {
  Rng rng(6);
  {
    ParamSet<float> ps;
    MLSTMBlock<float> blk(ps, "x", XLSTMDims{}, rng);
    CHECK(ps.count() == oracle::count::mlstm_mixer(256));
    CHECK(ps.count() == 415496);
  }
  ParamSet<float> ps;
  MLSTMBlock<float> blk(ps, "x", XLSTMDims{16, 2, 2, 4, 4}, rng);
  const auto x = random_tensor<float>({14, 16}, rng);
  for (std::size_t t = 0; t < 14; ++t) {
    const auto d = perturbation_response<float>([&](const Tensor<float>& in) { return blk.forward(in); }, x, t, rng);
    for (std::size_t s = 0; s < t; ++s) CHECK(d[s] == 0.0);
  }
  blk.mixer().set_forget_bias(100.0f);
  for (double v : to_vec(blk.forward(random_tensor<float>({60, 16}, rng, -5, 5)))) REQUIRE(std::isfinite(v));
  blk.mixer().set_forget_bias(-100.0f);
  for (double v : to_vec(blk.forward(random_tensor<float>({60, 16}, rng, -5, 5)))) REQUIRE(std::isfinite(v));

  ParamSet<double> pd;
  MLSTMBlock<double> bd(pd, "x", XLSTMDims{8, 2, 2, 4, 4}, rng);
  auto xd = random_tensor<double>({5, 8}, rng).set_requires_grad(true);
  std::vector<Tensor<double>> inputs{xd};
  for (const auto& t : pd.tensors()) inputs.push_back(t);
  CHECK(grad_check<double>([&] { return bd.forward(xd); }, inputs, 1e-5).max_rel_error < 1e-3);
}

TEST_CASE("bidirectional compositions") {
  const XLSTMDims dims{8, 2, 2, 4, 4};
  Rng r1(7), r2(7), rx(8);
  ParamSet<double> pc, pp;
  CBixLSTMBlock<double> cb(pc, "b", dims, r1);
  PBixLSTMBlock<double> pb(pp, "b", dims, r2);
  CHECK(pc.count() == 2 * oracle::count::mlstm_mixer(8, 2, 2, 4, 4));
  CHECK(pc.count() == pp.count());
  const auto x = random_tensor<double>({9, 8}, rx);

  const auto yc = cb.forward(x);
  const auto stage = reverse_time(cb.backward_stage().forward(reverse_time(cb.forward_stage().forward(x))));
  CHECK(oracle::max_abs_diff(to_vec(yc), to_vec(stage)) < 1e-14);

  const auto yp = pb.forward(x);
  const auto f = pb.forward_branch()(x);
  const auto b = reverse_time(pb.backward_branch()(reverse_time(x)));
  for (std::size_t i = 0; i < yp.numel(); ++i)
    CHECK(yp.values()[i] == doctest::Approx(x.values()[i] + f.values()[i] + b.values()[i]).epsilon(1e-12));

  // Identical parameters, distinct dataflow.
  for (std::size_t i = 0; i < pc.items().size(); ++i) REQUIRE(pc.items()[i].second.values() == pp.items()[i].second.values());
  CHECK(oracle::max_abs_diff(to_vec(yc), to_vec(yp)) > 1e-6);

  for (const Block<double>* blk : {static_cast<const Block<double>*>(&cb), static_cast<const Block<double>*>(&pb)}) {
    const auto d = perturbation_response<double>([&](const Tensor<double>& in) { return blk->forward(in); }, x, 8, rx);
    CHECK(d[0] > 0.0);
  }
}
