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

#include <chrono>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "test_util.hpp"
#include "tfse/grad_check.hpp"
#include "tfse/ops.hpp"
#include "tfse/reference.hpp"
#include "tfse/ssm.hpp"

using namespace tfse;
using testutil::tensor;
using testutil::to_vec;

namespace {

struct ScanCase {
  std::size_t L, D, N;
  oracle::Vec u, delta, A, B, C, skip;
};

ScanCase random_case(std::size_t L, std::size_t D, std::size_t N, std::mt19937_64& rng) {
  ScanCase c{L, D, N, {}, {}, {}, {}, {}, {}};
  c.u = oracle::random_vec(L * D, rng);
  c.delta = oracle::random_vec(L * D, rng, 0.001, 0.5);
  c.A = oracle::random_vec(D * N, rng, -4.0, -0.1);
  c.B = oracle::random_vec(L * N, rng);
  c.C = oracle::random_vec(L * N, rng);
  c.skip = oracle::random_vec(D, rng);
  return c;
}

template <typename T>
Tensor<T> run(const ScanCase& c, ScanMode mode) {
  return selective_scan(tensor<T>({c.L, c.D}, c.u), tensor<T>({c.L, c.D}, c.delta), tensor<T>({c.D, c.N}, c.A),
                        tensor<T>({c.L, c.N}, c.B), tensor<T>({c.L, c.N}, c.C), tensor<T>({c.D}, c.skip), mode);
}

}  // namespace

TEST_CASE("scan trivial cases") {
  std::mt19937_64 rng(1);
  auto c = random_case(9, 3, 4, rng);
  c.u.assign(c.u.size(), 0.0);
  for (ScanMode m : {ScanMode::sequential, ScanMode::parallel})
    for (double v : to_vec(run<double>(c, m))) CHECK(v == 0.0);

  const auto one = random_case(1, 2, 3, rng);
  const auto y = run<double>(one, ScanMode::sequential);
  for (std::size_t d = 0; d < 2; ++d) {
    double expect = one.skip[d] * one.u[d];
    for (std::size_t n = 0; n < 3; ++n) expect += one.C[n] * one.delta[d] * one.B[n] * one.u[d];
    CHECK(y.values()[d] == doctest::Approx(expect).epsilon(1e-14));
  }
  CHECK(run<double>(one, ScanMode::parallel).values() == y.values());
}

TEST_CASE("sequential scan matches the long-double oracle") {
  std::mt19937_64 rng(2);
  const auto c = random_case(64, 5, 8, rng);
  const auto ref = oracle::selective_scan(c.u, c.delta, c.A, c.B, c.C, c.skip, 64, 5, 8);
  CHECK(oracle::rel_diff(to_vec(run<double>(c, ScanMode::sequential)), ref) < 1e-6);
  CHECK(oracle::rel_diff(to_vec(run<float>(c, ScanMode::sequential)), ref) < 1e-5);
}

TEST_CASE("parallel scan equals sequential over 200 random instances") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> len(1, 257), dim(1, 6), st(1, 16);
  double worst32 = 0, worst64 = 0;
  for (int i = 0; i < 200; ++i) {
    const auto c = random_case(len(rng), dim(rng), st(rng), rng);
    worst64 = std::max(worst64, oracle::rel_diff(to_vec(run<double>(c, ScanMode::parallel)),
                                                 to_vec(run<double>(c, ScanMode::sequential))));
    worst32 = std::max(worst32, oracle::rel_diff(to_vec(run<float>(c, ScanMode::parallel)),
                                                 to_vec(run<float>(c, ScanMode::sequential))));
  }
  CHECK(worst64 < 1e-10);
  CHECK(worst32 < 1e-5);
}

TEST_CASE("scan gradients in both modes") {
  std::mt19937_64 rng(4);
  const auto c = random_case(7, 3, 4, rng);
  for (ScanMode mode : {ScanMode::sequential, ScanMode::parallel}) {
    std::vector<Tensor<double>> in{tensor<double>({7, 3}, c.u), tensor<double>({7, 3}, c.delta), tensor<double>({3, 4}, c.A),
                                   tensor<double>({7, 4}, c.B), tensor<double>({7, 4}, c.C), tensor<double>({3}, c.skip)};
    const auto r = grad_check<double>([&] { return selective_scan(in[0], in[1], in[2], in[3], in[4], in[5], mode); }, in, 1e-6);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("scan rejects non-finite parameters and stays bounded") {
  std::mt19937_64 rng(5);
  auto c = random_case(5, 2, 2, rng);
  c.delta[3] = std::nan("");
  CHECK_ERRC(run<double>(c, ScanMode::sequential), Errc::numeric);
  CHECK_ERRC(run<double>(c, ScanMode::parallel), Errc::numeric);

  const auto big = random_case(100000, 1, 2, rng);
  for (ScanMode m : {ScanMode::sequential, ScanMode::parallel})
    for (double v : to_vec(run<float>(big, m))) REQUIRE(std::isfinite(v));
}

TEST_CASE("parallel scan is sub-quadratic") {
  std::mt19937_64 rng(6);
  const auto a = random_case(16384, 2, 4, rng), b = random_case(32768, 2, 4, rng);
  auto best = [](const ScanCase& c) {
    double t = 1e9;
    for (int i = 0; i < 5; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      (void)run<float>(c, ScanMode::parallel);
      t = std::min(t, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return t;
  };
  best(a);
  CHECK(best(b) / best(a) < 3.0);
}

TEST_CASE("mamba block") {
  Rng rng(7);
  {
    ParamSet<float> ps;
    MambaBlock<float> blk(ps, "m", MambaDims{}, rng);
    CHECK(ps.count() == oracle::count::mamba_mixer(256));
    CHECK(ps.count() == 438016);
  }
  ParamSet<float> ps;
  MambaBlock<float> blk(ps, "m", MambaDims{16, 4, 2, 4, 0, ScanMode::sequential}, rng);
  for (std::size_t L : {1u, 50u}) CHECK(blk.forward(random_tensor<float>({L, 16}, rng)).shape() == Shape{L, 16});
  const auto x = random_tensor<float>({15, 16}, rng);
  for (std::size_t t = 0; t < 15; ++t) {
    const auto d = perturbation_response<float>([&](const Tensor<float>& in) { return blk.forward(in); }, x, t, rng);
    for (std::size_t s = 0; s < t; ++s) CHECK(d[s] == 0.0);
  }
  // A = -exp(A_log) starts on the 1..N ramp and D at one.
  const auto a_log = ps.find("m.A_log");
  CHECK(std::exp(a_log.values()[0]) == doctest::Approx(1.0));
  CHECK(std::exp(a_log.values()[3]) == doctest::Approx(4.0));
  for (double v : to_vec(ps.find("m.D"))) CHECK(v == 1.0f);

  ParamSet<double> pd;
  MambaBlock<double> bd(pd, "m", MambaDims{8, 4, 2, 4, 0, ScanMode::parallel}, rng);
  auto xd = random_tensor<double>({6, 8}, rng).set_requires_grad(true);
  std::vector<Tensor<double>> inputs{xd};
  for (const auto& t : pd.tensors()) inputs.push_back(t);
  CHECK(grad_check<double>([&] { return bd.forward(xd); }, inputs, 1e-5).max_rel_error < 1e-3);
}

TEST_CASE("bimamba block") {
  Rng rng(8);
  ParamSet<double> ps;
  const MambaDims dims{8, 4, 2, 4, 0, ScanMode::sequential};
  BiMambaBlock<double> blk(ps, "b", dims, rng);
  CHECK(ps.count() == 2 * oracle::count::mamba_mixer(8, 4));
  const auto x = random_tensor<double>({9, 8}, rng);
  const auto y = blk.forward(x);
  // Composition: x + fwd(x) + rev(bwd(rev(x))), branches evaluated on their own.
  const auto f = blk.forward_branch()(x);
  const auto b = reverse_time(blk.backward_branch()(reverse_time(x)));
  for (std::size_t i = 0; i < y.numel(); ++i)
    CHECK(y.values()[i] == doctest::Approx(x.values()[i] + f.values()[i] + b.values()[i]).epsilon(1e-12));
  const auto d = perturbation_response<double>([&](const Tensor<double>& in) { return blk.forward(in); }, x, 8, rng);
  CHECK(d[0] > 0.0);
  CHECK(parse_scan_mode("parallel") == ScanMode::parallel);
  CHECK_ERRC(parse_scan_mode("fast"), Errc::config);
}
