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

#include "tfse/bench.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "tfse/synth.hpp"
#include "tfse/train.hpp"

namespace tfse {

ExclusiveLock::ExclusiveLock(const std::string& path) {
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  require(fd_ >= 0, Errc::io, "cannot open lock file " + path + ": " + std::strerror(errno));
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    const int err = errno;
    ::close(fd_);
    fd_ = -1;
    require(err != EWOULDBLOCK, Errc::busy, "another benchmark holds " + path);
    fail(Errc::io, "cannot lock " + path + ": " + std::strerror(err));
  }
}

ExclusiveLock::~ExclusiveLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

std::string default_bench_lock_path() {
  if (const char* p = std::getenv("TFSE_BENCH_LOCK"); p && *p) return p;
  return (std::filesystem::temp_directory_path() / "tfse-bench.lock").string();
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<Waveform> bench_inputs(std::size_t batch, double length_s, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Waveform> out;
  for (std::size_t b = 0; b < batch; ++b) {
    const Waveform s = synth_speech(rng, length_s);
    const Waveform n = synth_noise(rng, length_s);
    out.push_back(mix_at_snr(s, n, 0.0, rng).mixture);
  }
  return out;
}

}  // namespace

template <typename T>
RtfResult measure_rtf(const EnhancementModel<T>& model, double length_s, const BenchSettings& s) {
  require(length_s > 0 && s.batch >= 1 && s.runs >= 1, Errc::config, "invalid bench settings");
  const auto inputs = bench_inputs(s.batch, length_s, s.seed);
  std::vector<Tensor<T>> mags;
  if (!s.include_stft)
    for (const auto& w : inputs) mags.push_back(magnitude_tensor<T>(stft(w)));
  NoGradGuard guard;
  auto run_once = [&]() {
    if (s.include_stft) {
      for (const auto& w : inputs) model.enhance(w);
    } else {
      for (const auto& m : mags) model.forward(m);
    }
  };
  for (std::size_t i = 0; i < s.warmup; ++i) run_once();
  std::vector<double> rtf;
  for (std::size_t r = 0; r < s.runs; ++r) {
    const auto t0 = Clock::now();
    run_once();
    rtf.push_back(rtf_value(seconds_since(t0), s.batch, length_s));
  }
  RtfResult res;
  res.length_s = length_s;
  res.runs = s.runs;
  double mean = 0, var = 0;
  for (double v : rtf) mean += v;
  mean /= double(rtf.size());
  for (double v : rtf) var += (v - mean) * (v - mean);
  res.rtf = mean;
  res.cv = rtf.size() > 1 ? std::sqrt(var / double(rtf.size() - 1)) / mean : 0.0;
  return res;
}

template <typename T>
double measure_train_step(EnhancementModel<T>& model, const TrainStepSettings& s) {
  require(s.steps >= 1 && s.batch >= 1 && s.clip_seconds > 0, Errc::config,
          "invalid train-step bench settings");
  RunConfig rc;
  rc.model = model.config();
  rc.train.batch_size = s.batch;
  rc.train.clip_seconds = s.clip_seconds;
  rc.train.synth_seconds = s.clip_seconds;
  rc.train.synth_speech = 4;
  rc.train.synth_noise = 4;
  const Corpus corpus = synth_corpus(4, 4, s.clip_seconds, s.seed);
  Rng rng(s.seed);
  AdamState adam = AdamState::zeros(model.params());
  // A small pool of pre-built batches reused cyclically keeps memory bounded.
  std::vector<std::vector<TrainExample>> pool;
  if (s.exclude_data)
    for (std::size_t i = 0; i < std::min<std::size_t>(2, s.steps); ++i)
      pool.push_back(sample_batch(rng, corpus, rc.train));
  std::size_t step = 0;
  auto one = [&]() {
    ++step;
    if (s.exclude_data) {
      train_step(model, adam, pool[step % pool.size()], rc, step);
    } else {
      const auto b = sample_batch(rng, corpus, rc.train);
      train_step(model, adam, b, rc, step);
    }
  };
  for (std::size_t i = 0; i < s.warmup; ++i) one();
  const auto t0 = Clock::now();
  for (std::size_t i = 0; i < s.steps; ++i) one();
  return seconds_since(t0) / static_cast<double>(s.steps);
}

std::string BenchReport::to_csv() const {
  std::ostringstream ss;
  ss.precision(6);
  ss << "model,params,length_s,rtf,rtf_cv,runs,sec_per_step\n";
  for (const auto& r : rtf)
    ss << model << "," << params << "," << r.length_s << "," << r.rtf << "," << r.cv << ","
       << r.runs << "," << sec_per_step << "\n";
  return ss.str();
}

BenchReport run_bench(const RunConfig& cfg, const std::string& checkpoint_dir, bool with_train_step,
                      const std::string& lock_path) {
  ExclusiveLock lock(lock_path);
  std::unique_ptr<EnhancementModel<float>> model =
      checkpoint_dir.empty() ? std::make_unique<EnhancementModel<float>>(cfg.model, cfg.seed)
                             : EnhancementModel<float>::load(checkpoint_dir);
  BenchReport rep;
  rep.model = model->config().name();
  rep.params = model->count_params();
  BenchSettings bs{cfg.bench.batch, cfg.bench.runs, cfg.bench.warmup, cfg.bench.include_stft,
                   cfg.seed};
  for (double len : cfg.bench.lengths_s) rep.rtf.push_back(measure_rtf(*model, len, bs));
  if (with_train_step) {
    TrainStepSettings ts{cfg.bench.train_steps, cfg.bench.train_warmup, cfg.bench.batch,
                         cfg.bench.train_clip_seconds, true, cfg.seed};
    rep.sec_per_step = measure_train_step(*model, ts);
  }
  return rep;
}

double rtf_growth(const BenchReport& r) {
  require(r.rtf.size() >= 2, Errc::contract, "rtf_growth needs at least two lengths");
  const RtfResult* lo = &r.rtf.front();
  const RtfResult* hi = &r.rtf.front();
  for (const auto& x : r.rtf) {
    if (x.length_s < lo->length_s) lo = &x;
    if (x.length_s > hi->length_s) hi = &x;
  }
  return hi->rtf / lo->rtf;
}

template RtfResult measure_rtf(const EnhancementModel<float>&, double, const BenchSettings&);
template RtfResult measure_rtf(const EnhancementModel<double>&, double, const BenchSettings&);
template double measure_train_step(EnhancementModel<float>&, const TrainStepSettings&);
template double measure_train_step(EnhancementModel<double>&, const TrainStepSettings&);

}  // namespace tfse
