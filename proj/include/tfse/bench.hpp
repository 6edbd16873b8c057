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

// Throughput harness: real-time factor of inference and seconds per
// training step, with an exclusive lock so timings never overlap.

#ifndef TFSE_BENCH_HPP_
#define TFSE_BENCH_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "tfse/config.hpp"
#include "tfse/model.hpp"

namespace tfse {

// Advisory flock(2) lock; a second holder gets a busy error.
class ExclusiveLock {
 public:
  explicit ExclusiveLock(const std::string& path);
  ~ExclusiveLock();
  ExclusiveLock(const ExclusiveLock&) = delete;
  ExclusiveLock& operator=(const ExclusiveLock&) = delete;

 private:
  int fd_ = -1;
};

// $TFSE_BENCH_LOCK or <tmp>/tfse-bench.lock
std::string default_bench_lock_path();

// Processing time over the audio duration it covered.
inline double rtf_value(double elapsed_s, std::size_t batch, double length_s) {
  return elapsed_s / (static_cast<double>(batch) * length_s);
}

struct RtfResult {
  double length_s = 0;
  double rtf = 0;   // mean over runs of time / (batch * length_s)
  double cv = 0;    // coefficient of variation across runs
  std::size_t runs = 0;
};

struct BenchSettings {
  std::size_t batch = 4;
  std::size_t runs = 20;
  std::size_t warmup = 3;
  bool include_stft = false;
  std::uint64_t seed = 1;
};

template <typename T>
RtfResult measure_rtf(const EnhancementModel<T>& model, double length_s, const BenchSettings& s);

struct TrainStepSettings {
  std::size_t steps = 50;
  std::size_t warmup = 3;
  std::size_t batch = 4;
  double clip_seconds = 4.0;
  bool exclude_data = true;  // pre-generate batches outside the timed region
  std::uint64_t seed = 1;
};

template <typename T>
double measure_train_step(EnhancementModel<T>& model, const TrainStepSettings& s);

struct BenchReport {
  std::string model;
  std::size_t params = 0;
  double sec_per_step = 0;
  std::vector<RtfResult> rtf;

  std::string to_csv() const;
};

// Runs both measurements under the exclusive lock.
BenchReport run_bench(const RunConfig& cfg, const std::string& checkpoint_dir, bool with_train_step,
                      const std::string& lock_path);

// RTF at the longest measured length over RTF at the shortest.
double rtf_growth(const BenchReport& r);

}  // namespace tfse

#endif  // TFSE_BENCH_HPP_
