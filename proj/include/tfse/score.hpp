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

// Per-SNR evaluation tables: ESTOI and SNR before and after enhancement,
// with an optional external scorer for metrics not implemented here.

#ifndef TFSE_SCORE_HPP_
#define TFSE_SCORE_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tfse/dsp.hpp"
#include "tfse/model.hpp"
#include "tfse/synth.hpp"

namespace tfse {

struct ScoreColumn {
  double snr_db = 0;
  std::size_t count = 0;
  double noisy_estoi = 0, enhanced_estoi = 0;
  double noisy_snr_db = 0, enhanced_snr_db = 0;
  double noisy_external = 0, enhanced_external = 0;
};

struct ScoreTable {
  std::vector<ScoreColumn> columns;  // ascending SNR
  bool has_external = false;

  // Metric rows, one column per input SNR.
  std::string to_csv() const;
  std::string to_text() const;
};

// (noisy, clean) -> enhanced waveform of the same length.
using EnhanceFn = std::function<Waveform(const Waveform& noisy, const Waveform& clean)>;

// Mixes each item at its SNR (noise segment drawn from a generator seeded
// with `seed`), enhances, and averages the metrics per SNR.
ScoreTable score_items(const std::vector<EvalItem>& items, const EnhanceFn& enhance,
                       std::uint64_t seed, const std::string& scorer = "");

template <typename T>
ScoreTable score_model(const EnhancementModel<T>& model, const std::vector<EvalItem>& items,
                       std::uint64_t seed, const std::string& scorer = "");

// Clamped oracle PSM applied to the noisy spectrum.
ScoreTable score_oracle(const std::vector<EvalItem>& items, std::uint64_t seed);

// Runs `<command> <reference wav> <degraded wav>` and parses the number it prints.
double run_external_scorer(const std::string& command, const std::string& ref_wav,
                           const std::string& deg_wav);

}  // namespace tfse

#endif  // TFSE_SCORE_HPP_
