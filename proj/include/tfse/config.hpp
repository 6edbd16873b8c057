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

// Flat key=value run configuration. '#' starts a comment; blank lines are
// ignored; unknown keys are rejected.

#ifndef TFSE_CONFIG_HPP_
#define TFSE_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "tfse/model.hpp"

namespace tfse {

struct KeyValue {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

std::vector<KeyValue> parse_key_values(const std::string& text);

// Drops lines of `base` whose key appears in `overrides`, then appends
// `overrides`.
std::string apply_overrides(const std::string& base, const std::string& overrides);

enum class LossKind { mask, spectrum };

struct TrainConfig {
  std::string corpus = "synthetic";  // or a manifest of "speech <wav>" / "noise <wav>" lines
  std::size_t batch_size = 10;
  std::size_t epochs = 1;
  std::size_t steps_per_epoch = 100;
  std::size_t step_w = 400;
  double lr_scale = 1.0;
  double grad_clip = 1.0;
  int snr_min = -10;
  int snr_max = 20;
  double clip_seconds = 2.0;
  LossKind loss = LossKind::mask;
  // Synthetic corpus size.
  std::size_t synth_speech = 16;
  std::size_t synth_noise = 8;
  double synth_seconds = 4.0;
};

struct BenchConfig {
  std::vector<double> lengths_s{10.0, 20.0, 40.0};
  std::size_t batch = 4;
  std::size_t runs = 20;
  std::size_t warmup = 3;
  bool include_stft = false;
  std::size_t train_steps = 50;
  std::size_t train_warmup = 3;
  double train_clip_seconds = 4.0;
};

struct EvalConfig {
  std::string manifest;  // lines "<clean wav> <noise wav> <snr dB>"
  std::string scorer;    // external command: receives two WAV paths, prints a number
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  BenchConfig bench;
  EvalConfig eval;
  std::uint64_t seed = 42;

  // Relative paths inside the file resolve against `base_dir` when non-empty.
  static RunConfig parse(const std::string& text, const std::string& base_dir = "");
  static RunConfig load(const std::string& path, const std::string& overrides = "");
  // Fully resolved configuration, one key per line.
  std::string to_text() const;
  void validate() const;
};

const char* loss_name(LossKind k);

}  // namespace tfse

#endif  // TFSE_CONFIG_HPP_
