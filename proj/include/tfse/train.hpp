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

// Dynamic-mixing data pipeline, mask objective, warm-up schedule, value
// clipping, Adam and the checkpointed training loop.

#ifndef TFSE_TRAIN_HPP_
#define TFSE_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tfse/config.hpp"
#include "tfse/dsp.hpp"
#include "tfse/model.hpp"
#include "tfse/synth.hpp"

namespace tfse {

struct TrainExample {
  Spectrogram clean, noisy;
  Mask target;  // clamped PSM
  int snr_db = 0;
  double measured_snr_db = 0;
  std::size_t speech_index = 0, noise_index = 0, noise_offset = 0;
};

// Synthetic corpus or a manifest, according to cfg.corpus.
Corpus load_training_corpus(const TrainConfig& cfg, std::uint64_t seed);

// Per clip: random speech clip and crop, random noise recording and
// segment, SNR uniform over the integers in [snr_min, snr_max]. Speech is
// truncated to the noise length when the noise is shorter.
std::vector<TrainExample> sample_batch(Rng& rng, const Corpus& corpus, const TrainConfig& cfg);

// mean((pred - target)^2) over all T-F bins.
template <typename T>
Tensor<T> psm_mse_loss(const Tensor<T>& pred, const Tensor<T>& target);

// mean((pred |X| - target |X|)^2): error on the masked magnitude.
template <typename T>
Tensor<T> spectrum_mse_loss(const Tensor<T>& pred, const Tensor<T>& target,
                            const Tensor<T>& noisy_mag);

// min(step^-0.5, step * step_w^-1.5) * d_model^-0.5
double lr_at(std::size_t step_n, std::size_t step_w, std::size_t d_model);

// Elementwise clamp to [lo, hi]; returns the largest |g| before clipping.
template <typename T>
double clip_gradients(const ParamSet<T>& params, double lo = -1.0, double hi = 1.0);

struct AdamState {
  double beta1 = 0.9, beta2 = 0.98, eps = 1e-9;
  std::size_t t = 0;
  std::vector<std::vector<double>> m, v;

  template <typename T>
  static AdamState zeros(const ParamSet<T>& params);
};

template <typename T>
void adam_step(const ParamSet<T>& params, AdamState& state, double lr);

struct LossRecord {
  std::size_t step = 0;
  double lr = 0, loss = 0, grad_max = 0;
};

struct TrainOptions {
  bool resume = false;
  std::size_t max_steps = 0;  // 0 => epochs * steps_per_epoch
  bool write_outputs = true;
  std::function<void(const LossRecord&)> on_step;
};

struct TrainResult {
  std::vector<LossRecord> log;
  std::size_t start_step = 0;
};

// Layout of out_dir: config.txt (resolved), loss.csv, checkpoint/ with
// model.cfg, params.tfa, adam.tfa and state.txt (step + data RNG state).
// Checkpoints are written at every epoch boundary and at the end.
template <typename T>
TrainResult train(EnhancementModel<T>& model, const RunConfig& cfg, const std::string& out_dir,
                  const TrainOptions& opts = {});

// One optimizer step on a prepared batch; returns the batch loss.
template <typename T>
double train_step(EnhancementModel<T>& model, AdamState& adam, const std::vector<TrainExample>& batch,
                  const RunConfig& cfg, std::size_t step_n, double* grad_max = nullptr);

// Mean of the first / last `window` losses.
double smoothed(const std::vector<LossRecord>& log, std::size_t window, bool tail);

}  // namespace tfse

#endif  // TFSE_TRAIN_HPP_
