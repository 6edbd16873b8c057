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

#include "tfse/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "tfse/ops.hpp"

namespace tfse {

namespace {

constexpr std::uint64_t kDataStream = 0x5eedda7aULL;

Waveform crop(const Waveform& w, std::size_t offset, std::size_t len) {
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                     w.samples.begin() + static_cast<std::ptrdiff_t>(offset + len));
  return out;
}

template <typename T>
Tensor<T> mask_tensor(const Mask& m) {
  return Tensor<T>(Shape{m.frames, kBins}, std::vector<T>(m.values.begin(), m.values.end()));
}

std::string rng_state(const Rng& rng) {
  std::ostringstream ss;
  ss << rng;
  return ss.str();
}

}  // namespace

Corpus load_training_corpus(const TrainConfig& cfg, std::uint64_t seed) {
  if (cfg.corpus == "synthetic")
    return synth_corpus(cfg.synth_speech, cfg.synth_noise, cfg.synth_seconds, seed);
  require(!cfg.corpus.empty(), Errc::data, "no training corpus configured");
  return load_corpus_manifest(cfg.corpus);
}

std::vector<TrainExample> sample_batch(Rng& rng, const Corpus& corpus, const TrainConfig& cfg) {
  require(!corpus.speech.empty(), Errc::data, "empty speech corpus");
  require(!corpus.noise.empty(), Errc::data, "empty noise corpus");
  require(cfg.snr_min <= cfg.snr_max, Errc::config, "snr_min > snr_max");
  const std::size_t clip = std::max<std::size_t>(1, static_cast<std::size_t>(cfg.clip_seconds * kSampleRate));
  std::vector<TrainExample> batch;
  batch.reserve(cfg.batch_size);
  for (std::size_t b = 0; b < cfg.batch_size; ++b) {
    TrainExample ex;
    ex.speech_index = std::uniform_int_distribution<std::size_t>(0, corpus.speech.size() - 1)(rng);
    ex.noise_index = std::uniform_int_distribution<std::size_t>(0, corpus.noise.size() - 1)(rng);
    ex.snr_db = std::uniform_int_distribution<int>(cfg.snr_min, cfg.snr_max)(rng);
    const Waveform& sp = corpus.speech[ex.speech_index];
    const Waveform& no = corpus.noise[ex.noise_index];
    require(sp.size() > 0 && no.size() > 0, Errc::data, "corpus contains an empty recording");
    const std::size_t len = std::min({clip, sp.size(), no.size()});
    const std::size_t off =
        std::uniform_int_distribution<std::size_t>(0, sp.size() - len)(rng);
    const Waveform speech = crop(sp, off, len);
    const Mixture mix = mix_at_snr(speech, no, static_cast<double>(ex.snr_db), rng);
    ex.noise_offset = mix.noise_offset;
    ex.measured_snr_db =
        10.0 * std::log10(mean_power(speech.samples) / mean_power(mix.scaled_noise.samples));
    ex.clean = stft(speech);
    ex.noisy = stft(mix.mixture);
    ex.target = psm(ex.clean, ex.noisy, true);
    batch.push_back(std::move(ex));
  }
  return batch;
}

template <typename T>
Tensor<T> psm_mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require(pred.shape() == target.shape(), Errc::dimension,
          "loss: pred " + shape_str(pred.shape()) + " vs target " + shape_str(target.shape()));
  return mse_loss(pred, target);
}

template <typename T>
Tensor<T> spectrum_mse_loss(const Tensor<T>& pred, const Tensor<T>& target,
                            const Tensor<T>& noisy_mag) {
  require(pred.shape() == noisy_mag.shape(), Errc::dimension, "loss: magnitude shape mismatch");
  return psm_mse_loss(mul(pred, noisy_mag), mul(target, noisy_mag));
}

double lr_at(std::size_t step_n, std::size_t step_w, std::size_t d_model) {
  require(step_n >= 1 && step_w >= 1 && d_model >= 1, Errc::contract,
          "lr_at needs step_n, step_w, d_model >= 1");
  const double s = static_cast<double>(step_n), w = static_cast<double>(step_w);
  return std::min(std::pow(s, -0.5), s * std::pow(w, -1.5)) / std::sqrt(static_cast<double>(d_model));
}

template <typename T>
double clip_gradients(const ParamSet<T>& params, double lo, double hi) {
  double peak = 0;
  for (const auto& [_, p] : params.items()) {
    if (!p.has_grad()) continue;
    for (T& g : p.grad()) {
      peak = std::max(peak, static_cast<double>(std::abs(g)));
      g = std::clamp(g, static_cast<T>(lo), static_cast<T>(hi));
    }
  }
  return peak;
}

template <typename T>
AdamState AdamState::zeros(const ParamSet<T>& params) {
  AdamState s;
  for (const auto& [_, p] : params.items()) {
    s.m.emplace_back(p.numel(), 0.0);
    s.v.emplace_back(p.numel(), 0.0);
  }
  return s;
}

template <typename T>
void adam_step(const ParamSet<T>& params, AdamState& st, double lr) {
  require(st.m.size() == params.size() && st.v.size() == params.size(), Errc::contract,
          "Adam state does not match the parameter set");
  ++st.t;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  std::size_t i = 0;
  for (const auto& [_, p] : params.items()) {
    auto& m = st.m[i];
    auto& v = st.v[i];
    ++i;
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto w = p.data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j];
      m[j] = st.beta1 * m[j] + (1 - st.beta1) * gj;
      v[j] = st.beta2 * v[j] + (1 - st.beta2) * gj * gj;
      const double step = lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + st.eps);
      w[j] = static_cast<T>(static_cast<double>(w[j]) - step);
    }
  }
}

template <typename T>
double train_step(EnhancementModel<T>& model, AdamState& adam, const std::vector<TrainExample>& batch,
                  const RunConfig& cfg, std::size_t step_n, double* grad_max) {
  require(!batch.empty(), Errc::data, "empty batch");
  auto& params = model.params();
  params.zero_grad();
  const T inv = T(1) / static_cast<T>(batch.size());
  double total = 0;
  for (const auto& ex : batch) {
    auto mag = magnitude_tensor<T>(ex.noisy);
    auto pred = model.forward(mag);
    auto target = mask_tensor<T>(ex.target);
    auto loss = cfg.train.loss == LossKind::mask ? psm_mse_loss(pred, target)
                                                 : spectrum_mse_loss(pred, target, mag);
    total += static_cast<double>(loss.item()) * inv;
    scale(loss, inv).backward();
  }
  const double lr = cfg.train.lr_scale * lr_at(step_n, cfg.train.step_w, cfg.model.d_model);
  double gmax = 0, gnorm = 0;
  std::size_t bad = 0;
  for (const auto& [_, p] : params.items()) {
    if (!p.has_grad()) continue;
    for (T g : p.grad()) {
      if (!std::isfinite(g)) ++bad;
      else gmax = std::max(gmax, static_cast<double>(std::abs(g))), gnorm += double(g) * double(g);
    }
  }
  if (!std::isfinite(total) || bad) {
    std::ostringstream ss;
    ss << "training diverged at step " << step_n << ": loss=" << total << " lr=" << lr
       << " grad_max_abs=" << gmax << " grad_l2=" << std::sqrt(gnorm)
       << " non_finite_grads=" << bad;
    fail(Errc::numeric, ss.str());
  }
  const double peak = clip_gradients(params, -cfg.train.grad_clip, cfg.train.grad_clip);
  if (grad_max) *grad_max = peak;
  adam_step(params, adam, lr);
  return total;
}

double smoothed(const std::vector<LossRecord>& log, std::size_t window, bool tail) {
  require(!log.empty(), Errc::contract, "empty loss log");
  window = std::min(window, log.size());
  double s = 0;
  for (std::size_t i = 0; i < window; ++i) s += log[tail ? log.size() - 1 - i : i].loss;
  return s / static_cast<double>(window);
}

namespace {

template <typename T>
void save_checkpoint(const std::string& dir, const EnhancementModel<T>& model, const AdamState& adam,
                     std::size_t step, const Rng& rng) {
  model.save(dir);
  TensorArchive ar;
  std::size_t i = 0;
  for (const auto& [name, p] : model.params().items()) {
    ar.put("m." + name, p.shape(), adam.m[i], Dtype::f64);
    ar.put("v." + name, p.shape(), adam.v[i], Dtype::f64);
    ++i;
  }
  ar.save(dir + "/adam.tfa");
  std::ostringstream st;
  st << "step " << step << "\nadam_t " << adam.t << "\nrng " << rng_state(rng) << "\n";
  write_text_file(dir + "/state.txt", st.str());
}

template <typename T>
std::size_t load_checkpoint(const std::string& dir, EnhancementModel<T>& model, AdamState& adam, Rng& rng) {
  require(std::filesystem::is_directory(dir), Errc::io, "no checkpoint to resume from in " + dir);
  model.load_archive(TensorArchive::load(dir + "/params.tfa"));
  const auto ar = TensorArchive::load(dir + "/adam.tfa");
  std::size_t i = 0;
  for (const auto& [name, p] : model.params().items()) {
    adam.m[i] = ar.at("m." + name).values;
    adam.v[i] = ar.at("v." + name).values;
    require(adam.m[i].size() == p.numel() && adam.v[i].size() == p.numel(), Errc::format,
            "optimizer state shape mismatch for " + name);
    ++i;
  }
  std::istringstream st(read_text_file(dir + "/state.txt"));
  std::string k1, k2, k3;
  std::size_t step = 0;
  st >> k1 >> step >> k2 >> adam.t >> k3;
  require(k1 == "step" && k2 == "adam_t" && k3 == "rng", Errc::format, "malformed state.txt in " + dir);
  st >> rng;
  require(!st.fail(), Errc::format, "malformed RNG state in " + dir);
  return step;
}

}  // namespace

template <typename T>
TrainResult train(EnhancementModel<T>& model, const RunConfig& cfg, const std::string& out_dir,
                  const TrainOptions& opts) {
  namespace fs = std::filesystem;
  require(model.config().to_text() == cfg.model.to_text(), Errc::contract,
          "model does not match the run configuration");
  const Corpus corpus = load_training_corpus(cfg.train, cfg.seed);
  Rng data_rng(cfg.seed ^ kDataStream);
  AdamState adam = AdamState::zeros(model.params());
  const std::size_t total = opts.max_steps ? opts.max_steps : cfg.train.epochs * cfg.train.steps_per_epoch;
  const std::string ckpt = out_dir + "/checkpoint";
  TrainResult result;
  std::size_t step = 0;
  if (opts.resume) step = load_checkpoint(ckpt, model, adam, data_rng);
  result.start_step = step;

  std::ofstream csv;
  if (opts.write_outputs) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    require(!ec, Errc::io, "cannot create output directory " + out_dir);
    write_text_file(out_dir + "/config.txt", cfg.to_text());
    std::string kept = "step,lr,loss\n";
    if (opts.resume && fs::exists(out_dir + "/loss.csv")) {
      std::istringstream old(read_text_file(out_dir + "/loss.csv"));
      std::string line;
      std::getline(old, line);
      while (std::getline(old, line)) {
        if (line.empty()) continue;
        if (std::stoull(line.substr(0, line.find(','))) <= step) kept += line + "\n";
      }
    }
    write_text_file(out_dir + "/loss.csv", kept);
    csv.open(out_dir + "/loss.csv", std::ios::app);
    require(static_cast<bool>(csv), Errc::io, "cannot write " + out_dir + "/loss.csv");
    csv.precision(9);
  }

  const std::size_t per_epoch = std::max<std::size_t>(1, cfg.train.steps_per_epoch);
  while (step < total) {
    const auto batch = sample_batch(data_rng, corpus, cfg.train);
    ++step;
    LossRecord rec;
    rec.step = step;
    rec.lr = cfg.train.lr_scale * lr_at(step, cfg.train.step_w, cfg.model.d_model);
    rec.loss = train_step(model, adam, batch, cfg, step, &rec.grad_max);
    result.log.push_back(rec);
    if (csv.is_open()) csv << rec.step << "," << rec.lr << "," << rec.loss << "\n" << std::flush;
    if (opts.on_step) opts.on_step(rec);
    if (opts.write_outputs && (step % per_epoch == 0 || step == total))
      save_checkpoint(ckpt, model, adam, step, data_rng);
  }
  return result;
}

#define TFSE_INSTANTIATE_TRAIN(T)                                                              \
  template Tensor<T> psm_mse_loss(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> spectrum_mse_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);  \
  template double clip_gradients(const ParamSet<T>&, double, double);                          \
  template AdamState AdamState::zeros(const ParamSet<T>&);                                     \
  template void adam_step(const ParamSet<T>&, AdamState&, double);                             \
  template double train_step(EnhancementModel<T>&, AdamState&, const std::vector<TrainExample>&, \
                             const RunConfig&, std::size_t, double*);                          \
  template TrainResult train(EnhancementModel<T>&, const RunConfig&, const std::string&,       \
                             const TrainOptions&);

TFSE_INSTANTIATE_TRAIN(float)
TFSE_INSTANTIATE_TRAIN(double)

}  // namespace tfse
