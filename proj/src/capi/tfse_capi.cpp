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

#include "tfse/tfse.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "tfse/bench.hpp"
#include "tfse/config.hpp"
#include "tfse/estoi.hpp"
#include "tfse/model.hpp"
#include "tfse/score.hpp"
#include "tfse/synth.hpp"
#include "tfse/train.hpp"
#include "tfse/verify.hpp"

struct tfse_model {
  std::unique_ptr<tfse::EnhancementModel<float>> impl;
};

namespace {

thread_local std::string g_last_error;

tfse_status to_status(tfse::Errc c) {
  switch (c) {
    case tfse::Errc::dimension: return TFSE_ERR_DIMENSION;
    case tfse::Errc::config: return TFSE_ERR_CONFIG;
    case tfse::Errc::contract: return TFSE_ERR_CONTRACT;
    case tfse::Errc::format: return TFSE_ERR_FORMAT;
    case tfse::Errc::rate: return TFSE_ERR_RATE;
    case tfse::Errc::io: return TFSE_ERR_IO;
    case tfse::Errc::numeric: return TFSE_ERR_NUMERIC;
    case tfse::Errc::data: return TFSE_ERR_DATA;
    case tfse::Errc::length: return TFSE_ERR_LENGTH;
    case tfse::Errc::degenerate: return TFSE_ERR_DEGENERATE;
    case tfse::Errc::busy: return TFSE_ERR_BUSY;
  }
  return TFSE_ERR_INTERNAL;
}

template <typename F>
tfse_status guard(F&& body) {
  g_last_error.clear();
  try {
    body();
    return TFSE_OK;
  } catch (const tfse::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return TFSE_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TFSE_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return TFSE_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

tfse_status invalid(const char* what) {
  g_last_error = what;
  return TFSE_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* tfse_version(void) { return "1.0.0"; }

const char* tfse_status_name(tfse_status s) {
  switch (s) {
    case TFSE_OK: return "ok";
    case TFSE_ERR_DIMENSION: return "dimension error";
    case TFSE_ERR_CONFIG: return "config error";
    case TFSE_ERR_CONTRACT: return "contract error";
    case TFSE_ERR_FORMAT: return "format error";
    case TFSE_ERR_RATE: return "rate error";
    case TFSE_ERR_IO: return "io error";
    case TFSE_ERR_NUMERIC: return "numeric error";
    case TFSE_ERR_DATA: return "data error";
    case TFSE_ERR_LENGTH: return "length error";
    case TFSE_ERR_DEGENERATE: return "degenerate-input error";
    case TFSE_ERR_BUSY: return "busy";
    case TFSE_ERR_INVALID_ARGUMENT: return "invalid argument";
    case TFSE_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* tfse_last_error(void) { return g_last_error.c_str(); }

void tfse_string_free(char* s) { std::free(s); }

tfse_status tfse_model_from_config(const char* config_path, tfse_model** out) {
  if (!config_path || !out) return invalid("tfse_model_from_config: null argument");
  return guard([&] {
    const auto rc = tfse::RunConfig::load(config_path);
    *out = new tfse_model{std::make_unique<tfse::EnhancementModel<float>>(rc.model, rc.seed)};
  });
}

tfse_status tfse_model_from_config_text(const char* text, tfse_model** out) {
  if (!text || !out) return invalid("tfse_model_from_config_text: null argument");
  return guard([&] {
    const auto rc = tfse::RunConfig::parse(text);
    *out = new tfse_model{std::make_unique<tfse::EnhancementModel<float>>(rc.model, rc.seed)};
  });
}

tfse_status tfse_model_load(const char* checkpoint_dir, tfse_model** out) {
  if (!checkpoint_dir || !out) return invalid("tfse_model_load: null argument");
  return guard([&] { *out = new tfse_model{tfse::EnhancementModel<float>::load(checkpoint_dir)}; });
}

tfse_status tfse_model_save(const tfse_model* model, const char* checkpoint_dir) {
  if (!model || !checkpoint_dir) return invalid("tfse_model_save: null argument");
  return guard([&] { model->impl->save(checkpoint_dir); });
}

void tfse_model_free(tfse_model* model) { delete model; }

tfse_status tfse_model_param_count(const tfse_model* model, uint64_t* out) {
  if (!model || !out) return invalid("tfse_model_param_count: null argument");
  return guard([&] { *out = model->impl->count_params(); });
}

tfse_status tfse_model_name(const tfse_model* model, char* buf, size_t buf_len) {
  if (!model || !buf || buf_len == 0) return invalid("tfse_model_name: null argument");
  return guard([&] {
    const std::string n = model->impl->config().name();
    const std::size_t k = std::min(n.size(), buf_len - 1);
    std::memcpy(buf, n.data(), k);
    buf[k] = '\0';
  });
}

tfse_status tfse_model_config_text(const tfse_model* model, char** out) {
  if (!model || !out) return invalid("tfse_model_config_text: null argument");
  return guard([&] { *out = dup_string(model->impl->config().to_text()); });
}

tfse_status tfse_enhance(const tfse_model* model, const float* samples, size_t n, int sample_rate,
                         float* out) {
  if (!model || !samples || !out) return invalid("tfse_enhance: null argument");
  if (n == 0) return invalid("tfse_enhance: empty input");
  return guard([&] {
    tfse::Waveform w;
    w.sample_rate = sample_rate;
    w.samples.assign(samples, samples + n);
    const auto y = model->impl->enhance(w);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(y.samples[i]);
  });
}

tfse_status tfse_enhance_file(const tfse_model* model, const char* in_wav, const char* out_wav) {
  if (!model || !in_wav || !out_wav) return invalid("tfse_enhance_file: null argument");
  return guard([&] {
    tfse::WavEncoding enc = tfse::WavEncoding::pcm16;
    const auto noisy = tfse::read_wav(in_wav, &enc);
    tfse::write_wav(out_wav, model->impl->enhance(noisy), enc);
  });
}

tfse_status tfse_train(const char* config_path, const char* overrides, const char* out_dir, int resume,
                       tfse_train_callback callback, void* user) {
  if (!config_path || !out_dir) return invalid("tfse_train: null argument");
  return guard([&] {
    const auto rc = tfse::RunConfig::load(config_path, overrides ? overrides : "");
    tfse::EnhancementModel<float> model(rc.model, rc.seed);
    tfse::TrainOptions opts;
    opts.resume = resume != 0;
    if (callback)
      opts.on_step = [&](const tfse::LossRecord& r) { callback(r.step, r.lr, r.loss, user); };
    tfse::train(model, rc, out_dir, opts);
  });
}

tfse_status tfse_bench(const char* config_path, const char* checkpoint_dir, const char* overrides,
                       int with_train_step, const char* lock_path, tfse_bench_result* result,
                       char** csv_out) {
  if (!config_path && !checkpoint_dir) return invalid("tfse_bench: need a config or a checkpoint");
  return guard([&] {
    const std::string ov = overrides ? overrides : "";
    const auto rc = config_path ? tfse::RunConfig::load(config_path, ov)
                                : tfse::RunConfig::parse(ov);
    const auto rep = tfse::run_bench(rc, checkpoint_dir ? checkpoint_dir : "", with_train_step != 0,
                                     lock_path ? lock_path : tfse::default_bench_lock_path());
    if (result) {
      std::memset(result, 0, sizeof(*result));
      std::strncpy(result->model, rep.model.c_str(), sizeof(result->model) - 1);
      result->params = rep.params;
      result->rtf_growth = rep.rtf.size() >= 2 ? tfse::rtf_growth(rep) : 0.0;
      result->sec_per_step = rep.sec_per_step;
    }
    if (csv_out) *csv_out = dup_string(rep.to_csv());
  });
}

tfse_status tfse_verify(int inject_fault, tfse_check_callback callback, void* user, int* all_passed) {
  return guard([&] {
    tfse::VerifyOptions opts;
    opts.inject_fault = inject_fault != 0;
    if (callback)
      opts.on_check = [&](const tfse::VerifyCheck& c) {
        callback(c.name.c_str(), c.passed ? 1 : 0, c.value, c.threshold, c.detail.c_str(), user);
      };
    const auto rep = tfse::run_verify(opts);
    if (all_passed) *all_passed = rep.passed() ? 1 : 0;
  });
}

tfse_status tfse_score(const char* checkpoint_dir, const char* eval_manifest, uint64_t seed,
                       const char* scorer, int oracle, char** csv_out, char** table_out) {
  if (!eval_manifest || (!oracle && !checkpoint_dir)) return invalid("tfse_score: null argument");
  return guard([&] {
    const auto items = tfse::load_eval_manifest(eval_manifest);
    tfse::ScoreTable t;
    if (oracle) {
      t = tfse::score_oracle(items, seed);
    } else {
      const auto model = tfse::EnhancementModel<float>::load(checkpoint_dir);
      t = tfse::score_model(*model, items, seed, scorer ? scorer : "");
    }
    if (csv_out) *csv_out = dup_string(t.to_csv());
    if (table_out) *table_out = dup_string(t.to_text());
  });
}

tfse_status tfse_synth_corpus(const char* dir, size_t n_speech, size_t n_noise, size_t n_eval,
                              double seconds, uint64_t seed) {
  if (!dir) return invalid("tfse_synth_corpus: null argument");
  return guard([&] { tfse::write_synth_corpus(dir, n_speech, n_noise, n_eval, seconds, seed); });
}

tfse_status tfse_estoi(const float* clean, const float* processed, size_t n, double* out) {
  if (!clean || !processed || !out) return invalid("tfse_estoi: null argument");
  return guard([&] {
    tfse::Waveform a, b;
    a.samples.assign(clean, clean + n);
    b.samples.assign(processed, processed + n);
    *out = tfse::estoi(a, b);
  });
}

}  // extern "C"
