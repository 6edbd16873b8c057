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

/* C interface to the tfse speech-enhancement library. All functions return
 * a tfse_status; on failure tfse_last_error() describes the cause for the
 * calling thread. Strings returned through char** are owned by the caller
 * and released with tfse_string_free(). */

#ifndef TFSE_TFSE_H_
#define TFSE_TFSE_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(TFSE_BUILDING_LIBRARY)
#define TFSE_API __attribute__((visibility("default")))
#else
#define TFSE_API
#endif

typedef enum tfse_status {
  TFSE_OK = 0,
  TFSE_ERR_DIMENSION = 1,
  TFSE_ERR_CONFIG = 2,
  TFSE_ERR_CONTRACT = 3,
  TFSE_ERR_FORMAT = 4,
  TFSE_ERR_RATE = 5,
  TFSE_ERR_IO = 6,
  TFSE_ERR_NUMERIC = 7,
  TFSE_ERR_DATA = 8,
  TFSE_ERR_LENGTH = 9,
  TFSE_ERR_DEGENERATE = 10,
  TFSE_ERR_BUSY = 11,
  TFSE_ERR_INVALID_ARGUMENT = 12,
  TFSE_ERR_INTERNAL = 13
} tfse_status;

typedef struct tfse_model tfse_model;

TFSE_API const char* tfse_version(void);
TFSE_API const char* tfse_status_name(tfse_status status);
/* Message of the most recent failure on this thread ("" if none). */
TFSE_API const char* tfse_last_error(void);
TFSE_API void tfse_string_free(char* s);

/* Model lifecycle. Configs are key=value run configuration files; only the
 * model keys and the seed matter here. */
TFSE_API tfse_status tfse_model_from_config(const char* config_path, tfse_model** out);
TFSE_API tfse_status tfse_model_from_config_text(const char* text, tfse_model** out);
TFSE_API tfse_status tfse_model_load(const char* checkpoint_dir, tfse_model** out);
TFSE_API tfse_status tfse_model_save(const tfse_model* model, const char* checkpoint_dir);
TFSE_API void tfse_model_free(tfse_model* model);

TFSE_API tfse_status tfse_model_param_count(const tfse_model* model, uint64_t* out);
/* "<Backbone>-<N>", written with a terminating NUL (truncated to buf_len). */
TFSE_API tfse_status tfse_model_name(const tfse_model* model, char* buf, size_t buf_len);
TFSE_API tfse_status tfse_model_config_text(const tfse_model* model, char** out);

/* Enhances n mono samples at sample_rate (must be 16000) into out[n]. */
TFSE_API tfse_status tfse_enhance(const tfse_model* model, const float* samples, size_t n,
                                  int sample_rate, float* out);
TFSE_API tfse_status tfse_enhance_file(const tfse_model* model, const char* in_wav,
                                       const char* out_wav);

/* Training. overrides: optional key=value text applied on top of the file. */
typedef void (*tfse_train_callback)(uint64_t step, double lr, double loss, void* user);
TFSE_API tfse_status tfse_train(const char* config_path, const char* overrides, const char* out_dir,
                                int resume, tfse_train_callback callback, void* user);

/* Benchmark. Either config_path or checkpoint_dir (or both: the checkpoint
 * supplies the model, the config the bench settings). */
typedef struct tfse_bench_result {
  char model[64];
  uint64_t params;
  double rtf_growth;   /* RTF(longest) / RTF(shortest); 0 with one length */
  double sec_per_step; /* 0 unless with_train_step */
} tfse_bench_result;

TFSE_API tfse_status tfse_bench(const char* config_path, const char* checkpoint_dir,
                                const char* overrides, int with_train_step, const char* lock_path,
                                tfse_bench_result* result, char** csv_out);

/* Self-verification. *all_passed receives 1 or 0. */
typedef void (*tfse_check_callback)(const char* name, int passed, double value, double threshold,
                                    const char* detail, void* user);
TFSE_API tfse_status tfse_verify(int inject_fault, tfse_check_callback callback, void* user,
                                 int* all_passed);

/* Scoring against an eval manifest; oracle != 0 scores the clamped oracle
 * mask instead of the checkpoint. scorer may be NULL. */
TFSE_API tfse_status tfse_score(const char* checkpoint_dir, const char* eval_manifest, uint64_t seed,
                                const char* scorer, int oracle, char** csv_out, char** table_out);

TFSE_API tfse_status tfse_synth_corpus(const char* dir, size_t n_speech, size_t n_noise,
                                       size_t n_eval, double seconds, uint64_t seed);

TFSE_API tfse_status tfse_estoi(const float* clean, const float* processed, size_t n,
                                double* out);

#ifdef __cplusplus
}
#endif

#endif /* TFSE_TFSE_H_ */
