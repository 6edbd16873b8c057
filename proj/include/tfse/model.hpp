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

// Full enhancement network: frame-wise LN -> ReLU -> 1x1 conv to d_model,
// optional sinusoidal PE, N backbone blocks, 1x1 conv back to K bins and a
// sigmoid mask.

#ifndef TFSE_MODEL_HPP_
#define TFSE_MODEL_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "tfse/archive.hpp"
#include "tfse/attention.hpp"
#include "tfse/dsp.hpp"
#include "tfse/module.hpp"
#include "tfse/posenc.hpp"
#include "tfse/ssm.hpp"
#include "tfse/xlstm.hpp"

namespace tfse {

enum class Backbone { transformer, conformer, mamba, bimamba, xlstm, c_bixlstm, p_bixlstm };

// Accepts config spellings (transformer, c-bixlstm, ...) and display names
// (Transformer, C-BixLSTM, ...), case-insensitively.
Backbone parse_backbone(const std::string& s);
const char* backbone_key(Backbone b);      // transformer, c-bixlstm, ...
const char* backbone_display(Backbone b);  // Transformer, C-BixLSTM, ...
bool is_attention(Backbone b);
// Causality fixed by the backbone kind; attention backbones support both.
bool backbone_causal_default(Backbone b);

struct ModelConfig {
  Backbone backbone = Backbone::transformer;
  std::size_t blocks = 4;
  bool causal = false;
  PEKind pe = PEKind::none;
  std::size_t d_model = 256;
  std::size_t d_ff = 1024;
  std::size_t heads = 8;
  std::size_t conv_kernel = 31;
  std::size_t d_state = 16;
  std::size_t expand = 2;
  std::size_t d_conv = 4;
  std::size_t dt_rank = 0;  // 0 => ceil(d_model / 16)
  std::size_t xlstm_heads = 4;
  std::size_t proj_factor = 2;
  ScanMode scan = ScanMode::sequential;
  std::size_t input_bins = kBins;

  // "<Backbone>-<N>", e.g. "Mamba-5".
  std::string name() const;
  void validate() const;

  // key=value lines, one per field.
  std::vector<std::pair<std::string, std::string>> to_keys() const;
  // Returns false when the key is not a model key; throws config errors for
  // bad values.
  bool set_key(const std::string& key, const std::string& value);

  static ModelConfig from_name(const std::string& name);
  static ModelConfig from_text(const std::string& text);
  std::string to_text() const;
};

template <typename T>
class EnhancementModel {
 public:
  EnhancementModel(const ModelConfig& cfg, std::uint64_t seed);
  EnhancementModel(const EnhancementModel&) = delete;
  EnhancementModel& operator=(const EnhancementModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }
  std::size_t count_params() const { return params_.count(); }
  std::size_t num_blocks() const { return blocks_.size(); }

  // |X| [L, K] -> mask [L, K] in (0, 1).
  Tensor<T> forward(const Tensor<T>& magnitude) const;
  // Feature representation after the block stack, [L, d_model].
  Tensor<T> embed(const Tensor<T>& magnitude) const;

  Mask predict_mask(const Spectrogram& noisy) const;
  // STFT -> mask -> masked noisy spectrum -> ISTFT at the input length.
  Waveform enhance(const Waveform& noisy) const;

  TensorArchive to_archive() const;
  // Copies values by name; names and shapes must match exactly.
  void load_archive(const TensorArchive& ar);

  // Checkpoint directory: model.cfg + params.tfa.
  void save(const std::string& dir) const;
  static std::unique_ptr<EnhancementModel> load(const std::string& dir);

 private:
  ModelConfig cfg_;
  ParamSet<T> params_;
  Tensor<T> in_ln_g_, in_ln_b_, in_w_, in_b_, out_w_, out_b_;
  std::vector<std::unique_ptr<Block<T>>> blocks_;
};

// Moves values that round to exactly 0 or 1 into the open unit interval;
// the gradient passes through unchanged.
template <typename T>
Tensor<T> open_unit_interval(const Tensor<T>& x);

template <typename T>
Tensor<T> magnitude_tensor(const Spectrogram& spec);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace tfse

#endif  // TFSE_MODEL_HPP_
