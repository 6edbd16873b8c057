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

#include "tfse/model.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "tfse/config.hpp"
#include "tfse/ops.hpp"

namespace tfse {

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

struct BackboneInfo {
  Backbone kind;
  const char* key;
  const char* display;
};

constexpr BackboneInfo kBackbones[] = {
    {Backbone::transformer, "transformer", "Transformer"},
    {Backbone::conformer, "conformer", "Conformer"},
    {Backbone::mamba, "mamba", "Mamba"},
    {Backbone::bimamba, "bimamba", "BiMamba"},
    {Backbone::xlstm, "xlstm", "xLSTM"},
    {Backbone::c_bixlstm, "c-bixlstm", "C-BixLSTM"},
    {Backbone::p_bixlstm, "p-bixlstm", "P-BixLSTM"},
};

const BackboneInfo& info(Backbone b) {
  for (const auto& i : kBackbones)
    if (i.kind == b) return i;
  fail(Errc::contract, "unknown backbone enumerator");
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  require(pos == value.size() && !value.empty() && value[0] != '-', Errc::config,
          "key '" + key + "': expected a non-negative integer, got '" + value + "'");
  return static_cast<std::size_t>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = lower(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(Errc::config, "key '" + key + "': expected true|false, got '" + value + "'");
}

}  // namespace

Backbone parse_backbone(const std::string& s) {
  const std::string v = lower(s);
  for (const auto& i : kBackbones)
    if (v == i.key || v == lower(i.display)) return i.kind;
  fail(Errc::config, "unknown backbone '" + s +
                         "' (expected transformer|conformer|mamba|bimamba|xlstm|c-bixlstm|p-bixlstm)");
}

const char* backbone_key(Backbone b) { return info(b).key; }
const char* backbone_display(Backbone b) { return info(b).display; }

bool is_attention(Backbone b) { return b == Backbone::transformer || b == Backbone::conformer; }

bool backbone_causal_default(Backbone b) { return b == Backbone::mamba || b == Backbone::xlstm; }

std::string ModelConfig::name() const {
  return std::string(backbone_display(backbone)) + "-" + std::to_string(blocks);
}

void ModelConfig::validate() const {
  require(blocks >= 1, Errc::config, "blocks must be >= 1");
  require(d_model >= 1, Errc::config, "d_model must be >= 1");
  require(input_bins == kBins, Errc::config,
          "input_bins must be " + std::to_string(kBins) + ", got " + std::to_string(input_bins));
  if (!is_attention(backbone)) {
    require(pe == PEKind::none, Errc::config,
            std::string("pe=") + pe_name(pe) + " is only valid for attention backbones, not " +
                backbone_key(backbone));
    require(causal == backbone_causal_default(backbone), Errc::config,
            std::string(backbone_key(backbone)) + " is " +
                (backbone_causal_default(backbone) ? "causal" : "non-causal") +
                "; causal=" + (causal ? "true" : "false") + " is inconsistent");
  }
  switch (backbone) {
    case Backbone::transformer:
    case Backbone::conformer:
      require(heads >= 1 && d_model % heads == 0, Errc::config,
              "d_model " + std::to_string(d_model) + " is not divisible by H=" +
                  std::to_string(heads));
      require(d_ff >= 1, Errc::config, "d_ff must be >= 1");
      if (pe == PEKind::rotary)
        require((d_model / heads) % 2 == 0, Errc::config, "rope needs an even head dimension");
      if (pe == PEKind::sinusoidal)
        require(d_model % 2 == 0, Errc::config, "sinusoidal PE needs an even d_model");
      if (backbone == Backbone::conformer) {
        require(conv_kernel >= 1, Errc::config, "conv_kernel must be >= 1");
        require(causal || conv_kernel % 2 == 1, Errc::config,
                "non-causal conv_kernel must be odd, got " + std::to_string(conv_kernel));
      }
      break;
    case Backbone::mamba:
    case Backbone::bimamba:
      require(d_state >= 1 && expand >= 1 && d_conv >= 1, Errc::config,
              "d_state, expand and d_conv must be >= 1");
      break;
    default:
      require(proj_factor >= 1 && xlstm_heads >= 1 && (proj_factor * d_model) % xlstm_heads == 0,
              Errc::config,
              "xlstm_heads=" + std::to_string(xlstm_heads) + " must divide d_inner=" +
                  std::to_string(proj_factor * d_model));
      require((proj_factor * d_model) % 4 == 0, Errc::config,
              "d_inner must be a multiple of the q/k/v block size 4");
      break;
  }
}

std::vector<std::pair<std::string, std::string>> ModelConfig::to_keys() const {
  auto s = [](std::size_t v) { return std::to_string(v); };
  return {
      {"backbone", backbone_key(backbone)},
      {"blocks", s(blocks)},
      {"causal", causal ? "true" : "false"},
      {"pe", pe == PEKind::none ? "none" : pe == PEKind::sinusoidal ? "sin" : "rope"},
      {"d_model", s(d_model)},
      {"d_ff", s(d_ff)},
      {"heads", s(heads)},
      {"conv_kernel", s(conv_kernel)},
      {"d_state", s(d_state)},
      {"expand", s(expand)},
      {"d_conv", s(d_conv)},
      {"dt_rank", s(dt_rank)},
      {"xlstm_heads", s(xlstm_heads)},
      {"proj_factor", s(proj_factor)},
      {"scan", scan_mode_name(scan)},
  };
}

bool ModelConfig::set_key(const std::string& key, const std::string& value) {
  if (key == "backbone") backbone = parse_backbone(value);
  else if (key == "blocks") blocks = parse_size(key, value);
  else if (key == "causal") causal = parse_bool(key, value);
  else if (key == "pe") pe = parse_pe(value);
  else if (key == "d_model") d_model = parse_size(key, value);
  else if (key == "d_ff") d_ff = parse_size(key, value);
  else if (key == "heads") heads = parse_size(key, value);
  else if (key == "conv_kernel") conv_kernel = parse_size(key, value);
  else if (key == "d_state") d_state = parse_size(key, value);
  else if (key == "expand") expand = parse_size(key, value);
  else if (key == "d_conv") d_conv = parse_size(key, value);
  else if (key == "dt_rank") dt_rank = parse_size(key, value);
  else if (key == "xlstm_heads") xlstm_heads = parse_size(key, value);
  else if (key == "proj_factor") proj_factor = parse_size(key, value);
  else if (key == "scan") scan = parse_scan_mode(value);
  else return false;
  return true;
}

ModelConfig ModelConfig::from_name(const std::string& name) {
  const auto dash = name.rfind('-');
  require(dash != std::string::npos && dash + 1 < name.size(), Errc::config,
          "model name '" + name + "' is not of the form <backbone>-<N>");
  ModelConfig cfg;
  cfg.backbone = parse_backbone(name.substr(0, dash));
  cfg.blocks = parse_size("blocks", name.substr(dash + 1));
  cfg.causal = backbone_causal_default(cfg.backbone);
  cfg.validate();
  return cfg;
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  ModelConfig cfg;
  bool causal_given = false;
  for (const auto& kv : parse_key_values(text)) {
    require(cfg.set_key(kv.key, kv.value), Errc::config,
            "unknown model key '" + kv.key + "' on line " + std::to_string(kv.line));
    causal_given = causal_given || kv.key == "causal";
  }
  if (!causal_given) cfg.causal = backbone_causal_default(cfg.backbone);
  cfg.validate();
  return cfg;
}

std::string ModelConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : to_keys()) out += k + " = " + v + "\n";
  return out;
}

template <typename T>
Tensor<T> open_unit_interval(const Tensor<T>& x) {
  return custom_unary<T>(
      x,
      [](std::span<const T> in) {
        const T lo = std::numeric_limits<T>::min();
        const T hi = std::nextafter(T(1), T(0));
        std::vector<T> out(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::clamp(in[i], lo, hi);
        return out;
      },
      [](std::span<const T>, std::span<const T>, std::span<const T> g) {
        return std::vector<T>(g.begin(), g.end());
      });
}

template <typename T>
Tensor<T> magnitude_tensor(const Spectrogram& spec) {
  const auto mag = magnitude(spec);
  return Tensor<T>(Shape{spec.frames, kBins}, std::vector<T>(mag.begin(), mag.end()));
}

template <typename T>
EnhancementModel<T>::EnhancementModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const std::size_t k = cfg_.input_bins, d = cfg_.d_model;
  in_ln_g_ = params_.constant("input.ln.g", {k}, T(1));
  in_ln_b_ = params_.constant("input.ln.b", {k}, T(0));
  in_w_ = params_.uniform("input.conv.w", {1, k, d}, k, rng);
  in_b_ = params_.constant("input.conv.b", {d}, T(0));

  AttentionDims ad{cfg_.d_model, cfg_.d_ff, cfg_.heads, cfg_.causal, cfg_.pe, cfg_.conv_kernel};
  MambaDims md{cfg_.d_model, cfg_.d_state, cfg_.expand, cfg_.d_conv, cfg_.dt_rank, cfg_.scan};
  XLSTMDims xd{cfg_.d_model, cfg_.proj_factor, cfg_.xlstm_heads, 4, 4};
  for (std::size_t i = 0; i < cfg_.blocks; ++i) {
    const std::string p = "block" + std::to_string(i);
    switch (cfg_.backbone) {
      case Backbone::transformer:
        blocks_.push_back(std::make_unique<TransformerBlock<T>>(params_, p, ad, rng));
        break;
      case Backbone::conformer:
        blocks_.push_back(std::make_unique<ConformerBlock<T>>(params_, p, ad, rng));
        break;
      case Backbone::mamba:
        blocks_.push_back(std::make_unique<MambaBlock<T>>(params_, p, md, rng));
        break;
      case Backbone::bimamba:
        blocks_.push_back(std::make_unique<BiMambaBlock<T>>(params_, p, md, rng));
        break;
      case Backbone::xlstm:
        blocks_.push_back(std::make_unique<MLSTMBlock<T>>(params_, p, xd, rng));
        break;
      case Backbone::c_bixlstm:
        blocks_.push_back(std::make_unique<CBixLSTMBlock<T>>(params_, p, xd, rng));
        break;
      case Backbone::p_bixlstm:
        blocks_.push_back(std::make_unique<PBixLSTMBlock<T>>(params_, p, xd, rng));
        break;
    }
  }
  out_w_ = params_.uniform("output.conv.w", {1, d, k}, d, rng);
  out_b_ = params_.constant("output.conv.b", {k}, T(0));
}

template <typename T>
Tensor<T> EnhancementModel<T>::embed(const Tensor<T>& magnitude) const {
  require(magnitude.rank() == 2 && magnitude.dim(1) == cfg_.input_bins, Errc::dimension,
          "model input must be [L, " + std::to_string(cfg_.input_bins) + "], got " +
              shape_str(magnitude.shape()));
  auto h = activation(layer_norm(magnitude, in_ln_g_, in_ln_b_), Act::relu);
  h = conv1d(h, in_w_, in_b_, cfg_.causal);
  if (cfg_.pe == PEKind::sinusoidal) h = add(h, sinpe<T>(h.dim(0), cfg_.d_model));
  for (const auto& b : blocks_) h = b->forward(h);
  return h;
}

template <typename T>
Tensor<T> EnhancementModel<T>::forward(const Tensor<T>& magnitude) const {
  auto logits = conv1d(embed(magnitude), out_w_, out_b_, cfg_.causal);
  return open_unit_interval(activation(logits, Act::sigmoid));
}

template <typename T>
Mask EnhancementModel<T>::predict_mask(const Spectrogram& noisy) const {
  NoGradGuard guard;
  auto m = forward(magnitude_tensor<T>(noisy));
  Mask out;
  out.frames = noisy.frames;
  out.values.assign(m.values().begin(), m.values().end());
  return out;
}

template <typename T>
Waveform EnhancementModel<T>::enhance(const Waveform& noisy) const {
  require(noisy.sample_rate == kSampleRate, Errc::rate,
          "enhance expects 16000 Hz input, got " + std::to_string(noisy.sample_rate));
  require(noisy.size() >= 1, Errc::contract, "enhance: empty waveform");
  const auto spec = stft(noisy);
  return istft(apply_mask(spec, predict_mask(spec)), noisy.size());
}

template <typename T>
TensorArchive EnhancementModel<T>::to_archive() const {
  TensorArchive ar;
  for (const auto& [name, t] : params_.items()) ar.put(name, t);
  return ar;
}

template <typename T>
void EnhancementModel<T>::load_archive(const TensorArchive& ar) {
  require(ar.entries().size() == params_.size(), Errc::format,
          "checkpoint has " + std::to_string(ar.entries().size()) + " tensors, model expects " +
              std::to_string(params_.size()));
  for (const auto& [name, t] : params_.items()) {
    require(ar.contains(name), Errc::format, "checkpoint lacks parameter " + name);
    const auto& e = ar.at(name);
    require(e.shape == t.shape(), Errc::format,
            "parameter " + name + ": checkpoint shape " + shape_str(e.shape) + " vs model " +
                shape_str(t.shape()));
    auto dst = t.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      require(std::isfinite(e.values[i]), Errc::numeric, "non-finite value in parameter " + name);
      dst[i] = static_cast<T>(e.values[i]);
    }
  }
}

template <typename T>
void EnhancementModel<T>::save(const std::string& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, Errc::io, "cannot create directory " + dir + ": " + ec.message());
  write_text_file(dir + "/model.cfg", cfg_.to_text());
  to_archive().save(dir + "/params.tfa");
}

template <typename T>
std::unique_ptr<EnhancementModel<T>> EnhancementModel<T>::load(const std::string& dir) {
  require(std::filesystem::is_directory(dir), Errc::io, "checkpoint directory not found: " + dir);
  const auto cfg = ModelConfig::from_text(read_text_file(dir + "/model.cfg"));
  auto model = std::make_unique<EnhancementModel<T>>(cfg, 0);
  model->load_archive(TensorArchive::load(dir + "/params.tfa"));
  return model;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), Errc::io, "cannot write " + path);
  out << text;
  require(static_cast<bool>(out), Errc::io, "write failed for " + path);
}

template Tensor<float> open_unit_interval(const Tensor<float>&);
template Tensor<double> open_unit_interval(const Tensor<double>&);
template Tensor<float> magnitude_tensor(const Spectrogram&);
template Tensor<double> magnitude_tensor(const Spectrogram&);
template class EnhancementModel<float>;
template class EnhancementModel<double>;

}  // namespace tfse
