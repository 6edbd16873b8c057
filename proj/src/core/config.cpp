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

#include "tfse/config.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

namespace tfse {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const KeyValue& kv) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(kv.value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  require(pos == kv.value.size() && !kv.value.empty() && kv.value[0] != '-', Errc::config,
          "key '" + kv.key + "': expected a non-negative integer, got '" + kv.value + "'");
  return static_cast<std::size_t>(v);
}

double to_double(const KeyValue& kv) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(kv.value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  require(pos == kv.value.size() && !kv.value.empty() && std::isfinite(v), Errc::config,
          "key '" + kv.key + "': expected a number, got '" + kv.value + "'");
  return v;
}

int to_int(const KeyValue& kv) {
  const double v = to_double(kv);
  require(v == std::floor(v), Errc::config, "key '" + kv.key + "': expected an integer");
  return static_cast<int>(v);
}

bool to_bool(const KeyValue& kv) {
  if (kv.value == "true" || kv.value == "1" || kv.value == "yes") return true;
  if (kv.value == "false" || kv.value == "0" || kv.value == "no") return false;
  fail(Errc::config, "key '" + kv.key + "': expected true|false, got '" + kv.value + "'");
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

std::string resolve(const std::string& path, const std::string& base) {
  if (path.empty() || base.empty() || path == "synthetic") return path;
  std::filesystem::path p(path);
  return p.is_absolute() ? path : (std::filesystem::path(base) / p).lexically_normal().string();
}

}  // namespace

std::vector<KeyValue> parse_key_values(const std::string& text) {
  std::vector<KeyValue> out;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    require(eq != std::string::npos, Errc::config,
            "line " + std::to_string(line) + ": expected key = value, got '" + s + "'");
    KeyValue kv{trim(s.substr(0, eq)), trim(s.substr(eq + 1)), line};
    require(!kv.key.empty(), Errc::config, "line " + std::to_string(line) + ": empty key");
    for (const auto& prev : out)
      require(prev.key != kv.key, Errc::config,
              "key '" + kv.key + "' repeated on line " + std::to_string(line));
    out.push_back(std::move(kv));
  }
  return out;
}

std::string apply_overrides(const std::string& base, const std::string& overrides) {
  const auto over = parse_key_values(overrides);
  if (over.empty()) return base;
  std::string out;
  std::istringstream in(base);
  std::string raw;
  while (std::getline(in, raw)) {
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    const auto eq = s.find('=');
    const std::string key = eq == std::string::npos ? "" : trim(s.substr(0, eq));
    bool replaced = false;
    for (const auto& kv : over) replaced = replaced || kv.key == key;
    if (!replaced) out += raw + "\n";
  }
  return out + overrides + "\n";
}

const char* loss_name(LossKind k) { return k == LossKind::mask ? "mask" : "spectrum"; }

RunConfig RunConfig::parse(const std::string& text, const std::string& base_dir) {
  RunConfig rc;
  bool causal_given = false;
  for (const auto& kv : parse_key_values(text)) {
    const std::string& k = kv.key;
    if (rc.model.set_key(k, kv.value)) {
      causal_given = causal_given || k == "causal";
    } else if (k == "seed") {
      rc.seed = to_size(kv);
    } else if (k == "corpus") {
      rc.train.corpus = resolve(kv.value, base_dir);
    } else if (k == "batch_size") {
      rc.train.batch_size = to_size(kv);
    } else if (k == "epochs") {
      rc.train.epochs = to_size(kv);
    } else if (k == "steps_per_epoch") {
      rc.train.steps_per_epoch = to_size(kv);
    } else if (k == "step_w") {
      rc.train.step_w = to_size(kv);
    } else if (k == "lr_scale") {
      rc.train.lr_scale = to_double(kv);
    } else if (k == "grad_clip") {
      rc.train.grad_clip = to_double(kv);
    } else if (k == "snr_min") {
      rc.train.snr_min = to_int(kv);
    } else if (k == "snr_max") {
      rc.train.snr_max = to_int(kv);
    } else if (k == "clip_seconds") {
      rc.train.clip_seconds = to_double(kv);
    } else if (k == "loss") {
      if (kv.value == "mask") rc.train.loss = LossKind::mask;
      else if (kv.value == "spectrum") rc.train.loss = LossKind::spectrum;
      else fail(Errc::config, "key 'loss': expected mask|spectrum, got '" + kv.value + "'");
    } else if (k == "synth_speech") {
      rc.train.synth_speech = to_size(kv);
    } else if (k == "synth_noise") {
      rc.train.synth_noise = to_size(kv);
    } else if (k == "synth_seconds") {
      rc.train.synth_seconds = to_double(kv);
    } else if (k == "bench_lengths") {
      rc.bench.lengths_s.clear();
      std::istringstream ss(kv.value);
      std::string item;
      while (std::getline(ss, item, ','))
        rc.bench.lengths_s.push_back(to_double(KeyValue{k, trim(item), kv.line}));
    } else if (k == "bench_batch") {
      rc.bench.batch = to_size(kv);
    } else if (k == "bench_runs") {
      rc.bench.runs = to_size(kv);
    } else if (k == "bench_warmup") {
      rc.bench.warmup = to_size(kv);
    } else if (k == "bench_include_stft") {
      rc.bench.include_stft = to_bool(kv);
    } else if (k == "bench_train_steps") {
      rc.bench.train_steps = to_size(kv);
    } else if (k == "bench_train_warmup") {
      rc.bench.train_warmup = to_size(kv);
    } else if (k == "bench_train_clip_seconds") {
      rc.bench.train_clip_seconds = to_double(kv);
    } else if (k == "eval_manifest") {
      rc.eval.manifest = resolve(kv.value, base_dir);
    } else if (k == "scorer") {
      rc.eval.scorer = kv.value;
    } else {
      fail(Errc::config, "unknown config key '" + k + "' on line " + std::to_string(kv.line));
    }
  }
  if (!causal_given) rc.model.causal = backbone_causal_default(rc.model.backbone);
  rc.validate();
  return rc;
}

RunConfig RunConfig::load(const std::string& path, const std::string& overrides) {
  require(std::filesystem::is_regular_file(path), Errc::io, "config file not found: " + path);
  return parse(apply_overrides(read_text_file(path), overrides),
               std::filesystem::path(path).parent_path().string());
}

void RunConfig::validate() const {
  model.validate();
  require(train.batch_size >= 1, Errc::config, "batch_size must be >= 1");
  require(train.step_w >= 1, Errc::config, "step_w must be >= 1");
  require(train.lr_scale > 0, Errc::config, "lr_scale must be > 0");
  require(train.grad_clip > 0, Errc::config, "grad_clip must be > 0");
  require(train.snr_min <= train.snr_max, Errc::config, "snr_min must not exceed snr_max");
  require(train.clip_seconds > 0, Errc::config, "clip_seconds must be > 0");
  require(train.synth_speech >= 1 && train.synth_noise >= 1 && train.synth_seconds > 0,
          Errc::config, "synthetic corpus sizes must be positive");
  require(!bench.lengths_s.empty(), Errc::config, "bench_lengths must not be empty");
  for (double l : bench.lengths_s) require(l > 0, Errc::config, "bench lengths must be > 0");
  require(bench.batch >= 1 && bench.runs >= 1, Errc::config, "bench_batch and bench_runs must be >= 1");
  require(bench.train_steps >= 1, Errc::config, "bench_train_steps must be >= 1");
  require(bench.train_clip_seconds > 0, Errc::config, "bench_train_clip_seconds must be > 0");
}

std::string RunConfig::to_text() const {
  std::string out = "# resolved configuration for " + model.name() + "\n";
  out += model.to_text();
  auto kv = [&out](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  kv("seed", std::to_string(seed));
  kv("corpus", train.corpus);
  kv("batch_size", std::to_string(train.batch_size));
  kv("epochs", std::to_string(train.epochs));
  kv("steps_per_epoch", std::to_string(train.steps_per_epoch));
  kv("step_w", std::to_string(train.step_w));
  kv("lr_scale", fmt(train.lr_scale));
  kv("grad_clip", fmt(train.grad_clip));
  kv("snr_min", std::to_string(train.snr_min));
  kv("snr_max", std::to_string(train.snr_max));
  kv("clip_seconds", fmt(train.clip_seconds));
  kv("loss", loss_name(train.loss));
  kv("synth_speech", std::to_string(train.synth_speech));
  kv("synth_noise", std::to_string(train.synth_noise));
  kv("synth_seconds", fmt(train.synth_seconds));
  std::string lens;
  for (std::size_t i = 0; i < bench.lengths_s.size(); ++i)
    lens += (i ? "," : "") + fmt(bench.lengths_s[i]);
  kv("bench_lengths", lens);
  kv("bench_batch", std::to_string(bench.batch));
  kv("bench_runs", std::to_string(bench.runs));
  kv("bench_warmup", std::to_string(bench.warmup));
  kv("bench_include_stft", bench.include_stft ? "true" : "false");
  kv("bench_train_steps", std::to_string(bench.train_steps));
  kv("bench_train_warmup", std::to_string(bench.train_warmup));
  kv("bench_train_clip_seconds", fmt(bench.train_clip_seconds));
  if (!eval.manifest.empty()) kv("eval_manifest", eval.manifest);
  if (!eval.scorer.empty()) kv("scorer", eval.scorer);
  return out;
}

}  // namespace tfse
