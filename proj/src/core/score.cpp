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

#include "tfse/score.hpp"

#include <unistd.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>

#include "tfse/estoi.hpp"

namespace tfse {

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

double external_on(const std::string& cmd, const Waveform& ref, const Waveform& deg) {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path();
  const std::string tag = std::to_string(::getpid());
  const std::string rp = (dir / ("tfse-ref-" + tag + ".wav")).string();
  const std::string dp = (dir / ("tfse-deg-" + tag + ".wav")).string();
  write_wav(rp, ref, WavEncoding::float32);
  write_wav(dp, deg, WavEncoding::float32);
  double v = 0;
  try {
    v = run_external_scorer(cmd, rp, dp);
  } catch (...) {
    fs::remove(rp);
    fs::remove(dp);
    throw;
  }
  fs::remove(rp);
  fs::remove(dp);
  return v;
}

}  // namespace

double run_external_scorer(const std::string& command, const std::string& ref_wav,
                           const std::string& deg_wav) {
  const std::string cmd = command + " " + shell_quote(ref_wav) + " " + shell_quote(deg_wav);
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(::popen(cmd.c_str(), "r"), ::pclose);
  require(pipe != nullptr, Errc::io, "cannot run scorer: " + command);
  std::string out;
  std::array<char, 256> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe.get())) out += buf.data();
  const int status = ::pclose(pipe.release());
  require(status == 0, Errc::io, "scorer exited with status " + std::to_string(status) + ": " + command);
  std::istringstream ss(out);
  double v = 0;
  require(static_cast<bool>(ss >> v) && std::isfinite(v), Errc::format,
          "scorer printed no number: '" + out + "'");
  return v;
}

ScoreTable score_items(const std::vector<EvalItem>& items, const EnhanceFn& enhance,
                       std::uint64_t seed, const std::string& scorer) {
  require(!items.empty(), Errc::data, "nothing to score");
  Rng rng(seed);
  std::map<double, ScoreColumn> cols;
  for (const auto& it : items) {
    const Waveform clean = read_wav(it.clean_path);
    const Waveform noise = read_wav(it.noise_path);
    const Mixture mix = mix_at_snr(clean, noise, it.snr_db, rng);
    const Waveform out = enhance(mix.mixture, clean);
    require(out.size() == clean.size(), Errc::contract, "enhancer changed the signal length");
    ScoreColumn& c = cols[it.snr_db];
    c.snr_db = it.snr_db;
    ++c.count;
    c.noisy_estoi += estoi(clean, mix.mixture);
    c.enhanced_estoi += estoi(clean, out);
    c.noisy_snr_db += snr_db(clean.samples, mix.mixture.samples);
    c.enhanced_snr_db += snr_db(clean.samples, out.samples);
    if (!scorer.empty()) {
      c.noisy_external += external_on(scorer, clean, mix.mixture);
      c.enhanced_external += external_on(scorer, clean, out);
    }
  }
  ScoreTable t;
  t.has_external = !scorer.empty();
  for (auto& [_, c] : cols) {
    const double n = static_cast<double>(c.count);
    c.noisy_estoi /= n;
    c.enhanced_estoi /= n;
    c.noisy_snr_db /= n;
    c.enhanced_snr_db /= n;
    c.noisy_external /= n;
    c.enhanced_external /= n;
    t.columns.push_back(c);
  }
  return t;
}

template <typename T>
ScoreTable score_model(const EnhancementModel<T>& model, const std::vector<EvalItem>& items,
                       std::uint64_t seed, const std::string& scorer) {
  return score_items(
      items, [&model](const Waveform& noisy, const Waveform&) { return model.enhance(noisy); }, seed,
      scorer);
}

ScoreTable score_oracle(const std::vector<EvalItem>& items, std::uint64_t seed) {
  return score_items(
      items,
      [](const Waveform& noisy, const Waveform& clean) {
        const auto x = stft(noisy);
        return istft(apply_mask(x, psm(stft(clean), x, true)), noisy.size());
      },
      seed);
}

std::string ScoreTable::to_csv() const {
  std::ostringstream ss;
  ss << std::setprecision(6) << "metric";
  for (const auto& c : columns) ss << "," << c.snr_db;
  ss << "\n";
  auto row = [&](const char* name, auto get) {
    ss << name;
    for (const auto& c : columns) ss << "," << get(c);
    ss << "\n";
  };
  row("noisy_estoi", [](const ScoreColumn& c) { return c.noisy_estoi; });
  row("enhanced_estoi", [](const ScoreColumn& c) { return c.enhanced_estoi; });
  row("noisy_snr_db", [](const ScoreColumn& c) { return c.noisy_snr_db; });
  row("enhanced_snr_db", [](const ScoreColumn& c) { return c.enhanced_snr_db; });
  row("snr_improvement_db", [](const ScoreColumn& c) { return c.enhanced_snr_db - c.noisy_snr_db; });
  if (has_external) {
    row("noisy_external", [](const ScoreColumn& c) { return c.noisy_external; });
    row("enhanced_external", [](const ScoreColumn& c) { return c.enhanced_external; });
  }
  return ss.str();
}

std::string ScoreTable::to_text() const {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(3);
  ss << std::setw(20) << std::left << "Input SNR (dB)";
  for (const auto& c : columns) ss << std::setw(10) << std::right << c.snr_db;
  ss << "\n";
  auto row = [&](const char* name, auto get) {
    ss << std::setw(20) << std::left << name;
    for (const auto& c : columns) ss << std::setw(10) << std::right << get(c);
    ss << "\n";
  };
  row("ESTOI noisy", [](const ScoreColumn& c) { return c.noisy_estoi; });
  row("ESTOI enhanced", [](const ScoreColumn& c) { return c.enhanced_estoi; });
  row("SNR noisy", [](const ScoreColumn& c) { return c.noisy_snr_db; });
  row("SNR enhanced", [](const ScoreColumn& c) { return c.enhanced_snr_db; });
  if (has_external) {
    row("external noisy", [](const ScoreColumn& c) { return c.noisy_external; });
    row("external enhanced", [](const ScoreColumn& c) { return c.enhanced_external; });
  }
  return ss.str();
}

template ScoreTable score_model(const EnhancementModel<float>&, const std::vector<EvalItem>&,
                                std::uint64_t, const std::string&);
template ScoreTable score_model(const EnhancementModel<double>&, const std::vector<EvalItem>&,
                                std::uint64_t, const std::string&);

}  // namespace tfse
