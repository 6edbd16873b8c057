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

#include "tfse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

namespace tfse {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

void normalize_rms(std::vector<double>& x, double target) {
  double p = 0;
  for (double v : x) p += v * v;
  if (p <= 0) return;
  const double g = target / std::sqrt(p / x.size());
  double peak = 0;
  for (double& v : x) {
    v *= g;
    peak = std::max(peak, std::abs(v));
  }
  if (peak > 0.95)
    for (double& v : x) v *= 0.95 / peak;
}

// RBJ biquad, direct form I.
struct Biquad {
  double b0, b1, b2, a1, a2;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;

  static Biquad lowpass(double fc, double q) { return design(fc, q, 0); }
  static Biquad bandpass(double fc, double q) { return design(fc, q, 1); }
  static Biquad highpass(double fc, double q) { return design(fc, q, 2); }

  static Biquad design(double fc, double q, int kind) {
    const double w = kTwoPi * fc / kSampleRate;
    const double alpha = std::sin(w) / (2 * q), c = std::cos(w);
    double b0, b1, b2;
    if (kind == 0) {
      b0 = (1 - c) / 2, b1 = 1 - c, b2 = (1 - c) / 2;
    } else if (kind == 1) {
      b0 = alpha, b1 = 0, b2 = -alpha;
    } else {
      b0 = (1 + c) / 2, b1 = -(1 + c), b2 = (1 + c) / 2;
    }
    const double a0 = 1 + alpha;
    return {b0 / a0, b1 / a0, b2 / a0, -2 * c / a0, (1 - alpha) / a0};
  }

  double operator()(double x) {
    const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1, x1 = x, y2 = y1, y1 = y;
    return y;
  }
};

std::string dir_of(const std::string& path) {
  return std::filesystem::path(path).parent_path().string();
}

std::string resolve(const std::string& p, const std::string& base) {
  std::filesystem::path fp(p);
  if (fp.is_absolute() || base.empty()) return p;
  return (std::filesystem::path(base) / fp).lexically_normal().string();
}

}  // namespace

Waveform synth_speech(Rng& rng, double seconds) {
  const std::size_t n = static_cast<std::size_t>(seconds * kSampleRate);
  Waveform w;
  w.samples.assign(n, 0.0);
  const double f0_base = uniform(rng, 100.0, 220.0);
  const double vib_rate = uniform(rng, 0.5, 2.0), vib_phase = uniform(rng, 0.0, kTwoPi);
  const double vib_depth = uniform(rng, 0.05, 0.15);
  const std::size_t max_h = static_cast<std::size_t>(7000.0 / (f0_base * (1 + vib_depth)));
  std::vector<double> phase(max_h + 1, 0.0);
  for (auto& p : phase) p = uniform(rng, 0.0, kTwoPi);

  std::size_t pos = static_cast<std::size_t>(uniform(rng, 0.0, 0.15) * kSampleRate);
  while (pos < n) {
    const std::size_t len = static_cast<std::size_t>(uniform(rng, 0.15, 0.35) * kSampleRate);
    const std::size_t gap = static_cast<std::size_t>(uniform(rng, 0.04, 0.2) * kSampleRate);
    // Per-syllable formants.
    const double f1 = uniform(rng, 300, 900), f2 = uniform(rng, 900, 2400),
                 f3 = uniform(rng, 2200, 3500);
    const double gain = uniform(rng, 0.5, 1.0);
    std::vector<double> amp(max_h + 1, 0.0);
    for (std::size_t h = 1; h <= max_h; ++h) {
      const double f = h * f0_base;
      auto bump = [f](double fc, double bw) { return std::exp(-0.5 * std::pow((f - fc) / bw, 2)); };
      amp[h] = (bump(f1, 150) + 0.6 * bump(f2, 250) + 0.3 * bump(f3, 350) + 0.02) / std::sqrt(double(h));
    }
    const std::size_t end = std::min(n, pos + len);
    for (std::size_t t = pos; t < end; ++t) {
      const double tt = static_cast<double>(t) / kSampleRate;
      const double f0 = f0_base * (1 + vib_depth * std::sin(kTwoPi * vib_rate * tt + vib_phase));
      const double u = static_cast<double>(t - pos) / static_cast<double>(len);
      const double env = gain * std::sin(std::numbers::pi * u);
      double s = 0;
      for (std::size_t h = 1; h <= max_h; ++h) {
        phase[h] += kTwoPi * f0 * h / kSampleRate;
        if (h * f0 < 7800) s += amp[h] * std::sin(phase[h]);
      }
      w.samples[t] = env * s;
    }
    // Keep harmonic phases advancing through the gap.
    for (std::size_t h = 1; h <= max_h; ++h)
      phase[h] = std::fmod(phase[h] + kTwoPi * f0_base * h * gap / kSampleRate, kTwoPi);
    pos = end + gap;
  }
  normalize_rms(w.samples, 0.08);
  return w;
}

Waveform synth_noise(Rng& rng, double seconds) {
  const std::size_t n = static_cast<std::size_t>(seconds * kSampleRate);
  Waveform w;
  w.samples.resize(n);
  std::normal_distribution<double> g(0.0, 1.0);
  const int kind = std::uniform_int_distribution<int>(0, 2)(rng);
  Biquad f = kind == 0   ? Biquad::lowpass(uniform(rng, 800, 6000), 0.707)
             : kind == 1 ? Biquad::bandpass(uniform(rng, 400, 4000), uniform(rng, 0.5, 2.0))
                         : Biquad::highpass(uniform(rng, 200, 2000), 0.707);
  const double mod_rate = uniform(rng, 0.2, 3.0), mod_depth = uniform(rng, 0.0, 0.5);
  const double white = uniform(rng, 0.0, 0.3);
  for (std::size_t t = 0; t < n; ++t) {
    const double e = g(rng);
    const double m = 1 + mod_depth * std::sin(kTwoPi * mod_rate * t / kSampleRate);
    w.samples[t] = m * (f(e) + white * e);
  }
  normalize_rms(w.samples, 0.08);
  return w;
}

Corpus synth_corpus(std::size_t n_speech, std::size_t n_noise, double seconds, std::uint64_t seed) {
  require(n_speech >= 1 && n_noise >= 1 && seconds > 0, Errc::data, "empty synthetic corpus");
  Rng rng(seed);
  Corpus c;
  for (std::size_t i = 0; i < n_speech; ++i) c.speech.push_back(synth_speech(rng, seconds));
  for (std::size_t i = 0; i < n_noise; ++i) c.noise.push_back(synth_noise(rng, seconds));
  return c;
}

Corpus load_corpus_manifest(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::data, "corpus manifest not found: " + path);
  const std::string base = dir_of(path);
  Corpus c;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    std::istringstream ss(line);
    std::string role, file;
    if (!(ss >> role) || role[0] == '#') continue;
    require(static_cast<bool>(ss >> file), Errc::format,
            path + ":" + std::to_string(no) + ": expected '<speech|noise> <wav>'");
    if (role == "speech") c.speech.push_back(read_wav(resolve(file, base)));
    else if (role == "noise") c.noise.push_back(read_wav(resolve(file, base)));
    else fail(Errc::format, path + ":" + std::to_string(no) + ": unknown role '" + role + "'");
  }
  require(!c.speech.empty(), Errc::data, "corpus manifest " + path + " lists no speech");
  require(!c.noise.empty(), Errc::data, "corpus manifest " + path + " lists no noise");
  return c;
}

std::vector<EvalItem> load_eval_manifest(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::data, "eval manifest not found: " + path);
  const std::string base = dir_of(path);
  std::vector<EvalItem> items;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    std::istringstream ss(line);
    EvalItem it;
    if (!(ss >> it.clean_path) || it.clean_path[0] == '#') continue;
    require(static_cast<bool>(ss >> it.noise_path >> it.snr_db) && std::isfinite(it.snr_db),
            Errc::format, path + ":" + std::to_string(no) + ": expected '<clean> <noise> <snr>'");
    it.clean_path = resolve(it.clean_path, base);
    it.noise_path = resolve(it.noise_path, base);
    items.push_back(std::move(it));
  }
  require(!items.empty(), Errc::data, "eval manifest " + path + " is empty");
  return items;
}

void write_synth_corpus(const std::string& dir, std::size_t n_speech, std::size_t n_noise,
                        std::size_t n_eval, double seconds, std::uint64_t seed) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "speech", ec);
  fs::create_directories(fs::path(dir) / "noise", ec);
  fs::create_directories(fs::path(dir) / "eval", ec);
  require(!ec, Errc::io, "cannot create corpus directories under " + dir);
  const Corpus train = synth_corpus(n_speech, n_noise, seconds, seed);
  std::ofstream lst(fs::path(dir) / "train.lst");
  require(static_cast<bool>(lst), Errc::io, "cannot write train.lst in " + dir);
  for (std::size_t i = 0; i < train.speech.size(); ++i) {
    const std::string rel = "speech/s" + std::to_string(i) + ".wav";
    write_wav((fs::path(dir) / rel).string(), train.speech[i], WavEncoding::float32);
    lst << "speech " << rel << "\n";
  }
  for (std::size_t i = 0; i < train.noise.size(); ++i) {
    const std::string rel = "noise/n" + std::to_string(i) + ".wav";
    write_wav((fs::path(dir) / rel).string(), train.noise[i], WavEncoding::float32);
    lst << "noise " << rel << "\n";
  }
  // Held-out clips from a different seed stream; noise twice as long so a
  // random segment can be cut.
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::ofstream ev(fs::path(dir) / "eval.lst");
  require(static_cast<bool>(ev), Errc::io, "cannot write eval.lst in " + dir);
  for (std::size_t i = 0; i < n_eval; ++i) {
    const std::string c = "eval/clean" + std::to_string(i) + ".wav";
    const std::string n = "eval/noise" + std::to_string(i) + ".wav";
    write_wav((fs::path(dir) / c).string(), synth_speech(rng, seconds), WavEncoding::float32);
    write_wav((fs::path(dir) / n).string(), synth_noise(rng, 2 * seconds), WavEncoding::float32);
    for (int snr : {-5, 0, 5, 10, 15}) ev << c << " " << n << " " << snr << "\n";
  }
}

}  // namespace tfse
