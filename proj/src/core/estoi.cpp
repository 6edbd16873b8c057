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

#include "tfse/estoi.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "tfse/error.hpp"

namespace tfse {

namespace {

constexpr int kEstoiRate = 10000;
constexpr std::size_t kEstoiFrame = 256;
constexpr std::size_t kEstoiHop = 128;
constexpr std::size_t kEstoiFft = 512;
constexpr std::size_t kBands = 15;
constexpr double kMinFreq = 150.0;
constexpr std::size_t kSegment = 30;
constexpr double kDynRange = 40.0;

// Symmetric Hann of length n + 2 without its zero end points.
std::vector<double> hann_inner(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(i + 1) / double(n + 1));
  return w;
}

// [bands x frames] one-third-octave band magnitudes.
std::vector<std::vector<double>> band_envelopes(const std::vector<double>& x) {
  const auto win = hann_inner(kEstoiFrame);
  const std::size_t bins = kEstoiFft / 2 + 1;
  // Band edges snapped to the nearest FFT bin.
  std::vector<std::size_t> lo(kBands), hi(kBands);
  auto nearest = [bins](double f) {
    std::size_t best = 0;
    double err = 1e300;
    for (std::size_t k = 0; k < bins; ++k) {
      const double fk = double(k) * kEstoiRate / double(kEstoiFft);
      if (std::abs(fk - f) < err) err = std::abs(fk - f), best = k;
    }
    return best;
  };
  for (std::size_t b = 0; b < kBands; ++b) {
    lo[b] = nearest(kMinFreq * std::pow(2.0, (2.0 * double(b) - 1.0) / 6.0));
    hi[b] = nearest(kMinFreq * std::pow(2.0, (2.0 * double(b) + 1.0) / 6.0));
  }
  std::vector<std::vector<double>> env(kBands);
  std::vector<double> frame(kEstoiFrame);
  std::vector<std::complex<double>> spec(bins);
  for (std::size_t start = 0; start + kEstoiFrame < x.size(); start += kEstoiHop) {
    for (std::size_t i = 0; i < kEstoiFrame; ++i) frame[i] = win[i] * x[start + i];
    rfft(frame, kEstoiFft, spec);
    for (std::size_t b = 0; b < kBands; ++b) {
      double p = 0;
      for (std::size_t k = lo[b]; k < hi[b]; ++k) p += std::norm(spec[k]);
      env[b].push_back(std::sqrt(p));
    }
  }
  return env;
}

// Mean-removal and unit-norm scaling of a strided vector; zero vectors stay zero.
void normalize(double* v, std::size_t n, std::size_t stride) {
  double mean = 0;
  for (std::size_t i = 0; i < n; ++i) mean += v[i * stride];
  mean /= double(n);
  double norm = 0;
  for (std::size_t i = 0; i < n; ++i) {
    v[i * stride] -= mean;
    norm += v[i * stride] * v[i * stride];
  }
  norm = std::sqrt(norm);
  if (norm > 0)
    for (std::size_t i = 0; i < n; ++i) v[i * stride] /= norm;
}

}  // namespace

std::vector<double> resample(std::span<const double> x, int up, int down) {
  require(up >= 1 && down >= 1, Errc::contract, "resample factors must be >= 1");
  const int g = std::gcd(up, down);
  up /= g;
  down /= g;
  if (up == 1 && down == 1) return {x.begin(), x.end()};
  const int m = std::max(up, down);
  const double fc = 0.5 / m;
  const long half = 10L * m;
  const double beta = 5.0;
  std::vector<double> h(static_cast<std::size_t>(2 * half + 1));
  const double i0b = std::cyl_bessel_i(0.0, beta);
  for (long n = -half; n <= half; ++n) {
    const double t = 2.0 * fc * double(n);
    const double sinc = n == 0 ? 1.0 : std::sin(std::numbers::pi * t) / (std::numbers::pi * t);
    const double r = double(n) / double(half);
    const double kaiser = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
    h[static_cast<std::size_t>(n + half)] = up * 2.0 * fc * sinc * kaiser;
  }
  const std::size_t out_len = (x.size() * static_cast<std::size_t>(up) + down - 1) / down;
  std::vector<double> y(out_len, 0.0);
  const long nx = static_cast<long>(x.size());
  for (std::size_t j = 0; j < out_len; ++j) {
    const long pos = static_cast<long>(j) * down;  // position on the upsampled grid
    // Input n contributes at upsampled index n*up; tap index pos - n*up + half.
    long n_lo = (pos - half + up - 1) / up;
    if (pos - half < 0) n_lo = -((half - pos) / up);
    const long n_hi = (pos + half) / up;
    double acc = 0;
    for (long n = std::max(0L, n_lo); n <= std::min(nx - 1, n_hi); ++n) {
      const long tap = pos - n * up + half;
      if (tap >= 0 && tap <= 2 * half) acc += x[static_cast<std::size_t>(n)] * h[static_cast<std::size_t>(tap)];
    }
    y[j] = acc;
  }
  return y;
}

void remove_silent_frames(std::vector<double>& x, std::vector<double>& y, double dyn_range_db,
                          std::size_t frame_len, std::size_t hop) {
  require(x.size() == y.size(), Errc::dimension, "remove_silent_frames: length mismatch");
  const auto win = hann_inner(frame_len);
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + frame_len < x.size(); s += hop) starts.push_back(s);
  if (starts.empty()) {
    x.clear();
    y.clear();
    return;
  }
  std::vector<double> energy(starts.size());
  for (std::size_t f = 0; f < starts.size(); ++f) {
    double e = 0;
    for (std::size_t i = 0; i < frame_len; ++i) {
      const double v = win[i] * x[starts[f] + i];
      e += v * v;
    }
    energy[f] = 20.0 * std::log10(std::sqrt(e) + 1e-300);
  }
  const double top = *std::max_element(energy.begin(), energy.end());
  std::vector<std::size_t> keep;
  for (std::size_t f = 0; f < starts.size(); ++f)
    if (energy[f] > top - dyn_range_db) keep.push_back(starts[f]);
  // Overlap-add of the retained windowed frames.
  const std::size_t out_len = (keep.size() - 1) * hop + frame_len;
  std::vector<double> xs(out_len, 0.0), ys(out_len, 0.0);
  for (std::size_t f = 0; f < keep.size(); ++f)
    for (std::size_t i = 0; i < frame_len; ++i) {
      xs[f * hop + i] += win[i] * x[keep[f] + i];
      ys[f * hop + i] += win[i] * y[keep[f] + i];
    }
  x = std::move(xs);
  y = std::move(ys);
}

double estoi(const Waveform& clean, const Waveform& processed) {
  require(clean.size() == processed.size(), Errc::dimension,
          "estoi: signals differ in length (" + std::to_string(clean.size()) + " vs " +
              std::to_string(processed.size()) + ")");
  require(clean.sample_rate == kSampleRate && processed.sample_rate == kSampleRate, Errc::rate,
          "estoi expects 16000 Hz signals");
  auto x = resample(clean.samples, kEstoiRate, kSampleRate);
  auto y = resample(processed.samples, kEstoiRate, kSampleRate);
  remove_silent_frames(x, y, kDynRange, kEstoiFrame, kEstoiHop);
  const auto xe = band_envelopes(x);
  const auto ye = band_envelopes(y);
  const std::size_t frames = xe[0].size();
  require(frames >= kSegment, Errc::length,
          "estoi: " + std::to_string(frames) + " non-silent frames, need at least " +
              std::to_string(kSegment));
  const std::size_t segments = frames - kSegment + 1;
  std::vector<double> xs(kBands * kSegment), ys(kBands * kSegment);
  double total = 0;
  for (std::size_t m = 0; m < segments; ++m) {
    for (std::size_t b = 0; b < kBands; ++b)
      for (std::size_t n = 0; n < kSegment; ++n) {
        xs[b * kSegment + n] = xe[b][m + n];
        ys[b * kSegment + n] = ye[b][m + n];
      }
    for (std::size_t b = 0; b < kBands; ++b) {
      normalize(xs.data() + b * kSegment, kSegment, 1);
      normalize(ys.data() + b * kSegment, kSegment, 1);
    }
    for (std::size_t n = 0; n < kSegment; ++n) {
      normalize(xs.data() + n, kBands, kSegment);
      normalize(ys.data() + n, kBands, kSegment);
    }
    double d = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) d += xs[i] * ys[i];
    total += d / double(kSegment);
  }
  return total / double(segments);
}

double snr_db(std::span<const double> ref, std::span<const double> est) {
  require(ref.size() == est.size(), Errc::dimension, "snr_db: length mismatch");
  double ps = 0, pe = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    ps += ref[i] * ref[i];
    pe += (ref[i] - est[i]) * (ref[i] - est[i]);
  }
  require(ps > 0, Errc::degenerate, "snr_db: silent reference");
  if (pe <= 0) return kSnrCapDb;
  return std::min(kSnrCapDb, 10.0 * std::log10(ps / pe));
}

}  // namespace tfse
