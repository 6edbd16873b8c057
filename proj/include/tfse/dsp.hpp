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

// Signal front end: WAV I/O, sqrt-Hann STFT/ISTFT (512/256 at 16 kHz),
// phase-sensitive masks and SNR-controlled mixing.

#ifndef TFSE_DSP_HPP_
#define TFSE_DSP_HPP_

#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace tfse {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kFrameLen = 512;
inline constexpr std::size_t kHop = 256;
inline constexpr std::size_t kBins = kFrameLen / 2 + 1;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// L x K one-sided complex spectrum, frame-major.
struct Spectrogram {
  std::size_t frames = 0;
  std::vector<std::complex<double>> values;

  static constexpr std::size_t bins = kBins;
  std::complex<double>& at(std::size_t l, std::size_t k) { return values[l * bins + k]; }
  const std::complex<double>& at(std::size_t l, std::size_t k) const { return values[l * bins + k]; }
};

// Real L x K mask aligned with a Spectrogram.
struct Mask {
  std::size_t frames = 0;
  std::vector<double> values;

  static constexpr std::size_t bins = kBins;
  double& at(std::size_t l, std::size_t k) { return values[l * bins + k]; }
  double at(std::size_t l, std::size_t k) const { return values[l * bins + k]; }
};

enum class WavEncoding { pcm16, float32 };

// Mono PCM16 or IEEE-float32 RIFF/WAVE at 16 kHz; samples normalized to [-1, 1].
// `enc`, when given, receives the file's sample encoding.
Waveform read_wav(const std::string& path, WavEncoding* enc = nullptr);
void write_wav(const std::string& path, const Waveform& w, WavEncoding enc = WavEncoding::pcm16);

// Periodic sqrt-Hann analysis/synthesis window of length kFrameLen.
const std::vector<double>& sqrt_hann_window();

// Number of frames for a signal of n samples. The signal is placed after
// kHop leading zeros and zero-padded at the end so every sample is covered
// by two overlapping frames: L = ceil(n / hop) + 1.
std::size_t frame_count(std::size_t n_samples);

Spectrogram stft(const Waveform& w);
// Overlap-add synthesis; returns exactly out_len samples.
Waveform istft(const Spectrogram& spec, std::size_t out_len);

// Real DFT of a zero-padded frame via FFTW (plans cached per thread).
void rfft(std::span<const double> frame, std::size_t nfft, std::span<std::complex<double>> out);

// (|S|/|X|) cos(arg S - arg X); bins with |X| < 1e-8 give 0. clamp => [0, 1].
Mask psm(const Spectrogram& clean, const Spectrogram& noisy, bool clamp);
Spectrogram apply_mask(const Spectrogram& noisy, const Mask& mask);
std::vector<double> magnitude(const Spectrogram& spec);

double mean_power(std::span<const double> x);

struct Mixture {
  Waveform mixture;
  Waveform scaled_noise;
  std::size_t noise_offset = 0;
};

// Cuts a random segment of `noise` (offset drawn from rng) matching the speech
// length and scales it so 10 log10(P_speech / P_noise) == snr_db, with powers
// averaged over the whole clip.
Mixture mix_at_snr(const Waveform& speech, const Waveform& noise, double snr_db,
                   std::mt19937_64& rng);

}  // namespace tfse

#endif  // TFSE_DSP_HPP_
