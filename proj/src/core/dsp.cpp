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

#include "tfse/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "tfse/error.hpp"

namespace tfse {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    real_ = fftw_alloc_real(n);
    cplx_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), real_, cplx_, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), cplx_, real_, FFTW_ESTIMATE);
  }
  ~FftPlan() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(real_);
    fftw_free(cplx_);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  void forward(std::span<const double> in, std::span<std::complex<double>> out) {
    std::fill(real_, real_ + n_, 0.0);
    std::copy_n(in.data(), std::min(in.size(), n_), real_);
    fftw_execute(fwd_);
    for (std::size_t k = 0; k <= n_ / 2; ++k) out[k] = {cplx_[k][0], cplx_[k][1]};
  }
  // Unnormalized inverse: returns n * x.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out) {
    for (std::size_t k = 0; k <= n_ / 2; ++k) {
      cplx_[k][0] = in[k].real();
      cplx_[k][1] = in[k].imag();
    }
    fftw_execute(inv_);
    std::copy_n(real_, n_, out.data());
  }

 private:
  std::size_t n_;
  double* real_;
  fftw_complex* cplx_;
  fftw_plan fwd_;
  fftw_plan inv_;
};

FftPlan& plan_for(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<FftPlan>> plans;
  auto& p = plans[n];
  if (!p) p = std::make_unique<FftPlan>(n);
  return *p;
}

std::uint32_t u32(const unsigned char* p) { return p[0] | p[1] << 8 | p[2] << 16 | static_cast<std::uint32_t>(p[3]) << 24; }
std::uint16_t u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | p[1] << 8); }

void put32(std::string& s, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) s.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}
void put16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xFF));
  s.push_back(static_cast<char>(v >> 8));
}

}  // namespace

void rfft(std::span<const double> frame, std::size_t nfft, std::span<std::complex<double>> out) {
  require(out.size() >= nfft / 2 + 1, Errc::dimension, "rfft output too small");
  plan_for(nfft).forward(frame, out);
}

Waveform read_wav(const std::string& path, WavEncoding* enc) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), Errc::io, "cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  require(buf.size() >= 12 && std::memcmp(buf.data(), "RIFF", 4) == 0 &&
              std::memcmp(buf.data() + 8, "WAVE", 4) == 0,
          Errc::format, path + ": not a RIFF/WAVE file");
  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  bool have_data = false;
  while (pos + 8 <= buf.size()) {
    const unsigned char* ck = buf.data() + pos;
    const std::size_t len = u32(ck + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min(len, buf.size() - body);
    if (std::memcmp(ck, "fmt ", 4) == 0) {
      require(avail >= 16, Errc::format, path + ": short fmt chunk");
      format = u16(ck + 8);
      channels = u16(ck + 10);
      rate = u32(ck + 12);
      bits = u16(ck + 22);
      if (format == 0xFFFE && avail >= 26) format = u16(ck + 8 + 24);
      have_fmt = true;
    } else if (std::memcmp(ck, "data", 4) == 0) {
      data = ck + 8;
      data_len = avail;
      have_data = true;
    }
    pos = body + len + (len & 1);
  }
  require(have_fmt && have_data, Errc::format, path + ": missing fmt or data chunk");
  require(channels == 1, Errc::format,
          path + ": expected mono, found " + std::to_string(channels) + " channels");
  const bool pcm16 = format == 1 && bits == 16;
  const bool f32 = format == 3 && bits == 32;
  require(pcm16 || f32, Errc::format,
          path + ": unsupported codec (format " + std::to_string(format) + ", " +
              std::to_string(bits) + " bits); need PCM16 or float32");
  require(rate == static_cast<std::uint32_t>(kSampleRate), Errc::rate,
          path + ": sample rate " + std::to_string(rate) + " Hz, expected 16000");
  const std::size_t width = bits / 8;
  const std::size_t n = data_len / width;
  require(n > 0, Errc::format, path + ": zero-length payload");
  Waveform w;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (pcm16)
      w.samples[i] = static_cast<std::int16_t>(u16(data + 2 * i)) / 32768.0;
    else
      w.samples[i] = std::bit_cast<float>(u32(data + 4 * i));
  }
  for (double v : w.samples) require(std::isfinite(v), Errc::format, path + ": non-finite sample");
  if (enc) *enc = pcm16 ? WavEncoding::pcm16 : WavEncoding::float32;
  return w;
}

void write_wav(const std::string& path, const Waveform& w, WavEncoding enc) {
  require(w.sample_rate == kSampleRate, Errc::rate, "write_wav: only 16 kHz is supported");
  const std::uint16_t bits = enc == WavEncoding::pcm16 ? 16 : 32;
  const std::uint32_t data_len = static_cast<std::uint32_t>(w.samples.size() * bits / 8);
  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  put32(out, 36 + data_len);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, enc == WavEncoding::pcm16 ? 1 : 3);
  put16(out, 1);
  put32(out, kSampleRate);
  put32(out, kSampleRate * bits / 8);
  put16(out, bits / 8);
  put16(out, bits);
  out += "data";
  put32(out, data_len);
  for (double v : w.samples) {
    require(std::isfinite(v), Errc::numeric, "write_wav: non-finite sample");
    if (enc == WavEncoding::pcm16) {
      const double q = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
      put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    } else {
      put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(os), Errc::io, "cannot write " + path);
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  require(static_cast<bool>(os), Errc::io, "short write on " + path);
}

const std::vector<double>& sqrt_hann_window() {
  static const std::vector<double> win = [] {
    std::vector<double> w(kFrameLen);
    for (std::size_t n = 0; n < kFrameLen; ++n)
      w[n] = std::sqrt(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / kFrameLen));
    return w;
  }();
  return win;
}

std::size_t frame_count(std::size_t n_samples) { return (n_samples + kHop - 1) / kHop + 1; }

Spectrogram stft(const Waveform& w) {
  require(w.sample_rate == kSampleRate, Errc::rate, "stft: expected 16 kHz input");
  require(!w.samples.empty(), Errc::length, "stft: empty signal");
  const std::size_t frames = frame_count(w.size());
  std::vector<double> padded((frames + 1) * kHop, 0.0);
  std::copy(w.samples.begin(), w.samples.end(), padded.begin() + kHop);
  const auto& win = sqrt_hann_window();
  Spectrogram spec;
  spec.frames = frames;
  spec.values.resize(frames * kBins);
  std::vector<double> frame(kFrameLen);
  auto& plan = plan_for(kFrameLen);
  for (std::size_t l = 0; l < frames; ++l) {
    for (std::size_t n = 0; n < kFrameLen; ++n) frame[n] = padded[l * kHop + n] * win[n];
    plan.forward(frame, std::span(spec.values).subspan(l * kBins, kBins));
  }
  return spec;
}

Waveform istft(const Spectrogram& spec, std::size_t out_len) {
  require(spec.values.size() == spec.frames * kBins, Errc::dimension, "istft: malformed spectrogram");
  std::vector<double> acc((spec.frames + 1) * kHop, 0.0);
  const auto& win = sqrt_hann_window();
  std::vector<double> frame(kFrameLen);
  auto& plan = plan_for(kFrameLen);
  for (std::size_t l = 0; l < spec.frames; ++l) {
    plan.inverse(std::span(spec.values).subspan(l * kBins, kBins), frame);
    for (std::size_t n = 0; n < kFrameLen; ++n)
      acc[l * kHop + n] += frame[n] / static_cast<double>(kFrameLen) * win[n];
  }
  Waveform w;
  w.samples.assign(out_len, 0.0);
  for (std::size_t i = 0; i < out_len && i + kHop < acc.size(); ++i) w.samples[i] = acc[i + kHop];
  return w;
}

Mask psm(const Spectrogram& clean, const Spectrogram& noisy, bool clamp) {
  require(clean.frames == noisy.frames && clean.values.size() == noisy.values.size(),
          Errc::dimension,
          "psm: clean has " + std::to_string(clean.frames) + " frames, noisy has " +
              std::to_string(noisy.frames));
  Mask m;
  m.frames = clean.frames;
  m.values.resize(clean.values.size());
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    const auto& s = clean.values[i];
    const auto& x = noisy.values[i];
    const double ax = std::abs(x);
    double v = 0.0;
    // |S|/|X| cos(dphi) == Re(S conj X) / |X|^2
    if (ax >= 1e-8) v = (s * std::conj(x)).real() / (ax * ax);
    if (clamp) v = std::clamp(v, 0.0, 1.0);
    m.values[i] = v;
  }
  return m;
}

Spectrogram apply_mask(const Spectrogram& noisy, const Mask& mask) {
  require(noisy.frames == mask.frames && mask.values.size() == noisy.values.size(), Errc::dimension,
          "apply_mask: mask/spectrogram shape mismatch");
  Spectrogram out = noisy;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] *= mask.values[i];
  return out;
}

std::vector<double> magnitude(const Spectrogram& spec) {
  std::vector<double> m(spec.values.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = std::abs(spec.values[i]);
  return m;
}

double mean_power(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

Mixture mix_at_snr(const Waveform& speech, const Waveform& noise, double snr_db,
                   std::mt19937_64& rng) {
  require(std::isfinite(snr_db), Errc::contract, "mix_at_snr: SNR must be finite");
  require(noise.size() >= speech.size(), Errc::contract,
          "mix_at_snr: noise (" + std::to_string(noise.size()) + " samples) shorter than speech (" +
              std::to_string(speech.size()) + ")");
  const std::size_t span_len = noise.size() - speech.size();
  std::uniform_int_distribution<std::size_t> pick(0, span_len);
  Mixture m;
  m.noise_offset = pick(rng);
  std::span<const double> seg(noise.samples.data() + m.noise_offset, speech.size());
  const double ps = mean_power(speech.samples);
  const double pn = mean_power(seg);
  require(ps > 0.0, Errc::degenerate, "mix_at_snr: speech has zero power");
  require(pn > 0.0, Errc::degenerate, "mix_at_snr: noise segment has zero power");
  const double gain = std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
  m.scaled_noise.samples.resize(speech.size());
  m.mixture.samples.resize(speech.size());
  for (std::size_t i = 0; i < speech.size(); ++i) {
    m.scaled_noise.samples[i] = gain * seg[i];
    m.mixture.samples[i] = speech.samples[i] + m.scaled_noise.samples[i];
  }
  return m;
}

}  // namespace tfse
