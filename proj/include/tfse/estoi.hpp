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

// Extended short-time objective intelligibility and simple SNR metrics.

#ifndef TFSE_ESTOI_HPP_
#define TFSE_ESTOI_HPP_

#include <span>
#include <vector>

#include "tfse/dsp.hpp"

namespace tfse {

// Rational-factor resampler (up/down) with a Kaiser-windowed sinc low-pass,
// half-length 10 * max(up, down) taps at the upsampled rate, beta 5.
std::vector<double> resample(std::span<const double> x, int up, int down);

// Frame-energy based removal of frames more than `dyn_range_db` below the
// loudest frame of x; the same frames are dropped from y.
void remove_silent_frames(std::vector<double>& x, std::vector<double>& y, double dyn_range_db,
                          std::size_t frame_len, std::size_t hop);

// Equal-length 16 kHz signals. Internally 10 kHz, 256-sample frames with
// hop 128, 15 one-third-octave bands from 150 Hz and 30-frame (384 ms)
// segments. Clips yielding fewer than 30 frames raise a length error.
double estoi(const Waveform& clean, const Waveform& processed);

// 10 log10(|ref|^2 / |ref - est|^2), capped at 120 dB.
double snr_db(std::span<const double> ref, std::span<const double> est);
inline constexpr double kSnrCapDb = 120.0;

}  // namespace tfse

#endif  // TFSE_ESTOI_HPP_
