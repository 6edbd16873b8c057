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

// Built-in synthetic corpus: harmonic "speech" with gliding pitch, formant
// colouring and syllabic gating, and coloured "noise" from filtered white
// noise. Used for desk-scale training and tests.

#ifndef TFSE_SYNTH_HPP_
#define TFSE_SYNTH_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "tfse/dsp.hpp"
#include "tfse/module.hpp"

namespace tfse {

Waveform synth_speech(Rng& rng, double seconds);
Waveform synth_noise(Rng& rng, double seconds);

struct Corpus {
  std::vector<Waveform> speech;
  std::vector<Waveform> noise;
};

Corpus synth_corpus(std::size_t n_speech, std::size_t n_noise, double seconds, std::uint64_t seed);

// Manifest lines "speech <wav>" / "noise <wav>"; relative paths resolve
// against the manifest directory.
Corpus load_corpus_manifest(const std::string& path);

struct EvalItem {
  std::string clean_path, noise_path;
  double snr_db = 0;
};

// Lines "<clean wav> <noise wav> <snr dB>".
std::vector<EvalItem> load_eval_manifest(const std::string& path);

// Writes speech/ and noise/ WAVs plus train.lst (corpus manifest) and
// eval.lst (every eval clip at -5, 0, 5, 10, 15 dB) under dir.
void write_synth_corpus(const std::string& dir, std::size_t n_speech, std::size_t n_noise,
                        std::size_t n_eval, double seconds, std::uint64_t seed);

}  // namespace tfse

#endif  // TFSE_SYNTH_HPP_
