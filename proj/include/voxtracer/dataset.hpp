// Copyright (c) 2026 The VoxTracer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VOXTRACER_DATASET_HPP_
#define VOXTRACER_DATASET_HPP_

#include <map>
#include <string>
#include <vector>

#include "voxtracer/audio.hpp"
#include "voxtracer/util.hpp"

namespace vox {

// Synthetic speaker: harmonic source with speaker-specific formant envelope.
struct ToySpeaker {
  double f0 = 150.0;                 // base pitch, varies per utterance
  double formants[3] = {0, 0, 0};    // resonance centers, Hz
  double widths[3] = {0, 0, 0};      // resonance bandwidths, Hz
  double tilt = 0.0;                 // spectral tilt, dB/octave-ish
};

ToySpeaker make_toy_speaker(std::uint64_t seed, int index);

// Speaker with energy confined to one band; for constructed easy cases.
ToySpeaker make_bandlimited_speaker(double lo_hz, double hi_hz);

Waveform synth_utterance(const ToySpeaker& spk, std::uint64_t seed, int n_samples,
                         int sample_rate = kDefaultSampleRate);

struct ToyDataset {
  std::vector<std::string> speaker_ids;
  std::vector<std::vector<Waveform>> utterances;  // [speaker][utterance]

  std::map<std::string, std::vector<Waveform>> as_map() const;
};

ToyDataset make_toy_dataset(std::uint64_t seed, int n_speakers, int utts_per_speaker, int samples_per_utt,
                            int sample_rate = kDefaultSampleRate);

// data_root/spk##/utt###.wav plus a manifest.tsv
void write_dataset(const ToyDataset& ds, const std::string& data_root);
ToyDataset load_dataset(const std::string& data_root);

}  // namespace vox

#endif  // VOXTRACER_DATASET_HPP_
