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

#ifndef VOXTRACER_AUDIO_HPP_
#define VOXTRACER_AUDIO_HPP_

#include <string>
#include <vector>

#include "voxtracer/tensor.hpp"

namespace vox {

inline constexpr int kDefaultSampleRate = 22050;
inline constexpr int kChunkSamples = 16384;  // ~0.743 s at 22050 Hz, multiple of hop and squeeze
inline constexpr double kMelLogFloor = -11.512925464970229;  // ln(1e-5)

// Mono audio in [-1, 1]. The unit of hiding, transmission and tracing.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;

  std::size_t size() const { return samples.size(); }
  double duration_seconds() const { return samples.empty() ? 0.0 : static_cast<double>(samples.size()) / sample_rate; }
};

struct StftConfig {
  int window_length = 1024;
  int hop = 256;
  int bands = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
};

// Log-magnitude mel features, frames x bands. Every entry >= kMelLogFloor.
struct MelSpectrogram {
  Tensor values;  // [frames, bands]
  int hop = 256;
  int bands = 80;

  int frames() const { return values.rows(); }
};

// STFT + mel filterbank + log. Reflect-pads by window_length/2 on both sides
// and drops the trailing frame so frames == len/hop for hop-aligned input.
// Pure: identical inputs give bit-identical outputs.
MelSpectrogram compute_mel(const Waveform& w, const StftConfig& cfg);

// Non-overlapping consecutive chunks; the remainder shorter than
// chunk_samples is discarded.
std::vector<Waveform> chunk_split(const Waveform& w, int chunk_samples);

// PCM16 little-endian mono RIFF. Samples are clamped to [-1, 1] and rounded
// half-away-from-zero with symmetric clamp at +/-32767 before writing, so a
// save/load round trip has max abs error <= 1/32767.
void save_wav(const Waveform& w, const std::string& path);
Waveform load_wav(const std::string& path);

// The exact sample quantizer used by save_wav, exposed for the channel
// simulator (WAV saving error is the first transmission distortion).
int16_t quantize_pcm16(double x);
Waveform quantize_waveform(const Waveform& w);

// In-place complex radix-2 FFT over re/im arrays of power-of-two length.
void fft_complex(std::vector<double>& re, std::vector<double>& im, bool inverse);

// Triangular mel filterbank [bands, window/2 + 1] on the HTK mel scale.
Tensor mel_filterbank(int bands, int fft_size, int sample_rate, double fmin, double fmax);

}  // namespace vox

#endif  // VOXTRACER_AUDIO_HPP_
