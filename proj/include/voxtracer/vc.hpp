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

#ifndef VOXTRACER_VC_HPP_
#define VOXTRACER_VC_HPP_

#include <string>

#include "voxtracer/audio.hpp"

namespace vox {

struct VcRequest {
  Waveform source;
  Waveform target;
};

// Voice conversion is treated as a black box. Two-stage systems hand back a
// mel-spectrogram, one-stage systems a waveform; either is normalized into
// the converted mel that conditions the hiding stage.
struct VcBackend {
  enum class Kind { TwoStage, OneStage, IdentityToy };
  Kind kind = Kind::IdentityToy;

  // Bundled toy one-stage VC: pitch/formant warp by this factor (1.0 = none).
  double warp = 1.0;

  // External plug-in: command with {source}, {target}, {out} placeholders.
  // Empty command selects the bundled toy behavior for the kind.
  std::string command;

  static VcBackend identity_toy() { return VcBackend{}; }
  static VcBackend toy_warp(double factor);
};

// Normalizes the backend output into a converted mel whose frame count is a
// multiple of the chunk's frames (chunk_samples / hop). Waveform-emitting
// backends go through compute_mel; mel-emitting backends pass through.
MelSpectrogram convert_to_mel(const VcRequest& req, const VcBackend& backend, const StftConfig& cfg,
                              int chunk_samples, const std::string& tmp_dir = "/tmp");

// Converted waveform for waveform-emitting backends (identity_toy included);
// two-stage backends have no waveform output and are rejected.
Waveform convert_to_waveform(const VcRequest& req, const VcBackend& backend, int chunk_samples,
                             const std::string& tmp_dir = "/tmp");

// Trim or zero-pad to the nearest chunk boundary (at least one chunk).
Waveform align_to_chunks(const Waveform& w, int chunk_samples);

// Linear-interpolation resampling warp: shifts pitch and formants by factor.
Waveform pitch_shift(const Waveform& w, double factor);

// Mel matrix file for external two-stage backends ("VOXMELF1" binary).
void save_mel(const MelSpectrogram& m, const std::string& path);
MelSpectrogram load_mel(const std::string& path);

}  // namespace vox

#endif  // VOXTRACER_VC_HPP_
