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

#ifndef VOXTRACER_RESTORATION_HPP_
#define VOXTRACER_RESTORATION_HPP_

#include <vector>

#include "voxtracer/embedding.hpp"
#include "voxtracer/flow.hpp"
#include "voxtracer/nn.hpp"

namespace vox {

struct RestorationConfig {
  int bands = 80;
  int content_ch = 16;   // bottleneck channels (<= 32 per frame group)
  int downsample = 4;    // frames per content step
  int dec_ch = 128;
  int emb_proj = 32;
  double vocoder_sigma = 0.6;
};

// Content-encoder / decoder pair in the AutoVC mold: a narrow, instance-
// normalized content bottleneck plus an embedding-conditioned mel decoder.
// The bottleneck is deliberately too tight to pass speaker identity.
class RestorationModel {
 public:
  RestorationModel(const RestorationConfig& cfg, std::uint64_t seed);
  RestorationModel(const RestorationModel&) = delete;
  RestorationModel& operator=(const RestorationModel&) = delete;
  RestorationModel(RestorationModel&&) = default;
  RestorationModel& operator=(RestorationModel&&) = default;

  // mel [bands, T] (channel-major) -> content [content_ch, T/downsample]
  Var content(Tape& t, Var mel_cb) const;
  // content + embedding [1,256] -> mel [bands, T]
  Var decode(Tape& t, Var content_code, Var emb) const;
  Var reconstruct(Tape& t, Var mel_cb, Var emb) const;

  Tensor restore_mel(const MelSpectrogram& degraded, const SpeakerEmbedding& emb) const;  // [frames, bands]

  ParamStore& params() { return ps_; }
  const ParamStore& params() const { return ps_; }
  const RestorationConfig& config() const { return cfg_; }

 private:
  RestorationConfig cfg_;
  ParamStore ps_;
  Conv1dLayer enc1_, enc2_;
  DenseLayer emb_proj_;
  Conv1dLayer dec1_, dec2_, dec3_;
};

struct RestorationTrainConfig {
  int steps = 300;
  int batch = 8;
  int crop_frames = 64;  // multiple of downsample
  double lr = 1e-3;
  std::uint64_t seed = 1;
};

struct RestorationSample {
  MelSpectrogram mel;
  SpeakerEmbedding embedding;
};

// Self-reconstruction training; diverging runs restore the last snapshot.
// Returns final mean L1 per mel entry on the training stream.
double train_restoration(RestorationModel& model, const std::vector<RestorationSample>& data,
                         const RestorationTrainConfig& cfg);

double self_reconstruction_l1(const RestorationModel& model, const std::vector<RestorationSample>& data);

// Content from the degraded mel + recovered embedding -> restored mel ->
// waveform through the flow generator with a seeded random latent.
Waveform restore_speech(const Waveform& degraded, const SpeakerEmbedding& recovered, const RestorationModel& model,
                        const FlowModel& generator, const StftConfig& stft, std::uint64_t vocoder_seed);

}  // namespace vox

#endif  // VOXTRACER_RESTORATION_HPP_
