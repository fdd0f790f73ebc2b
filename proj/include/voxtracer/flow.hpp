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

#ifndef VOXTRACER_FLOW_HPP_
#define VOXTRACER_FLOW_HPP_

#include <utility>
#include <vector>

#include "voxtracer/audio.hpp"
#include "voxtracer/nn.hpp"
#include "voxtracer/tensor.hpp"

namespace vox {

struct FlowConfig {
  int n_blocks = 6;        // paper-faithful value is 12, toy default 6
  int squeeze = 8;
  int cond_channels = 64;  // coupling conditioner width
  int cond_layers = 4;     // dilated layers per coupling
  int mel_bands = 80;
  int hop = 256;
  double prior_sigma = 1.0;
  bool identity_mixing = false;  // identity 1x1 layers (tests); default random orthogonal
};

// Mel-conditioned invertible flow over squeezed waveforms. The normalize
// direction (audio -> latent) carries the likelihood and serves as the
// speech inverter; generate (latent -> audio) is its exact inverse and
// serves as the vocoder of the hiding stage. Each block is one invertible
// 1x1 channel mixing followed by one affine coupling.
class FlowModel {
 public:
  FlowModel(const FlowConfig& cfg, std::uint64_t seed);
  FlowModel(const FlowModel&) = delete;
  FlowModel& operator=(const FlowModel&) = delete;
  FlowModel(FlowModel&&) = default;
  FlowModel& operator=(FlowModel&&) = default;

  // [8t + c] <-> squeezed(c, t); length must divide by the squeeze factor.
  static Tensor squeeze(const std::vector<double>& samples, int squeeze);
  static std::vector<double> unsqueeze(const Tensor& sq);

  // mel [frames, bands] -> conditioning [bands, frames * hop / squeeze]
  // (nearest-neighbor upsampling along time).
  Tensor upsample_condition(const MelSpectrogram& m) const;

  // Hiding direction: latent [8, T'] + aligned mel -> waveform chunk.
  // Output is not clamped; clamping happens at WAV save time.
  Waveform generate(const Tensor& z, const MelSpectrogram& m, int sample_rate = kDefaultSampleRate) const;

  // Tracing direction: waveform chunk + mel -> latent [8, T'].
  Tensor invert(const Waveform& x, const MelSpectrogram& m) const;

  // log p(z) under N(0, prior_sigma^2 I) plus the total log|det| of the
  // normalize direction.
  double log_likelihood(const Waveform& x, const MelSpectrogram& m) const;

  // Raw-conditioning variants used by tests and tiny instances.
  std::pair<Tensor, double> normalize_cond(const Tensor& x_sq, const Tensor& cond) const;
  Tensor generate_cond(const Tensor& z, const Tensor& cond) const;

  // Training graph: (z Var [8,T'], logdet Var [1,1]).
  std::pair<Var, Var> normalize_t(Tape& t, Var x_sq, Var cond) const;
  // -(log p(z) + logdet); the additive normalization constant is included.
  Var neg_log_likelihood_t(Tape& t, Var x_sq, Var cond) const;

  void copy_params_from(const FlowModel& other);
  // |det| of every mixing matrix must stay above this; checked on load and
  // after optimizer steps.
  void check_mixing_invertible() const;

  ParamStore& params() { return ps_; }
  const ParamStore& params() const { return ps_; }
  const FlowConfig& config() const { return cfg_; }

 private:
  struct Block {
    Tensor* mixing = nullptr;  // [8,8]
    WaveNet coupling;          // half -> (log_s, t)
  };

  FlowConfig cfg_;
  ParamStore ps_;
  std::vector<Block> blocks_;
};

// z(c, t) = payload(c, t mod 64): the 8x64 ID latent repeated along time.
Tensor tile_payload(const Tensor& payload, int reps);
// Mean over the tiles; inverse of tile_payload in expectation.
Tensor untile_mean(const Tensor& z, int period);

}  // namespace vox

#endif  // VOXTRACER_FLOW_HPP_
