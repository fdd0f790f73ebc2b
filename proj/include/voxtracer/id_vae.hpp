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

#ifndef VOXTRACER_ID_VAE_HPP_
#define VOXTRACER_ID_VAE_HPP_

#include <utility>

#include "voxtracer/embedding.hpp"
#include "voxtracer/nn.hpp"
#include "voxtracer/tensor.hpp"

namespace vox {

inline constexpr int kPayloadChannels = 4;
inline constexpr int kPayloadTime = 64;
inline constexpr int kLatentChannels = 8;

// 256-D embedding <-> 4x64 payload tensor, channel-major: p(c,t) = v[64c+t].
Tensor embedding_to_payload(const SpeakerEmbedding& v);
SpeakerEmbedding payload_to_embedding_raw(const Tensor& p);  // no normalization
std::vector<double> payload_to_vector(const Tensor& p);

// Diagonal Gaussian over the 8x64 latent.
struct GaussianPosterior {
  Tensor mu;     // [8,64]
  Tensor sigma;  // [8,64], positive
};

// Closed-form D_KL(N(mu, sigma^2 I) || N(0, I)) summed over all entries:
// 0.5 * sum(mu^2 + sigma^2 - 1 - ln sigma^2).
double kl_loss(const GaussianPosterior& q);

struct IdVaeConfig {
  int wn_channels = 128;
  int encoder_layers = 4;
  // decoder WaveNet depth is encoder_layers / 2
  double head_gain = 6.0;     // scales the mu head at init
  double logvar_bias = -2.0;  // initial log-variance
  double logvar_min = -14.0;
  double logvar_max = 4.0;
};

enum class EncodeMode { Sample, Mean };

// Maps speaker embeddings to Gaussian latent codes (the hiding half).
// conv 4->wn_channels, non-causal WaveNet, conv wn_channels->16 where the
// 16-channel head splits into mu and log-variance.
class IdEncoder {
 public:
  IdEncoder(const IdVaeConfig& cfg, std::uint64_t seed);
  IdEncoder(const IdEncoder&) = delete;
  IdEncoder& operator=(const IdEncoder&) = delete;
  IdEncoder(IdEncoder&&) = default;
  IdEncoder& operator=(IdEncoder&&) = default;

  GaussianPosterior posterior(const SpeakerEmbedding& v) const;
  std::pair<GaussianPosterior, Tensor> encode(const SpeakerEmbedding& v, EncodeMode mode, Rng* rng = nullptr) const;

  // Training graph: payload [4,64] -> (mu, log_var) Vars, both [8,64].
  std::pair<Var, Var> forward(Tape& t, Var payload) const;
  // Composed KL objective on the tape (Var is 1x1).
  Var kl_loss_t(Tape& t, Var payload) const;

  ParamStore& params() { return ps_; }
  const ParamStore& params() const { return ps_; }
  const IdVaeConfig& config() const { return cfg_; }

 private:
  IdVaeConfig cfg_;
  ParamStore ps_;
  WaveNet net_;
};

// Maps recovered latent codes back to embeddings (the tracing half).
// conv 8->wn_channels, WaveNet at half the encoder depth, conv ->4,
// reshape to 256-D and L2-normalize.
class IdDecoder {
 public:
  IdDecoder(const IdVaeConfig& cfg, std::uint64_t seed);
  IdDecoder(const IdDecoder&) = delete;
  IdDecoder& operator=(const IdDecoder&) = delete;
  IdDecoder(IdDecoder&&) = default;
  IdDecoder& operator=(IdDecoder&&) = default;

  SpeakerEmbedding decode(const Tensor& latent) const;  // latent [8,64]

  // Training graph: latent Var [8,64] -> normalized embedding Var [1,256].
  Var forward(Tape& t, Var latent) const;

  ParamStore& params() { return ps_; }
  const ParamStore& params() const { return ps_; }

 private:
  IdVaeConfig cfg_;
  ParamStore ps_;
  WaveNet net_;
};

}  // namespace vox

#endif  // VOXTRACER_ID_VAE_HPP_
