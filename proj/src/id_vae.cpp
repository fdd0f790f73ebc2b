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

#include "voxtracer/id_vae.hpp"

#include <cmath>

#include "voxtracer/errors.hpp"

namespace vox {

Tensor embedding_to_payload(const SpeakerEmbedding& v) {
  if (static_cast<int>(v.values.size()) != kEmbeddingDim) throw RuntimeError("payload: embedding must be 256-D");
  Tensor p = Tensor::uninit(kPayloadChannels, kPayloadTime);
  for (int c = 0; c < kPayloadChannels; ++c)
    for (int t = 0; t < kPayloadTime; ++t) p(c, t) = v.values[c * kPayloadTime + t];
  return p;
}

std::vector<double> payload_to_vector(const Tensor& p) {
  if (p.rows() != kPayloadChannels || p.cols() != kPayloadTime) throw RuntimeError("payload: expected 4x64");
  std::vector<double> v(kEmbeddingDim);
  for (int c = 0; c < kPayloadChannels; ++c)
    for (int t = 0; t < kPayloadTime; ++t) v[c * kPayloadTime + t] = p(c, t);
  return v;
}

SpeakerEmbedding payload_to_embedding_raw(const Tensor& p) {
  SpeakerEmbedding e;
  e.values = payload_to_vector(p);
  return e;
}

double kl_loss(const GaussianPosterior& q) {
  if (!q.mu.same_shape(q.sigma)) throw RuntimeError("kl_loss: mu/sigma shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < q.mu.size(); ++i) {
    const double s = q.sigma[i];
    if (!(s > 0.0)) throw RuntimeError("kl_loss: sigma must be positive");
    const double s2 = s * s;
    acc += q.mu[i] * q.mu[i] + s2 - 1.0 - std::log(s2);
  }
  return 0.5 * acc;
}

IdEncoder::IdEncoder(const IdVaeConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  Rng rng(derive_seed(seed, 0x1DE));
  net_ = WaveNet::create(ps_, "id_enc", kPayloadChannels, 2 * kLatentChannels, cfg.wn_channels,
                         cfg.encoder_layers, /*cond_ch=*/0, rng, /*zero_out=*/false);
  // A moderate-scale head keeps the map injective before KL training starts:
  // mu entries land near unit scale, log-variance near logvar_bias.
  Tensor& w = *net_.out_conv.w;
  for (int r = 0; r < kLatentChannels; ++r)
    for (int c = 0; c < w.cols(); ++c) w(r, c) *= cfg.head_gain;
  for (int r = kLatentChannels; r < 2 * kLatentChannels; ++r)
    for (int c = 0; c < w.cols(); ++c) w(r, c) *= 0.1;
  for (int r = kLatentChannels; r < 2 * kLatentChannels; ++r) (*net_.out_conv.b)(r, 0) = cfg.logvar_bias;
}

std::pair<Var, Var> IdEncoder::forward(Tape& t, Var payload) const {
  if (payload.rows() != kPayloadChannels || payload.cols() != kPayloadTime)
    throw RuntimeError("id encoder: payload must be 4x64");
  Var head = net_.apply(t, payload);
  Var mu = ad::slice_rows(head, 0, kLatentChannels);
  Var log_var = ad::clamp_v(ad::slice_rows(head, kLatentChannels, 2 * kLatentChannels), cfg_.logvar_min, cfg_.logvar_max);
  return {mu, log_var};
}

Var IdEncoder::kl_loss_t(Tape& t, Var payload) const {
  auto [mu, log_var] = forward(t, payload);
  Var s1 = ad::sum_squares(mu);
  Var s2 = ad::sum_all(ad::exp_v(log_var));
  Var s3 = ad::sum_all(log_var);
  Var acc = ad::add(s1, ad::sub(s2, s3));
  return ad::scale(ad::add_const(acc, -static_cast<double>(mu.val().size())), 0.5);
}

GaussianPosterior IdEncoder::posterior(const SpeakerEmbedding& v) const {
  Tape t(/*grad_enabled=*/false);
  Var payload = t.leaf(embedding_to_payload(v));
  auto [mu, log_var] = forward(t, payload);
  GaussianPosterior q;
  q.mu = mu.val();
  q.sigma = log_var.val();
  for (std::size_t i = 0; i < q.sigma.size(); ++i) q.sigma[i] = std::exp(0.5 * q.sigma[i]);
  return q;
}

std::pair<GaussianPosterior, Tensor> IdEncoder::encode(const SpeakerEmbedding& v, EncodeMode mode, Rng* rng) const {
  GaussianPosterior q = posterior(v);
  Tensor z = q.mu;
  if (mode == EncodeMode::Sample) {
    if (rng == nullptr) throw RuntimeError("encode: sample mode needs an rng");
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += q.sigma[i] * rng->gaussian();
  }
  return {std::move(q), std::move(z)};
}

IdDecoder::IdDecoder(const IdVaeConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  Rng rng(derive_seed(seed, 0x1DD));
  const int depth = std::max(1, cfg.encoder_layers / 2);
  net_ = WaveNet::create(ps_, "id_dec", kLatentChannels, kPayloadChannels, cfg.wn_channels, depth,
                         /*cond_ch=*/0, rng, /*zero_out=*/false);
}

Var IdDecoder::forward(Tape& t, Var latent) const {
  if (latent.rows() != kLatentChannels || latent.cols() != kPayloadTime)
    throw RuntimeError("id decoder: latent must be 8x64");
  Var out = net_.apply(t, latent);                       // [4,64]
  Var flat = ad::reshape(out, 1, kEmbeddingDim);         // row-major == channel-major payload order
  return ad::rows_l2_normalize(flat);
}

SpeakerEmbedding IdDecoder::decode(const Tensor& latent) const {
  Tape t(/*grad_enabled=*/false);
  Var z = t.leaf(latent);
  Var e = forward(t, z);
  return SpeakerEmbedding::from_raw(e.val().to_vector());
}

}  // namespace vox
