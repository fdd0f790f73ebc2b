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

#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "voxtracer/dataset.hpp"
#include "voxtracer/flow.hpp"
#include "voxtracer/nn.hpp"
#include "voxtracer/training.hpp"

using namespace vox;

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

FlowConfig tiny_config(int blocks, int t_cond_bands = 80) {
  FlowConfig cfg;
  cfg.n_blocks = blocks;
  cfg.cond_channels = 16;
  cfg.cond_layers = 2;
  cfg.mel_bands = t_cond_bands;
  return cfg;
}

Tensor random_cond(int bands, int t, std::uint64_t seed) {
  Rng rng(seed);
  return Tensor::randn(bands, t, rng, 1.0);
}

}  // namespace

TEST_SUITE_BEGIN("flow");

TEST_CASE("squeeze layout and round trip") {
  std::vector<double> x(16);
  for (int i = 0; i < 16; ++i) x[i] = i;
  Tensor sq = FlowModel::squeeze(x, 8);
  REQUIRE(sq.rows() == 8);
  REQUIRE(sq.cols() == 2);
  for (int t = 0; t < 2; ++t)
    for (int c = 0; c < 8; ++c) CHECK(sq(c, t) == 8 * t + c);

  Rng rng(1);
  std::vector<double> y(16384);
  for (double& v : y) v = rng.gaussian();
  Tensor sq2 = FlowModel::squeeze(y, 8);
  CHECK(sq2.rows() == 8);
  CHECK(sq2.cols() == 2048);
  std::vector<double> back = FlowModel::unsqueeze(sq2);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(back[i] == y[i]);

  CHECK_THROWS_AS(FlowModel::squeeze(std::vector<double>(15), 8), RuntimeError);
  CHECK_THROWS_AS(FlowModel::squeeze({}, 8), RuntimeError);
}

TEST_CASE("identity-initialized model is the unsqueeze map") {
  FlowConfig cfg = tiny_config(3);
  cfg.identity_mixing = true;  // couplings are zero-initialized by default
  FlowModel flow(cfg, 7);

  Rng rng(2);
  Tensor z = Tensor::randn(8, 64, rng);
  Tensor cond = random_cond(cfg.mel_bands, 64, 3);
  Tensor x = flow.generate_cond(z, cond);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(x[i] == doctest::Approx(z[i]).epsilon(1e-14));

  auto [z2, logdet] = flow.normalize_cond(x, cond);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(z2[i] == doctest::Approx(z[i]).epsilon(1e-14));
  CHECK(logdet == doctest::Approx(0.0));
}

TEST_CASE("default init has orthogonal mixings (zero log-det) and identity couplings") {
  FlowConfig cfg = tiny_config(4);
  FlowModel flow(cfg, 8);
  Rng rng(4);
  Tensor x = Tensor::randn(8, 32, rng);
  Tensor cond = random_cond(cfg.mel_bands, 32, 5);
  auto [z, logdet] = flow.normalize_cond(x, cond);
  CHECK(std::abs(logdet) < 1e-9);
  double norm_x = 0.0, norm_z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    norm_x += x[i] * x[i];
    norm_z += z[i] * z[i];
  }
  CHECK(norm_z == doctest::Approx(norm_x).epsilon(1e-9));  // orthogonal maps preserve norm
}

TEST_CASE("bijectivity on randomized couplings") {
  FlowConfig cfg = tiny_config(6);
  FlowModel flow(cfg, 9);
  oracle::randomize_flow_couplings(flow, 10, 0.2);
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor z = Tensor::randn(8, 128, rng);
    Tensor cond = random_cond(cfg.mel_bands, 128, 100 + trial);
    Tensor x = flow.generate_cond(z, cond);
    Tensor z2 = flow.normalize_cond(x, cond).first;
    double max_err = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) max_err = std::max(max_err, std::abs(z2[i] - z[i]));
    CHECK(max_err <= 1e-3);  // double arithmetic lands far below the contract bound
  }
}

TEST_CASE("analytic log-det matches the finite-difference jacobian oracle") {
  FlowConfig cfg = tiny_config(1);
  FlowModel flow(cfg, 12);
  oracle::randomize_flow_couplings(flow, 13, 0.3);
  Rng rng(14);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor x = Tensor::randn(8, 1, rng);  // 8 samples, one squeezed step
    Tensor cond = random_cond(cfg.mel_bands, 1, 200 + trial);
    const double analytic = flow.normalize_cond(x, cond).second;
    const double numeric = oracle::fd_jacobian_logdet(flow, x, cond);
    CHECK(std::abs(analytic - numeric) <= 1e-4);
  }
}

TEST_CASE("log likelihood equals the prior density for the identity model") {
  FlowConfig cfg = tiny_config(2);
  cfg.identity_mixing = true;
  FlowModel flow(cfg, 15);
  Rng rng(16);
  Tensor z = Tensor::randn(8, 64, rng);
  Waveform x;
  x.samples = FlowModel::unsqueeze(z);
  MelSpectrogram m;
  m.hop = 256;
  m.bands = cfg.mel_bands;
  m.values = Tensor::zeros(2, cfg.mel_bands);  // 512 samples = 2 frames
  const double ll = flow.log_likelihood(x, m);
  double expect = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) expect -= 0.5 * z[i] * z[i];
  expect -= 0.5 * static_cast<double>(z.size()) * kLog2Pi;
  CHECK(ll == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("adding a constant to every coupling log-scale shifts the log-det exactly") {
  FlowConfig cfg = tiny_config(1);
  FlowModel flow(cfg, 17);
  oracle::randomize_flow_couplings(flow, 18, 0.2);
  Rng rng(19);
  const int T = 32;
  Tensor x = Tensor::randn(8, T, rng);
  Tensor cond = random_cond(cfg.mel_bands, T, 20);
  const double before = flow.normalize_cond(x, cond).second;

  const double delta = 0.37;
  for (std::size_t i = 0; i < flow.params().size(); ++i) {
    if (flow.params().name(i).find(".wn.out.b") == std::string::npos) continue;
    Tensor& b = flow.params().value(i);
    for (int r = 0; r < 4; ++r) b(r, 0) += delta;  // log-scale rows only
  }
  const double after = flow.normalize_cond(x, cond).second;
  const double entries = 4.0 * T;  // affected log-scale entries in the single coupling
  CHECK(after - before == doctest::Approx(entries * delta).epsilon(1e-10));
}

TEST_CASE("negative log likelihood gradient matches central differences on a tiny flow") {
  FlowConfig cfg;
  cfg.n_blocks = 1;
  cfg.cond_channels = 4;
  cfg.cond_layers = 1;
  cfg.mel_bands = 3;
  FlowModel flow(cfg, 21);
  oracle::randomize_flow_couplings(flow, 22, 0.3);
  Rng rng(23);
  Tensor x = Tensor::randn(8, 4, rng);
  Tensor cond = random_cond(cfg.mel_bands, 4, 24);

  auto loss_fn = [&]() {
    Tape t;
    return flow.neg_log_likelihood_t(t, t.leaf(x), t.leaf(cond)).val()[0];
  };
  auto grad_fn = [&]() {
    Tape t;
    Var l = flow.neg_log_likelihood_t(t, t.leaf(x), t.leaf(cond));
    t.backward(l);
    GradMap g;
    t.accumulate_param_grads(g);
    return g;
  };
  CHECK(gradient_check(flow.params().all(), loss_fn, grad_fn, 1e-5) <= 1e-3);
}

TEST_CASE("shape mismatches are rejected") {
  FlowConfig cfg = tiny_config(2);
  FlowModel flow(cfg, 25);
  Rng rng(26);
  Tensor z = Tensor::randn(8, 64, rng);
  Tensor bad_cond = random_cond(cfg.mel_bands, 32, 27);
  CHECK_THROWS_AS(flow.generate_cond(z, bad_cond), RuntimeError);
  CHECK_THROWS_AS(flow.normalize_cond(Tensor::randn(4, 64, rng), random_cond(cfg.mel_bands, 64, 28)), RuntimeError);

  MelSpectrogram m;
  m.hop = 256;
  m.bands = cfg.mel_bands;
  m.values = Tensor::zeros(3, cfg.mel_bands);
  CHECK_THROWS_AS(flow.generate(z, m), RuntimeError);  // 3 frames != 64 cols * 8 / 256
}

TEST_CASE("mel conditioning is deterministic end to end") {
  FlowConfig cfg = tiny_config(3);
  FlowModel flow(cfg, 29);
  oracle::randomize_flow_couplings(flow, 30, 0.2);
  Rng rng(31);
  Tensor z = Tensor::randn(8, 64, rng);
  MelSpectrogram m;
  m.hop = 256;
  m.bands = cfg.mel_bands;
  m.values = Tensor::randn(2, cfg.mel_bands, rng);
  Waveform a = flow.generate(z, m);
  Waveform b = flow.generate(z, m);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i] == b.samples[i]);
}

TEST_CASE("payload tiling and untiling") {
  Rng rng(32);
  Tensor p = Tensor::randn(8, 64, rng);
  Tensor z = tile_payload(p, 32);
  REQUIRE(z.cols() == 2048);
  for (int c = 0; c < z.cols(); ++c)
    for (int r = 0; r < 8; ++r) CHECK(z(r, c) == p(r, c % 64));
  Tensor back = untile_mean(z, 64);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(back[i] == doctest::Approx(p[i]).epsilon(1e-12));
}

TEST_CASE("likelihood training gains at least one nat per dimension") {
  // toy training run, fixed seed: real synthetic audio, small flow
  FlowConfig cfg;
  cfg.n_blocks = 2;
  cfg.cond_channels = 24;
  cfg.cond_layers = 2;
  FlowModel flow(cfg, 33);

  ToySpeaker spk = make_toy_speaker(34, 0);
  StftConfig stft;
  HidingDataset data;
  for (int u = 0; u < 3; ++u) {
    HidingItem item;
    item.speaker_id = "spk";
    item.audio = synth_utterance(spk, 35 + u, 2 * kChunkSamples);
    item.mel = compute_mel(item.audio, stft);
    item.embedding = SpeakerEmbedding::from_raw(std::vector<double>(kEmbeddingDim, 1.0));
    data.push_back(std::move(item));
  }
  // held-out chunk
  Waveform held = synth_utterance(spk, 99, kChunkSamples);
  MelSpectrogram held_mel = compute_mel(held, stft);

  const double before = flow.log_likelihood(held, held_mel) / kChunkSamples;

  TrainConfig tc;
  tc.seed = 36;
  tc.encoder_steps = 0;
  tc.generator_steps = 120;
  tc.batch_generator = 8;
  tc.generator_crop = 2048;
  tc.lr = 3e-3;  // toy-scale schedule for the small flow
  IdEncoder dummy_enc(IdVaeConfig{.wn_channels = 8, .encoder_layers = 1}, 37);
  train_hiding(data, tc, dummy_enc, flow);

  const double after = flow.log_likelihood(held, held_mel) / kChunkSamples;
  MESSAGE("held-out ll/dim before ", before, " after ", after);
  CHECK(after - before >= 1.0);
}

TEST_SUITE_END();
