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
#include "voxtracer/id_vae.hpp"
#include "voxtracer/nn.hpp"
#include "voxtracer/training.hpp"

using namespace vox;

namespace {

SpeakerEmbedding random_embedding(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(kEmbeddingDim);
  for (double& x : v) x = rng.gaussian();
  return SpeakerEmbedding::from_raw(std::move(v));
}

}  // namespace

TEST_SUITE_BEGIN("idvae");

TEST_CASE("payload reshape is an exact bijection") {
  SpeakerEmbedding v = random_embedding(1);
  Tensor p = embedding_to_payload(v);
  REQUIRE(p.rows() == 4);
  REQUIRE(p.cols() == 64);
  // channel-major: p(c,t) = v[64c + t]
  CHECK(p(0, 0) == v.values[0]);
  CHECK(p(1, 0) == v.values[64]);
  CHECK(p(2, 5) == v.values[133]);
  std::vector<double> back = payload_to_vector(p);
  for (int i = 0; i < kEmbeddingDim; ++i) CHECK(back[i] == v.values[i]);
}

TEST_CASE("kl closed form anchors") {
  GaussianPosterior q;
  q.mu = Tensor::zeros(8, 64);
  q.sigma = Tensor::full(8, 64, 1.0);
  CHECK(kl_loss(q) == 0.0);

  GaussianPosterior one;
  one.mu = Tensor::full(1, 1, 1.0);
  one.sigma = Tensor::full(1, 1, 1.0);
  CHECK(kl_loss(one) == doctest::Approx(0.5).epsilon(1e-12));

  GaussianPosterior bad;
  bad.mu = Tensor::zeros(1, 1);
  bad.sigma = Tensor::zeros(1, 1);
  CHECK_THROWS_AS(kl_loss(bad), RuntimeError);
}

TEST_CASE("kl is nonnegative and zero only at the prior") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    GaussianPosterior q;
    q.mu = Tensor::randn(2, 3, rng, 0.7);
    q.sigma = Tensor::uninit(2, 3);
    for (std::size_t i = 0; i < q.sigma.size(); ++i) q.sigma[i] = std::exp(0.6 * rng.gaussian());
    const double kl = kl_loss(q);
    CHECK(kl >= 0.0);
    double dist = 0.0;
    for (std::size_t i = 0; i < q.mu.size(); ++i)
      dist += std::abs(q.mu[i]) + std::abs(q.sigma[i] - 1.0);
    if (kl <= 1e-9) CHECK(dist < 1e-3);
    if (dist == 0.0) CHECK(kl <= 1e-9);
  }
}

TEST_CASE("kl matches the monte-carlo oracle within 3 standard errors") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    GaussianPosterior q;
    q.mu = Tensor::randn(2, 4, rng, 0.8);
    q.sigma = Tensor::uninit(2, 4);
    for (std::size_t i = 0; i < q.sigma.size(); ++i) q.sigma[i] = std::exp(0.5 * rng.gaussian());
    const double closed = kl_loss(q);
    const oracle::McKl mc = oracle::mc_kl(q, 100000, 1000 + trial);
    CHECK(std::abs(closed - mc.mean) <= 3.0 * mc.stderr_);
  }
}

TEST_CASE("kl gradient matches central differences") {
  // direct parameterization in (mu, log sigma^2), as the encoder emits it
  Rng rng(4);
  Tensor mu = Tensor::randn(2, 3, rng, 0.5);
  Tensor log_var = Tensor::randn(2, 3, rng, 0.5);
  auto build = [&](Tape& t, Var m, Var lv) {
    Var s1 = ad::sum_squares(m);
    Var s2 = ad::sum_all(ad::exp_v(lv));
    Var s3 = ad::sum_all(lv);
    return ad::scale(ad::add_const(ad::add(s1, ad::sub(s2, s3)), -static_cast<double>(m.val().size())), 0.5);
  };
  auto loss_fn = [&]() {
    Tape t;
    return build(t, t.param(mu), t.param(log_var)).val()[0];
  };
  auto grad_fn = [&]() {
    Tape t;
    Var l = build(t, t.param(mu), t.param(log_var));
    t.backward(l);
    GradMap g;
    t.accumulate_param_grads(g);
    return g;
  };
  CHECK(gradient_check({&mu, &log_var}, loss_fn, grad_fn, 1e-6) <= 1e-3);
}

TEST_CASE("encoder emits well-formed posteriors and deterministic mean latents") {
  IdEncoder enc(IdVaeConfig{}, 42);
  SpeakerEmbedding v = random_embedding(5);

  GaussianPosterior q = enc.posterior(v);
  REQUIRE(q.mu.rows() == 8);
  REQUIRE(q.mu.cols() == 64);
  REQUIRE(q.sigma.rows() == 8);
  for (std::size_t i = 0; i < q.mu.size(); ++i) {
    CHECK(std::isfinite(q.mu[i]));
    CHECK(q.sigma[i] > 0.0);
  }

  auto [q1, z1] = enc.encode(v, EncodeMode::Mean);
  auto [q2, z2] = enc.encode(v, EncodeMode::Mean);
  for (std::size_t i = 0; i < z1.size(); ++i) CHECK(z1[i] == z2[i]);
  for (std::size_t i = 0; i < z1.size(); ++i) CHECK(z1[i] == q1.mu[i]);
}

TEST_CASE("sampled latents stay within the reparameterization envelope (fixed seed)") {
  IdEncoder enc(IdVaeConfig{}, 42);
  SpeakerEmbedding v = random_embedding(6);
  // pick a draw where every |eps| < 3 so the 3-sigma envelope is exact
  std::uint64_t seed = 0;
  for (std::uint64_t s = 0; s < 512; ++s) {
    Rng probe(s);
    bool ok = true;
    for (int i = 0; i < 8 * 64; ++i)
      if (std::abs(probe.gaussian()) >= 3.0) {
        ok = false;
        break;
      }
    if (ok) {
      seed = s;
      break;
    }
  }
  Rng rng(seed);
  auto [q, z] = enc.encode(v, EncodeMode::Sample, &rng);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(std::abs(z[i] - q.mu[i]) <= 3.0 * q.sigma[i]);
  CHECK_THROWS_AS(enc.encode(v, EncodeMode::Sample, nullptr), RuntimeError);
}

TEST_CASE("decoder handles degenerate latents and enforces shape") {
  IdDecoder dec(IdVaeConfig{}, 42);
  SpeakerEmbedding e = dec.decode(Tensor::zeros(8, 64));
  CHECK(e.valid());

  SpeakerEmbedding e1 = dec.decode(Tensor::full(8, 64, 0.25));
  SpeakerEmbedding e2 = dec.decode(Tensor::full(8, 64, 0.25));
  for (int i = 0; i < kEmbeddingDim; ++i) CHECK(e1.values[i] == e2.values[i]);

  CHECK_THROWS_AS(dec.decode(Tensor::zeros(8, 32)), RuntimeError);
  CHECK_THROWS_AS(dec.decode(Tensor::zeros(4, 64)), RuntimeError);
}

TEST_CASE("decoder learns to invert the frozen encoder on clean latents") {
  IdVaeConfig cfg;
  cfg.wn_channels = 64;  // smaller toy pair keeps this test quick
  IdEncoder enc(cfg, 11);
  IdDecoder dec(cfg, 12);

  std::vector<SpeakerEmbedding> speakers;
  std::vector<Tensor> latents;
  for (int s = 0; s < 10; ++s) {
    speakers.push_back(random_embedding(100 + s));
    latents.push_back(enc.encode(speakers.back(), EncodeMode::Mean).second);
  }

  Adam opt(dec.params().all(), 3e-3);
  Rng rng(13);
  for (int step = 0; step < 500; ++step) {
    Tape t;
    Var loss{};
    for (int b = 0; b < 8; ++b) {
      const int s = rng.uniform_int(10);
      Var v_rec = dec.forward(t, t.leaf(latents[s]));
      Var v_ref = t.leaf(Tensor::from_vector(speakers[s].values, 1, kEmbeddingDim));
      Var l = ad::l1_diff(v_rec, v_ref);
      loss = (loss.tape == nullptr) ? l : ad::add(loss, l);
    }
    t.backward(loss);
    GradMap g;
    t.accumulate_param_grads(g);
    opt.step(g);
  }
  for (int s = 0; s < 10; ++s) {
    SpeakerEmbedding rec = dec.decode(latents[s]);
    CHECK(rec.cosine(speakers[s]) >= 0.99);
  }
}

TEST_SUITE_END();
