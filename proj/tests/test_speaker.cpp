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
#include <filesystem>

#include "oracles.hpp"
#include "voxtracer/dataset.hpp"
#include "voxtracer/speaker.hpp"

using namespace vox;

TEST_SUITE_BEGIN("speaker");

TEST_CASE("registry enrollment follows the normalized-mean rule") {
  Rng rng(1);
  std::vector<double> raw(kEmbeddingDim);
  for (double& x : raw) x = rng.gaussian();
  SpeakerEmbedding e = SpeakerEmbedding::from_raw(raw);

  SpeakerRegistry reg;
  reg.register_speaker("a", {e});
  for (int i = 0; i < kEmbeddingDim; ++i) CHECK(reg.get("a").embedding.values[i] == doctest::Approx(e.values[i]).epsilon(1e-12));

  reg.register_speaker("b", {e, e});
  for (int i = 0; i < kEmbeddingDim; ++i) CHECK(reg.get("b").embedding.values[i] == doctest::Approx(e.values[i]).epsilon(1e-12));
  CHECK(reg.get("b").utterance_count == 2);

  // two orthogonal unit vectors: cosine to each is 1/sqrt(2)
  std::vector<double> u(kEmbeddingDim, 0.0), v(kEmbeddingDim, 0.0);
  u[0] = 1.0;
  v[1] = 1.0;
  SpeakerEmbedding eu = SpeakerEmbedding::from_raw(u), ev = SpeakerEmbedding::from_raw(v);
  reg.register_speaker("c", {eu, ev});
  CHECK(reg.get("c").embedding.cosine(eu) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(reg.get("c").embedding.cosine(ev) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(reg.register_speaker("a", {e}), RuntimeError);  // duplicate id
  CHECK_THROWS_AS(reg.register_speaker("d", {}), RuntimeError);
}

TEST_CASE("registry file round trip is bit exact") {
  Rng rng(2);
  SpeakerRegistry reg;
  for (int s = 0; s < 5; ++s) {
    std::vector<double> raw(kEmbeddingDim);
    for (double& x : raw) x = rng.gaussian();
    reg.register_speaker("spk" + std::to_string(s), {SpeakerEmbedding::from_raw(raw)});
  }
  const std::string path = "/tmp/voxtest_registry.txt";
  reg.save(path);
  SpeakerRegistry back = SpeakerRegistry::load(path);
  REQUIRE(back.size() == reg.size());
  for (const auto& [id, entry] : reg.entries()) {
    const auto& b = back.get(id);
    CHECK(b.utterance_count == entry.utterance_count);
    for (int i = 0; i < kEmbeddingDim; ++i) CHECK(b.embedding.values[i] == entry.embedding.values[i]);
  }
  std::filesystem::remove(path);
}

TEST_CASE("extraction is deterministic, normalized, and rejects short input") {
  SpeakerExtractor ext(ExtractorConfig{}, 3);
  ToySpeaker spk = make_toy_speaker(4, 0);
  Waveform w = synth_utterance(spk, 5, 16384);

  SpeakerEmbedding a = ext.extract(w);
  SpeakerEmbedding b = ext.extract(w);
  CHECK(a.valid());
  CHECK(a.cosine(b) == doctest::Approx(1.0));
  for (int i = 0; i < kEmbeddingDim; ++i) CHECK(a.values[i] == b.values[i]);

  // normalization idempotence
  SpeakerEmbedding renorm = SpeakerEmbedding::from_raw(a.values);
  for (int i = 0; i < kEmbeddingDim; ++i) CHECK(renorm.values[i] == doctest::Approx(a.values[i]).epsilon(1e-14));

  Waveform zero;
  zero.samples.assign(16384, 0.0);
  CHECK(ext.extract(zero).valid());

  Waveform tiny;
  tiny.samples.assign(512, 0.1);
  CHECK_THROWS_AS(ext.extract(tiny), RuntimeError);
}

TEST_CASE("training rejects degenerate datasets") {
  ToySpeaker spk = make_toy_speaker(6, 0);
  std::map<std::string, std::vector<Waveform>> one;
  one["only"] = {synth_utterance(spk, 7, 16384), synth_utterance(spk, 8, 16384)};
  CHECK_THROWS_AS(train_extractor(one, ExtractorConfig{}, ExtractorTrainConfig{}), RuntimeError);

  std::map<std::string, std::vector<Waveform>> thin;
  thin["a"] = {synth_utterance(spk, 9, 16384)};
  thin["b"] = {synth_utterance(make_toy_speaker(6, 1), 10, 16384)};
  CHECK_THROWS_AS(train_extractor(thin, ExtractorConfig{}, ExtractorTrainConfig{}), RuntimeError);
}

TEST_CASE("two band-disjoint speakers separate almost perfectly") {
  ToySpeaker lo = make_bandlimited_speaker(500.0, 1500.0);
  ToySpeaker hi = make_bandlimited_speaker(3000.0, 6000.0);
  std::map<std::string, std::vector<Waveform>> data;
  for (int u = 0; u < 4; ++u) {
    data["lo"].push_back(synth_utterance(lo, 20 + u, 16384));
    data["hi"].push_back(synth_utterance(hi, 40 + u, 16384));
  }
  ExtractorConfig cfg;
  cfg.hidden = 48;
  cfg.frame_stride = 2;
  ExtractorTrainConfig tcfg;
  tcfg.steps = 60;
  tcfg.lr = 1e-2;
  tcfg.utts_per_speaker = 3;
  tcfg.seed = 21;
  SpeakerExtractor ext = train_extractor(data, cfg, tcfg);

  std::map<std::string, std::vector<SpeakerEmbedding>> embs;
  for (const auto& [id, utts] : data)
    for (const auto& w : utts) embs[id].push_back(ext.extract(w));
  const double margin = separation_margin(embs);
  MESSAGE("band-disjoint margin: ", margin);
  CHECK(margin >= 0.5);
}

TEST_CASE("ten toy speakers reach the contract margin" * doctest::timeout(900)) {
  ToyDataset ds = make_toy_dataset(31, 10, 20, 16384);
  ExtractorConfig cfg;
  cfg.frame_stride = 2;
  ExtractorTrainConfig tcfg;
  tcfg.steps = 150;
  tcfg.lr = 8e-3;
  tcfg.utts_per_speaker = 3;
  tcfg.seed = 32;
  SpeakerExtractor ext = train_extractor(ds.as_map(), cfg, tcfg);

  std::map<std::string, std::vector<SpeakerEmbedding>> embs;
  for (std::size_t s = 0; s < ds.speaker_ids.size(); ++s)
    for (const auto& w : ds.utterances[s]) embs[ds.speaker_ids[s]].push_back(ext.extract(w));
  const double margin = separation_margin(embs);
  MESSAGE("10-speaker margin on training data: ", margin);
  CHECK(margin >= 0.2);

  // within-cosine > between-cosine also on held-out utterances of the same speakers
  std::map<std::string, std::vector<SpeakerEmbedding>> held;
  for (std::size_t s = 0; s < ds.speaker_ids.size(); ++s) {
    ToySpeaker spk = make_toy_speaker(31, static_cast<int>(s));
    for (int u = 0; u < 4; ++u)
      held[ds.speaker_ids[s]].push_back(ext.extract(synth_utterance(spk, 5000 + 100 * s + u, 16384)));
  }
  CHECK(separation_margin(held) > 0.0);
}

TEST_SUITE_END();
