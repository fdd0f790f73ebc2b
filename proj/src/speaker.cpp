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

#include "voxtracer/speaker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "voxtracer/errors.hpp"

namespace vox {

SpeakerExtractor::SpeakerExtractor(const ExtractorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  Rng rng(derive_seed(seed, 0x5EA));
  int in = cfg.stft.bands;
  for (int l = 0; l < cfg.layers; ++l) {
    lstm_.push_back(LstmLayer::create(ps_, "ext.lstm" + std::to_string(l), in, cfg.hidden, rng));
    in = cfg.hidden;
  }
  head_ = DenseLayer::create(ps_, "ext.head", cfg.hidden, kEmbeddingDim, rng);
  ge2e_w_ = ps_.add("ext.ge2e_w", Tensor::scalar(10.0));
  ge2e_b_ = ps_.add("ext.ge2e_b", Tensor::scalar(-5.0));
}

Var SpeakerExtractor::embed_batch(Tape& t, const std::vector<const Tensor*>& mels) const {
  if (mels.empty()) throw RuntimeError("extractor: empty batch");
  const int frames = mels[0]->rows();
  const int bands = mels[0]->cols();
  for (const Tensor* m : mels)
    if (m->rows() != frames || m->cols() != bands) throw RuntimeError("extractor: batch sequences must be equal length");
  const int B = static_cast<int>(mels.size());

  std::vector<Var> seq;
  for (int f = 0; f < frames; f += cfg_.frame_stride) {
    Tensor x = Tensor::uninit(B, bands);
    for (int b = 0; b < B; ++b)
      for (int j = 0; j < bands; ++j) x(b, j) = (*mels[b])(f, j);
    seq.push_back(t.leaf(std::move(x)));
  }
  for (const LstmLayer& layer : lstm_) seq = layer.apply_seq(t, seq);
  Var e = head_.apply(t, seq.back());
  return ad::rows_l2_normalize(e);
}

SpeakerEmbedding SpeakerExtractor::extract(const Waveform& w) const {
  if (static_cast<int>(w.samples.size()) < cfg_.stft.window_length)
    throw RuntimeError("extractor: input shorter than one mel window");
  MelSpectrogram mel = compute_mel(w, cfg_.stft);
  Tensor m = mel.values;
  if (m.rows() > cfg_.max_frames) {
    Tensor clip = Tensor::uninit(cfg_.max_frames, m.cols());
    for (int r = 0; r < cfg_.max_frames; ++r)
      for (int c = 0; c < m.cols(); ++c) clip(r, c) = m(r, c);
    m = std::move(clip);
  }
  Tape t(/*grad_enabled=*/false);
  Var e = embed_batch(t, {&m});
  return SpeakerEmbedding::from_raw(e.val().to_vector());
}

SpeakerExtractor train_extractor(const std::map<std::string, std::vector<Waveform>>& dataset,
                                 const ExtractorConfig& cfg, const ExtractorTrainConfig& tcfg) {
  if (dataset.size() < 2)
    throw RuntimeError("train_extractor: contrastive objective needs >= 2 speakers, got " +
                       std::to_string(dataset.size()));
  for (const auto& [id, utts] : dataset)
    if (utts.size() < 2) throw RuntimeError("train_extractor: speaker " + id + " has fewer than 2 utterances");

  SpeakerExtractor ext(cfg, tcfg.seed);
  Adam opt(ext.params().all(), tcfg.lr);
  Rng rng(derive_seed(tcfg.seed, 0x6E2E));

  // Mels are computed once; training crops a fixed-length window per step.
  std::vector<std::vector<Tensor>> mels;
  std::vector<std::string> ids;
  for (const auto& [id, utts] : dataset) {
    ids.push_back(id);
    std::vector<Tensor> ms;
    for (const Waveform& w : utts) ms.push_back(compute_mel(w, cfg.stft).values);
    mels.push_back(std::move(ms));
  }

  const int n_all = static_cast<int>(ids.size());
  const int N = (tcfg.speakers_per_batch <= 0 || tcfg.speakers_per_batch > n_all) ? n_all : tcfg.speakers_per_batch;
  const int M = tcfg.utts_per_speaker;
  const int B = N * M;

  // constant matrices for centroids / exclusive centroids / the true-column mask
  Tensor a_full = Tensor::zeros(N, B);
  Tensor a_ex = Tensor::zeros(B, B);
  Tensor mask = Tensor::zeros(B, N);
  Tensor inv_mask = Tensor::full(B, N, 1.0);
  std::vector<int> labels(B);
  for (int j = 0; j < N; ++j) {
    for (int i = 0; i < M; ++i) {
      const int r = j * M + i;
      a_full(j, r) = 1.0 / M;
      for (int i2 = 0; i2 < M; ++i2) a_ex(r, j * M + i2) = 1.0;
      mask(r, j) = 1.0;
      inv_mask(r, j) = 0.0;
      labels[r] = j;
    }
  }

  for (int step = 0; step < tcfg.steps; ++step) {
    std::vector<int> spk(n_all);
    for (int i = 0; i < n_all; ++i) spk[i] = i;
    for (int i = n_all - 1; i > 0; --i) std::swap(spk[i], spk[rng.uniform_int(i + 1)]);
    spk.resize(N);

    std::vector<Tensor> crops;
    crops.reserve(B);
    for (int j = 0; j < N; ++j) {
      const auto& spk_mels = mels[spk[j]];
      for (int i = 0; i < M; ++i) {
        const Tensor& full = spk_mels[rng.uniform_int(static_cast<int>(spk_mels.size()))];
        const int frames = std::min(tcfg.crop_frames, full.rows());
        const int start = full.rows() > frames ? rng.uniform_int(full.rows() - frames + 1) : 0;
        Tensor crop = Tensor::uninit(frames, full.cols());
        for (int r = 0; r < frames; ++r)
          for (int c = 0; c < full.cols(); ++c) crop(r, c) = full(start + r, c);
        crops.push_back(std::move(crop));
      }
    }
    std::vector<const Tensor*> ptrs;
    for (const Tensor& c : crops) ptrs.push_back(&c);

    Tape t;
    Var en = ext.embed_batch(t, ptrs);
    Var cn = ad::rows_l2_normalize(ad::matmul(t.leaf(a_full), en));
    Var s0 = ad::matmul(en, ad::transpose(cn));
    Var cex = ad::rows_l2_normalize(ad::scale(ad::sub(ad::matmul(t.leaf(a_ex), en), en), 1.0 / (M - 1)));
    Var d = ad::rows_dot(en, cex);
    Var s = ad::add(ad::mul(s0, t.leaf(inv_mask)), ad::mul(ad::broadcast_col(d, N), t.leaf(mask)));
    Var logits = ad::affine_scalar(s, t.param(*ext.ge2e_w()), t.param(*ext.ge2e_b()));
    Var loss = ad::scale(ad::cross_entropy_rows(logits, labels), 1.0 / B);
    if (!std::isfinite(loss.val()[0])) throw RuntimeError("train_extractor: loss diverged at step " + std::to_string(step));
    t.backward(loss);
    GradMap grads;
    t.accumulate_param_grads(grads);
    opt.step(grads);
    (*ext.ge2e_w())[0] = std::max(1e-3, (*ext.ge2e_w())[0]);
  }
  return ext;
}

double separation_margin(const std::map<std::string, std::vector<SpeakerEmbedding>>& embeddings) {
  double within = 0.0, between = 0.0;
  long nw = 0, nb = 0;
  for (auto it1 = embeddings.begin(); it1 != embeddings.end(); ++it1) {
    const auto& a = it1->second;
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = i + 1; j < a.size(); ++j) {
        within += a[i].cosine(a[j]);
        ++nw;
      }
    for (auto it2 = std::next(it1); it2 != embeddings.end(); ++it2)
      for (const auto& x : a)
        for (const auto& y : it2->second) {
          between += x.cosine(y);
          ++nb;
        }
  }
  if (nw == 0 || nb == 0) throw RuntimeError("margin: need >= 2 speakers with >= 2 utterances");
  return within / nw - between / nb;
}

void SpeakerRegistry::register_speaker(const std::string& id, const std::vector<SpeakerEmbedding>& embeddings) {
  if (entries_.count(id) != 0) throw RuntimeError("registry: speaker already enrolled: " + id);
  if (embeddings.empty()) throw RuntimeError("registry: no enrollment embeddings for " + id);
  std::vector<double> mean(kEmbeddingDim, 0.0);
  for (const auto& e : embeddings) {
    if (!e.valid()) throw RuntimeError("registry: invalid embedding for " + id);
    for (int i = 0; i < kEmbeddingDim; ++i) mean[i] += e.values[i];
  }
  for (double& v : mean) v /= static_cast<double>(embeddings.size());
  RegistryEntry entry;
  entry.embedding = SpeakerEmbedding::from_raw(std::move(mean));
  entry.utterance_count = static_cast<int>(embeddings.size());
  entries_.emplace(id, std::move(entry));
}

const RegistryEntry& SpeakerRegistry::get(const std::string& id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) throw RuntimeError("registry: unknown speaker " + id);
  return it->second;
}

void SpeakerRegistry::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp);
    if (!f) throw RuntimeError("registry: cannot write " + tmp);
    for (const auto& [id, entry] : entries_) {
      f << id << '\t' << entry.utterance_count << '\t';
      char buf[32];
      for (int i = 0; i < kEmbeddingDim; ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", entry.embedding.values[i]);
        f << buf << (i + 1 < kEmbeddingDim ? " " : "");
      }
      f << '\n';
    }
  }
  std::filesystem::rename(tmp, path);
}

SpeakerRegistry SpeakerRegistry::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DependencyError("registry: cannot open " + path);
  SpeakerRegistry reg;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split(line, '\t');
    if (fields.size() != 3) throw FormatError("registry: bad record at line " + std::to_string(lineno));
    RegistryEntry entry;
    entry.utterance_count = std::stoi(fields[1]);
    std::vector<double> vals;
    vals.reserve(kEmbeddingDim);
    for (const std::string& tok : split(fields[2], ' '))
      if (!tok.empty()) vals.push_back(std::strtod(tok.c_str(), nullptr));
    if (static_cast<int>(vals.size()) != kEmbeddingDim)
      throw FormatError("registry: expected 256 floats at line " + std::to_string(lineno));
    entry.embedding.values = std::move(vals);
    if (!entry.embedding.valid()) throw FormatError("registry: non-normalized embedding at line " + std::to_string(lineno));
    if (reg.entries_.count(fields[0])) throw FormatError("registry: duplicate speaker " + fields[0]);
    reg.entries_.emplace(fields[0], std::move(entry));
  }
  return reg;
}

}  // namespace vox
