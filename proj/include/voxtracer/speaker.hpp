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

#ifndef VOXTRACER_SPEAKER_HPP_
#define VOXTRACER_SPEAKER_HPP_

#include <map>
#include <string>
#include <vector>

#include "voxtracer/audio.hpp"
#include "voxtracer/embedding.hpp"
#include "voxtracer/nn.hpp"

namespace vox {

struct ExtractorConfig {
  int hidden = 128;       // cells per recurrent layer
  int layers = 2;         // stacked recurrent layers
  int frame_stride = 1;   // mel-frame subsampling
  int max_frames = 400;   // cap for very long inputs
  StftConfig stft;
};

// Recurrent speaker encoder: stacked LSTM layers over mel frames plus a
// dense projection to a 256-D L2-normalized embedding.
class SpeakerExtractor {
 public:
  SpeakerExtractor(const ExtractorConfig& cfg, std::uint64_t seed);
  SpeakerExtractor(const SpeakerExtractor&) = delete;
  SpeakerExtractor& operator=(const SpeakerExtractor&) = delete;
  SpeakerExtractor(SpeakerExtractor&&) = default;
  SpeakerExtractor& operator=(SpeakerExtractor&&) = default;

  SpeakerEmbedding extract(const Waveform& w) const;

  // Training graph over a batch of equal-length mel sequences
  // (each [frames, bands]); returns normalized embeddings [B, 256].
  Var embed_batch(Tape& t, const std::vector<const Tensor*>& mels) const;

  ParamStore& params() { return ps_; }
  const ParamStore& params() const { return ps_; }
  const ExtractorConfig& config() const { return cfg_; }
  Tensor* ge2e_w() { return ge2e_w_; }
  Tensor* ge2e_b() { return ge2e_b_; }

 private:
  ExtractorConfig cfg_;
  ParamStore ps_;
  std::vector<LstmLayer> lstm_;
  DenseLayer head_;
  Tensor* ge2e_w_ = nullptr;  // similarity scale (kept positive)
  Tensor* ge2e_b_ = nullptr;  // similarity offset
};

struct ExtractorTrainConfig {
  int steps = 200;
  double lr = 1e-2;
  int speakers_per_batch = 0;   // 0 = all
  int utts_per_speaker = 4;
  int crop_frames = 64;
  std::uint64_t seed = 1;
};

// dataset: speaker id -> utterances. Requires >= 2 speakers with >= 2
// utterances each (the contrastive objective is undefined otherwise).
SpeakerExtractor train_extractor(const std::map<std::string, std::vector<Waveform>>& dataset,
                                 const ExtractorConfig& cfg, const ExtractorTrainConfig& tcfg);

// mean within-speaker cosine minus mean between-speaker cosine.
double separation_margin(const std::map<std::string, std::vector<SpeakerEmbedding>>& embeddings);

struct RegistryEntry {
  SpeakerEmbedding embedding;
  int utterance_count = 0;
};

// Enrolled speakers; persisted as one text record per line:
// speaker_id<TAB>utterance_count<TAB>256 space-separated floats (17 sig digits).
class SpeakerRegistry {
 public:
  void register_speaker(const std::string& id, const std::vector<SpeakerEmbedding>& embeddings);
  const RegistryEntry& get(const std::string& id) const;
  bool has(const std::string& id) const { return entries_.count(id) != 0; }
  const std::map<std::string, RegistryEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  void save(const std::string& path) const;  // atomic replace
  static SpeakerRegistry load(const std::string& path);

 private:
  std::map<std::string, RegistryEntry> entries_;
};

}  // namespace vox

#endif  // VOXTRACER_SPEAKER_HPP_
