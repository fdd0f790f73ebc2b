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

#ifndef VOXTRACER_TRAINING_HPP_
#define VOXTRACER_TRAINING_HPP_

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "voxtracer/channel.hpp"
#include "voxtracer/dataset.hpp"
#include "voxtracer/flow.hpp"
#include "voxtracer/id_vae.hpp"
#include "voxtracer/speaker.hpp"

namespace vox {

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9, beta2 = 0.999;
  int batch_encoder = 8;
  int batch_generator = 16;
  int batch_tracing = 20;
  double lambda_z = 1.0;
  double lambda_v = 1.0;
  enum class LossNorm { L1, L2 };
  LossNorm loss_norm = LossNorm::L1;
  std::uint64_t seed = 1;

  int encoder_steps = 150;
  int generator_steps = 300;
  int tracing_steps = 300;
  double kl_stop_per_entry = 0.35;  // encoder early-stop band
  int generator_crop = 2048;        // samples per likelihood crop
  int tracing_crop = 4096;          // samples per tracing crop
  bool joint_tracing = true;        // false = separate-phase ablation
  int report_every = 10;
  int snapshot_every = 25;          // last-good checkpoint cadence
  int channel_variants = 2;         // cached distortions per (utterance, spec)
  std::vector<ChannelSpec> channels;
};

struct TrainReport {
  struct Row {
    int step = 0;
    std::string phase;
    std::map<std::string, double> losses;
  };
  std::vector<Row> rows;

  void append(int step, const std::string& phase, std::map<std::string, double> losses);
  void save_csv(const std::string& path) const;
  // means of one loss over a trailing window of a phase
  std::vector<double> series(const std::string& phase, const std::string& loss) const;
};

// One utterance prepared for hiding-stage training and tracing-stage data
// generation: chunk-aligned audio, its mel, and the source embedding.
struct HidingItem {
  std::string speaker_id;
  SpeakerEmbedding embedding;
  Waveform audio;       // length = k * chunk
  MelSpectrogram mel;   // frames = k * chunk/hop
};
using HidingDataset = std::vector<HidingItem>;

HidingDataset build_hiding_dataset(const ToyDataset& ds, const SpeakerExtractor& extractor,
                                   const StftConfig& stft, int chunk_samples);

// Hiding stage: the ID encoder minimizes the KL objective, the generator
// independently maximizes chunk likelihood. Two disjoint optimization loops;
// on divergence the last-good snapshot is restored.
TrainReport train_hiding(const HidingDataset& data, const TrainConfig& cfg, IdEncoder& encoder, FlowModel& generator);

struct TracingEval {
  double inverter_z_l1 = 0.0;   // mean |z_rec - z| per entry, fine-tuned inverter
  double generator_z_l1 = 0.0;  // same, raw generator inverse
  double mean_cosine = 0.0;     // cosine(decoded embedding, source embedding)
};

struct TracingResult {
  TrainReport report;
  TracingEval eval;
};

// Tracing stage: inverter (initialized from the frozen generator) and ID
// decoder trained against channel-distorted hidden speech. Hiding models
// stay frozen. val_items are excluded from training and used for the paired
// inverter-vs-generator comparison.
TracingResult train_tracing(const HidingDataset& data, const std::vector<int>& val_items, const IdEncoder& encoder,
                            const FlowModel& generator, FlowModel& inverter, IdDecoder& decoder,
                            const TrainConfig& cfg, const CodecRegistry& codecs, const std::string& tmp_dir = "/tmp");

// Central-difference comparison over every entry of every parameter.
// Returns max |analytic - numeric| / (|numeric| + 1e-8). Caps at 1e4 entries.
double gradient_check(const std::vector<Tensor*>& params, const std::function<double()>& loss_fn,
                      const std::function<GradMap()>& grad_fn, double step = 1e-5);

}  // namespace vox

#endif  // VOXTRACER_TRAINING_HPP_
