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

#ifndef VOXTRACER_EXPERIMENT_HPP_
#define VOXTRACER_EXPERIMENT_HPP_

#include <optional>
#include <string>
#include <vector>

#include "voxtracer/config.hpp"
#include "voxtracer/plot.hpp"
#include "voxtracer/restoration.hpp"
#include "voxtracer/tracing.hpp"

namespace vox {

void save_model_checkpoint(const ParamStore& ps, const std::map<std::string, std::string>& meta,
                           const std::string& path);

SpeakerExtractor load_extractor_ckpt(const ExperimentConfig& cfg);
IdEncoder load_encoder_ckpt(const ExperimentConfig& cfg);
FlowModel load_flow_ckpt(const ExperimentConfig& cfg, const std::string& path);
IdDecoder load_decoder_ckpt(const ExperimentConfig& cfg);
RestorationModel load_restoration_ckpt(const ExperimentConfig& cfg);

// dataset split helpers (train = first train_utts per speaker)
ToyDataset train_split(const ToyDataset& ds, int train_utts);
ToyDataset test_split(const ToyDataset& ds, int train_utts);

void exp_make_dataset(const ExperimentConfig& cfg);
void exp_train_extractor(const ExperimentConfig& cfg);
void exp_enroll(const ExperimentConfig& cfg);
void exp_train_hiding(const ExperimentConfig& cfg);

struct TracingSummary {
  TracingEval eval;
};
TracingSummary exp_train_tracing(const ExperimentConfig& cfg);
void exp_train_restoration(const ExperimentConfig& cfg);

// Hide the source-speaker identity inside the converted speech.
Waveform exp_hide(const ExperimentConfig& cfg, const Waveform& source, const Waveform& target,
                  const SpeakerExtractor& extractor, const IdEncoder& encoder, const FlowModel& generator);

struct TraceOutcome {
  std::vector<VerificationDecision> decisions;  // per chunk
  std::vector<SpeakerEmbedding> recovered;      // per chunk
  std::optional<std::string> verdict;           // chunk-vote result
  int voted_chunks = 0;
  double threshold = 0.0;
};

TraceOutcome exp_trace(const ExperimentConfig& cfg, const Waveform& degraded, const SpeakerRegistry& registry,
                       const FlowModel& inverter, const IdDecoder& decoder, double threshold,
                       std::optional<int> vote_chunks);

struct EvaluateCurve {
  std::string condition;
  std::vector<std::pair<int, double>> points;  // (N, speech-level TA)
};

struct EvaluateOutput {
  std::vector<MetricRow> rows;  // per condition, per-chunk protocol
  std::vector<EvaluateCurve> curves;
  std::vector<EmbeddingPair> pairs;
  double global_threshold = 0.0;
  std::map<std::string, double> per_condition_threshold;
  std::map<std::string, double> per_chunk_ta;  // condition -> TA at N=1
};

EvaluateOutput exp_evaluate(const ExperimentConfig& cfg);
void save_evaluate_output(const EvaluateOutput& out, const ExperimentConfig& cfg);

// Converted-without-hiding probe (source-identity leakage).
double exp_leakage(const ExperimentConfig& cfg, const VcBackend& backend, double threshold);

}  // namespace vox

#endif  // VOXTRACER_EXPERIMENT_HPP_
