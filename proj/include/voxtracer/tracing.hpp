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

#ifndef VOXTRACER_TRACING_HPP_
#define VOXTRACER_TRACING_HPP_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "voxtracer/flow.hpp"
#include "voxtracer/id_vae.hpp"
#include "voxtracer/speaker.hpp"

namespace vox {

struct VerificationDecision {
  std::optional<std::string> claimed_speaker;  // none when best_score <= threshold
  double best_score = -1.0;
  double threshold = 0.0;
};

struct MetricRow {
  std::string condition;  // channel label
  std::string codec;      // actual codec name for reports
  std::string bitrate;
  int n_chunks = 1;
  double ta = 0.0;
  double eer = 0.0;
  double mcs = 0.0;
  double mtc_seconds = 0.0;
};

// mel(degraded chunk) -> inverter -> mean over payload tiles -> ID decoder.
SpeakerEmbedding recover_embedding(const Waveform& degraded_chunk, const FlowModel& inverter,
                                   const IdDecoder& decoder, const StftConfig& stft);

// Threshold at the midpoint of the candidate gap minimizing |FAR - FRR|;
// ties break toward lower FAR (the higher threshold). Accept iff score > t.
double tune_threshold(const std::vector<double>& genuine, const std::vector<double>& impostor);

double far_at(const std::vector<double>& impostor, double threshold);
double frr_at(const std::vector<double>& genuine, double threshold);

VerificationDecision verify_speaker(const SpeakerEmbedding& recovered, const SpeakerRegistry& registry,
                                    double threshold);

// EER by linear interpolation where FAR crosses FRR on the threshold axis.
double compute_eer(const std::vector<double>& genuine, const std::vector<double>& impostor);

double compute_mcs(const std::vector<std::pair<SpeakerEmbedding, SpeakerEmbedding>>& pairs);

// Majority vote: identified iff >= floor(N/2)+1 decisions claim true_speaker.
// N must be odd.
bool chunk_vote(const std::vector<VerificationDecision>& decisions, const std::string& true_speaker);

// Fraction of converted-without-hiding speeches whose directly extracted
// embedding still verifies as the source speaker.
double leakage_probe(const std::vector<std::pair<std::string, Waveform>>& converted_speeches,
                     const SpeakerRegistry& registry, const SpeakerExtractor& extractor, double threshold);

// Mean wall-clock seconds; >= 2 warm-up runs then >= 10 timed repetitions.
double measure_mtc(const std::function<void()>& stage, int reps = 10, int warmup = 2);

void save_metric_csv(const std::vector<MetricRow>& rows, const std::string& path);
void save_scores_csv(const std::vector<double>& genuine, const std::vector<double>& impostor,
                     const std::string& path);

}  // namespace vox

#endif  // VOXTRACER_TRACING_HPP_
