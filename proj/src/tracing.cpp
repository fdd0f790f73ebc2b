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

#include "voxtracer/tracing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "voxtracer/errors.hpp"
#include "voxtracer/util.hpp"

namespace vox {

SpeakerEmbedding recover_embedding(const Waveform& degraded_chunk, const FlowModel& inverter,
                                   const IdDecoder& decoder, const StftConfig& stft) {
  const int period_samples = inverter.config().squeeze * kPayloadTime;
  if (degraded_chunk.samples.empty() || degraded_chunk.samples.size() % period_samples != 0)
    throw RuntimeError("recover: chunk length must be a positive multiple of " + std::to_string(period_samples));
  MelSpectrogram mel = compute_mel(degraded_chunk, stft);
  Tensor z = inverter.invert(degraded_chunk, mel);
  return decoder.decode(untile_mean(z, kPayloadTime));
}

double far_at(const std::vector<double>& impostor, double threshold) {
  long n = 0;
  for (double s : impostor)
    if (s > threshold) ++n;
  return static_cast<double>(n) / static_cast<double>(impostor.size());
}

double frr_at(const std::vector<double>& genuine, double threshold) {
  long n = 0;
  for (double s : genuine)
    if (s <= threshold) ++n;
  return static_cast<double>(n) / static_cast<double>(genuine.size());
}

double tune_threshold(const std::vector<double>& genuine, const std::vector<double>& impostor) {
  if (genuine.empty() || impostor.empty()) throw RuntimeError("tune_threshold: empty score list");
  std::set<double> all(genuine.begin(), genuine.end());
  all.insert(impostor.begin(), impostor.end());
  std::vector<double> sorted(all.begin(), all.end());
  std::vector<double> candidates;
  candidates.push_back(sorted.front() - 1.0);
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
  candidates.push_back(sorted.back());

  double best_t = candidates.front();
  double best_diff = 2.0, best_far = 2.0;
  for (double t : candidates) {
    const double far = far_at(impostor, t);
    const double frr = frr_at(genuine, t);
    const double diff = std::abs(far - frr);
    if (diff < best_diff - 1e-15 || (std::abs(diff - best_diff) <= 1e-15 && far < best_far - 1e-15)) {
      best_diff = diff;
      best_far = far;
      best_t = t;
    }
  }
  return best_t;
}

VerificationDecision verify_speaker(const SpeakerEmbedding& recovered, const SpeakerRegistry& registry,
                                    double threshold) {
  if (registry.size() == 0) throw RuntimeError("verify: empty registry");
  VerificationDecision d;
  d.threshold = threshold;
  d.best_score = -2.0;
  std::string best_id;
  for (const auto& [id, entry] : registry.entries()) {
    const double c = recovered.cosine(entry.embedding);
    if (c > d.best_score) {
      d.best_score = c;
      best_id = id;
    }
  }
  if (d.best_score > threshold) d.claimed_speaker = best_id;
  return d;
}

double compute_eer(const std::vector<double>& genuine, const std::vector<double>& impostor) {
  if (genuine.empty() || impostor.empty()) throw RuntimeError("compute_eer: empty score list");
  std::set<double> all(genuine.begin(), genuine.end());
  all.insert(impostor.begin(), impostor.end());
  std::vector<double> thresholds;
  thresholds.push_back(*all.begin() - 1.0);
  thresholds.insert(thresholds.end(), all.begin(), all.end());

  double prev_far = 1.0, prev_frr = 0.0;
  for (double t : thresholds) {
    const double far = far_at(impostor, t);
    const double frr = frr_at(genuine, t);
    const double d = far - frr;
    if (d <= 0.0) {
      if (d == 0.0) return far;
      const double d_prev = prev_far - prev_frr;
      const double alpha = d_prev / (d_prev - d);  // d_prev > 0 >= d
      return prev_far + alpha * (far - prev_far);
    }
    prev_far = far;
    prev_frr = frr;
  }
  return prev_far;  // unreachable for non-empty lists
}

double compute_mcs(const std::vector<std::pair<SpeakerEmbedding, SpeakerEmbedding>>& pairs) {
  if (pairs.empty()) throw RuntimeError("compute_mcs: empty pair list");
  double acc = 0.0;
  for (const auto& [a, b] : pairs) acc += a.cosine(b);
  return acc / static_cast<double>(pairs.size());
}

bool chunk_vote(const std::vector<VerificationDecision>& decisions, const std::string& true_speaker) {
  const int n = static_cast<int>(decisions.size());
  if (n == 0 || n % 2 == 0) throw RuntimeError("chunk_vote: N must be odd, got " + std::to_string(n));
  int votes = 0;
  for (const auto& d : decisions)
    if (d.claimed_speaker.has_value() && *d.claimed_speaker == true_speaker) ++votes;
  return votes >= n / 2 + 1;
}

double leakage_probe(const std::vector<std::pair<std::string, Waveform>>& converted_speeches,
                     const SpeakerRegistry& registry, const SpeakerExtractor& extractor, double threshold) {
  if (converted_speeches.empty()) return 0.0;
  long matches = 0;
  for (const auto& [source_id, w] : converted_speeches) {
    const SpeakerEmbedding e = extractor.extract(w);
    const VerificationDecision d = verify_speaker(e, registry, threshold);
    if (d.claimed_speaker.has_value() && *d.claimed_speaker == source_id) ++matches;
  }
  return static_cast<double>(matches) / static_cast<double>(converted_speeches.size());
}

double measure_mtc(const std::function<void()>& stage, int reps, int warmup) {
  return measure_mean_seconds(stage, std::max(10, reps), std::max(2, warmup));
}

void save_metric_csv(const std::vector<MetricRow>& rows, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw RuntimeError("metrics: cannot write " + path);
  f << "condition,codec,bitrate,n_chunks,ta,eer,mcs,mtc_seconds\n";
  char buf[160];
  for (const MetricRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6g", r.ta, r.eer, r.mcs, r.mtc_seconds);
    f << r.condition << ',' << r.codec << ',' << r.bitrate << ',' << r.n_chunks << ',' << buf << '\n';
  }
}

void save_scores_csv(const std::vector<double>& genuine, const std::vector<double>& impostor,
                     const std::string& path) {
  std::ofstream f(path);
  if (!f) throw RuntimeError("scores: cannot write " + path);
  f << "label,score\n";
  char buf[32];
  for (double s : genuine) {
    std::snprintf(buf, sizeof(buf), "%.12g", s);
    f << "genuine," << buf << '\n';
  }
  for (double s : impostor) {
    std::snprintf(buf, sizeof(buf), "%.12g", s);
    f << "impostor," << buf << '\n';
  }
}

}  // namespace vox
