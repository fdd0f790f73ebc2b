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

#include "voxtracer/embedding.hpp"

#include <cmath>

#include "voxtracer/errors.hpp"

namespace vox {

SpeakerEmbedding SpeakerEmbedding::from_raw(std::vector<double> raw) {
  if (static_cast<int>(raw.size()) != kEmbeddingDim)
    throw RuntimeError("embedding: expected 256 values, got " + std::to_string(raw.size()));
  double n2 = 0.0;
  for (double x : raw) n2 += x * x;
  SpeakerEmbedding e;
  e.values = std::move(raw);
  const double n = std::sqrt(n2);
  if (n < 1e-12) {
    std::fill(e.values.begin(), e.values.end(), 0.0);
    e.values[0] = 1.0;
  } else {
    for (double& x : e.values) x /= n;
  }
  return e;
}

double SpeakerEmbedding::cosine(const SpeakerEmbedding& other) const {
  if (values.size() != other.values.size()) throw RuntimeError("embedding: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    dot += values[i] * other.values[i];
    na += values[i] * values[i];
    nb += other.values[i] * other.values[i];
  }
  const double d = std::sqrt(na) * std::sqrt(nb);
  return d < 1e-300 ? 0.0 : dot / d;
}

double SpeakerEmbedding::norm() const {
  double n2 = 0.0;
  for (double x : values) n2 += x * x;
  return std::sqrt(n2);
}

bool SpeakerEmbedding::valid() const {
  return static_cast<int>(values.size()) == kEmbeddingDim && std::abs(norm() - 1.0) <= 1e-6;
}

}  // namespace vox
