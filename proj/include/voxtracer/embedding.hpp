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

#ifndef VOXTRACER_EMBEDDING_HPP_
#define VOXTRACER_EMBEDDING_HPP_

#include <vector>

namespace vox {

inline constexpr int kEmbeddingDim = 256;

// Fixed 256-D speaker identity vector, always L2-normalized.
struct SpeakerEmbedding {
  std::vector<double> values;

  // Normalizes raw 256-D output. A (near-)zero vector maps to the first
  // basis vector so degenerate inputs still give a valid embedding.
  static SpeakerEmbedding from_raw(std::vector<double> raw);

  double cosine(const SpeakerEmbedding& other) const;
  double norm() const;
  bool valid() const;
};

}  // namespace vox

#endif  // VOXTRACER_EMBEDDING_HPP_
