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

#ifndef VOXTRACER_PLOT_HPP_
#define VOXTRACER_PLOT_HPP_

#include <string>
#include <vector>

#include "voxtracer/embedding.hpp"
#include "voxtracer/tensor.hpp"

namespace vox {

// Deterministic 2-D PCA projection of row vectors.
Tensor pca_project_2d(const Tensor& rows);

struct EmbeddingPair {
  std::string speaker_id;
  SpeakerEmbedding source;
  SpeakerEmbedding recovered;
};

// Pairs file: speaker_id<TAB>256 source floats<TAB>256 recovered floats.
std::vector<EmbeddingPair> load_pairs_file(const std::string& path);
void save_pairs_file(const std::vector<EmbeddingPair>& pairs, const std::string& path);

// Scatter of the joint PCA projection; dark dots = source, light = recovered,
// one color per speaker. PNG output.
void plot_embedding_pairs(const std::vector<EmbeddingPair>& pairs, const std::string& png_path, int size = 480);

// Fraction of 2-D points whose nearest neighbor shares their speaker.
double nearest_neighbor_purity(const Tensor& points2d, const std::vector<int>& labels);

void write_png_rgb(const std::string& path, const std::vector<unsigned char>& rgb, int width, int height);

}  // namespace vox

#endif  // VOXTRACER_PLOT_HPP_
