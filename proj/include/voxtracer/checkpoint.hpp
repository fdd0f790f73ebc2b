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

#ifndef VOXTRACER_CHECKPOINT_HPP_
#define VOXTRACER_CHECKPOINT_HPP_

#include <map>
#include <string>

#include "voxtracer/nn.hpp"
#include "voxtracer/tensor.hpp"

namespace vox {

// Self-describing parameter archive: named f64 tensors plus string metadata.
// Shared by every model in the pipeline. Binary layout in docs/formats.md.
class Checkpoint {
 public:
  std::map<std::string, Tensor> tensors;
  std::map<std::string, std::string> meta;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  void put_params(const ParamStore& ps);
  // Strict: every store parameter must be present with matching shape.
  void restore_params(ParamStore& ps) const;
};

}  // namespace vox

#endif  // VOXTRACER_CHECKPOINT_HPP_
