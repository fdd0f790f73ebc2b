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

#ifndef VOXTRACER_ERRORS_HPP_
#define VOXTRACER_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace vox {

// Exit-code mapping used by the CLI: 2 config, 3 dependency, 4 runtime/numeric.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A required artifact (checkpoint, binary, registry) is missing or unusable.
struct DependencyError : std::runtime_error {
  explicit DependencyError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/precondition violations and numeric failures at run time.
struct RuntimeError : std::runtime_error {
  explicit RuntimeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FormatError : RuntimeError {
  explicit FormatError(const std::string& msg) : RuntimeError(msg) {}
};

}  // namespace vox

#endif  // VOXTRACER_ERRORS_HPP_
