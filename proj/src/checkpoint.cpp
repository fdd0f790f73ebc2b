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

#include "voxtracer/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "voxtracer/errors.hpp"

namespace vox {

namespace {

constexpr char kMagic[8] = {'V', 'O', 'X', 'C', 'K', 'P', 'T', '1'};

void put_u32(std::ofstream& f, std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); }
void put_u16(std::ofstream& f, std::uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); }

std::uint32_t get_u32(std::ifstream& f) {
  std::uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

std::uint16_t get_u16(std::ifstream& f) {
  std::uint16_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 2);
  return v;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw RuntimeError("checkpoint: cannot open " + path + " for writing");
  f.write(kMagic, 8);
  put_u32(f, static_cast<std::uint32_t>(tensors.size() + meta.size()));
  for (const auto& [name, t] : tensors) {
    put_u16(f, static_cast<std::uint16_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    f.put(0);
    put_u32(f, static_cast<std::uint32_t>(t.rows()));
    put_u32(f, static_cast<std::uint32_t>(t.cols()));
    f.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  for (const auto& [name, s] : meta) {
    put_u16(f, static_cast<std::uint16_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    f.put(1);
    put_u32(f, static_cast<std::uint32_t>(s.size()));
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  if (!f) throw RuntimeError("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DependencyError("checkpoint: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0) throw FormatError("checkpoint: bad magic in " + path);
  Checkpoint ck;
  const std::uint32_t n = get_u32(f);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint16_t name_len = get_u16(f);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    const int kind = f.get();
    if (kind == 0) {
      const std::uint32_t rows = get_u32(f);
      const std::uint32_t cols = get_u32(f);
      Tensor t = Tensor::uninit(static_cast<int>(rows), static_cast<int>(cols));
      f.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
      ck.tensors.emplace(std::move(name), std::move(t));
    } else if (kind == 1) {
      const std::uint32_t len = get_u32(f);
      std::string s(len, '\0');
      f.read(s.data(), len);
      ck.meta.emplace(std::move(name), std::move(s));
    } else {
      throw FormatError("checkpoint: unknown entry kind in " + path);
    }
    if (!f) throw FormatError("checkpoint: truncated file " + path);
  }
  return ck;
}

void Checkpoint::put_params(const ParamStore& ps) {
  for (std::size_t i = 0; i < ps.size(); ++i) tensors[ps.name(i)] = ps.value(i);
}

void Checkpoint::restore_params(ParamStore& ps) const {
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto it = tensors.find(ps.name(i));
    if (it == tensors.end()) throw FormatError("checkpoint: missing tensor " + ps.name(i));
    if (!it->second.same_shape(ps.value(i)))
      throw FormatError("checkpoint: shape mismatch for " + ps.name(i));
    ps.value(i) = it->second;
  }
}

}  // namespace vox
