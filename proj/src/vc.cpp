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

#include "voxtracer/vc.hpp"

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "voxtracer/errors.hpp"
#include "voxtracer/util.hpp"

namespace vox {

VcBackend VcBackend::toy_warp(double factor) {
  VcBackend b;
  b.kind = Kind::OneStage;
  b.warp = factor;
  return b;
}

Waveform align_to_chunks(const Waveform& w, int chunk_samples) {
  if (chunk_samples <= 0) throw RuntimeError("align: chunk_samples must be positive");
  const std::size_t n = w.samples.size();
  std::size_t chunks = (n + chunk_samples / 2) / chunk_samples;  // nearest
  if (chunks == 0) chunks = 1;
  Waveform out = w;
  out.samples.resize(chunks * chunk_samples, 0.0);
  return out;
}

Waveform pitch_shift(const Waveform& w, double factor) {
  if (!(factor > 0.0)) throw RuntimeError("pitch_shift: factor must be positive");
  Waveform out;
  out.sample_rate = w.sample_rate;
  const std::size_t n = static_cast<std::size_t>(w.samples.size() / factor);
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = i * factor;
    const std::size_t j = static_cast<std::size_t>(pos);
    const double frac = pos - j;
    const double a = w.samples[std::min(j, w.samples.size() - 1)];
    const double b = w.samples[std::min(j + 1, w.samples.size() - 1)];
    out.samples[i] = a + frac * (b - a);
  }
  return out;
}

void save_mel(const MelSpectrogram& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw RuntimeError("save_mel: cannot open " + path);
  f.write("VOXMELF1", 8);
  const std::uint32_t frames = static_cast<std::uint32_t>(m.frames());
  const std::uint32_t bands = static_cast<std::uint32_t>(m.bands);
  const std::uint32_t hop = static_cast<std::uint32_t>(m.hop);
  f.write(reinterpret_cast<const char*>(&frames), 4);
  f.write(reinterpret_cast<const char*>(&bands), 4);
  f.write(reinterpret_cast<const char*>(&hop), 4);
  f.write(reinterpret_cast<const char*>(m.values.data()), static_cast<std::streamsize>(m.values.size() * sizeof(double)));
}

MelSpectrogram load_mel(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("load_mel: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "VOXMELF1", 8) != 0) throw FormatError("load_mel: bad magic in " + path);
  std::uint32_t frames = 0, bands = 0, hop = 0;
  f.read(reinterpret_cast<char*>(&frames), 4);
  f.read(reinterpret_cast<char*>(&bands), 4);
  f.read(reinterpret_cast<char*>(&hop), 4);
  MelSpectrogram m;
  m.bands = static_cast<int>(bands);
  m.hop = static_cast<int>(hop);
  m.values = Tensor::uninit(static_cast<int>(frames), static_cast<int>(bands));
  f.read(reinterpret_cast<char*>(m.values.data()), static_cast<std::streamsize>(m.values.size() * sizeof(double)));
  if (!f) throw FormatError("load_mel: truncated file " + path);
  return m;
}

namespace {

MelSpectrogram trim_mel_to_chunks(MelSpectrogram m, int chunk_frames) {
  std::size_t groups = (static_cast<std::size_t>(m.frames()) + chunk_frames / 2) / chunk_frames;
  if (groups == 0) groups = 1;
  const int want = static_cast<int>(groups) * chunk_frames;
  if (want == m.frames()) return m;
  Tensor v = Tensor::zeros(want, m.bands);
  const int copy = std::min(want, m.frames());
  for (int r = 0; r < copy; ++r)
    for (int c = 0; c < m.bands; ++c) v(r, c) = m.values(r, c);
  for (int r = copy; r < want; ++r)
    for (int c = 0; c < m.bands; ++c) v(r, c) = kMelLogFloor;
  m.values = std::move(v);
  return m;
}

std::string run_external_backend(const VcBackend& backend, const VcRequest& req, const std::string& tmp_dir) {
  static std::atomic<std::uint64_t> counter{0};
  const std::string stem = tmp_dir + "/voxvc_" + std::to_string(static_cast<unsigned long long>(::getpid())) + "_" +
                           std::to_string(counter.fetch_add(1));
  const std::string src = stem + "_src.wav";
  const std::string tgt = stem + "_tgt.wav";
  const std::string out = stem + (backend.kind == VcBackend::Kind::TwoStage ? "_out.mel" : "_out.wav");
  save_wav(req.source, src);
  save_wav(req.target, tgt);
  std::string cmd = backend.command;
  auto replace = [&cmd](const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = cmd.find(from, pos)) != std::string::npos) {
      cmd.replace(pos, from.size(), to);
      pos += to.size();
    }
  };
  replace("{source}", src);
  replace("{target}", tgt);
  replace("{out}", out);
  const std::string log = stem + ".log";
  const int rc = std::system((cmd + " >" + log + " 2>&1").c_str());
  std::filesystem::remove(src);
  std::filesystem::remove(tgt);
  if (rc != 0) {
    std::string diag;
    try {
      diag = read_file_bytes(log);
      if (diag.size() > 400) diag = diag.substr(0, 400);
    } catch (...) {
    }
    std::filesystem::remove(log);
    throw RuntimeError("vc backend failed (exit " + std::to_string(rc) + "): " + cmd +
                       (diag.empty() ? "" : "\n" + diag));
  }
  std::filesystem::remove(log);
  return out;
}

}  // namespace

Waveform convert_to_waveform(const VcRequest& req, const VcBackend& backend, int chunk_samples,
                             const std::string& tmp_dir) {
  if (req.source.samples.empty() || req.target.samples.empty())
    throw RuntimeError("vc: source and target must be non-empty");
  switch (backend.kind) {
    case VcBackend::Kind::IdentityToy:
      return align_to_chunks(req.source, chunk_samples);
    case VcBackend::Kind::OneStage: {
      if (backend.command.empty())
        return align_to_chunks(backend.warp == 1.0 ? req.source : pitch_shift(req.source, backend.warp),
                               chunk_samples);
      const std::string out = run_external_backend(backend, req, tmp_dir);
      Waveform w = load_wav(out);
      std::filesystem::remove(out);
      return align_to_chunks(w, chunk_samples);
    }
    case VcBackend::Kind::TwoStage:
      throw RuntimeError("vc: two-stage backends emit mels, not waveforms");
  }
  throw RuntimeError("vc: unknown backend kind");
}

MelSpectrogram convert_to_mel(const VcRequest& req, const VcBackend& backend, const StftConfig& cfg,
                              int chunk_samples, const std::string& tmp_dir) {
  if (req.source.samples.empty() || req.target.samples.empty())
    throw RuntimeError("vc: source and target must be non-empty");
  if (req.source.sample_rate != req.target.sample_rate) throw RuntimeError("vc: sample rate mismatch");
  const int chunk_frames = chunk_samples / cfg.hop;

  switch (backend.kind) {
    case VcBackend::Kind::IdentityToy:
      return compute_mel(align_to_chunks(req.source, chunk_samples), cfg);
    case VcBackend::Kind::OneStage: {
      Waveform converted;
      if (backend.command.empty()) {
        converted = backend.warp == 1.0 ? req.source : pitch_shift(req.source, backend.warp);
      } else {
        const std::string out = run_external_backend(backend, req, tmp_dir);
        converted = load_wav(out);
        std::filesystem::remove(out);
      }
      return compute_mel(align_to_chunks(converted, chunk_samples), cfg);
    }
    case VcBackend::Kind::TwoStage: {
      if (backend.command.empty()) throw RuntimeError("vc: two-stage backend needs an external command");
      const std::string out = run_external_backend(backend, req, tmp_dir);
      MelSpectrogram m = load_mel(out);
      std::filesystem::remove(out);
      return trim_mel_to_chunks(std::move(m), chunk_frames);
    }
  }
  throw RuntimeError("vc: unknown backend kind");
}

}  // namespace vox
