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

#include "voxtracer/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "voxtracer/errors.hpp"

namespace vox {

namespace {

constexpr double kTwoPi = 6.2831853071795864769;

double formant_gain(const ToySpeaker& spk, double freq) {
  double g = 0.05;
  for (int k = 0; k < 3; ++k) {
    const double d = (freq - spk.formants[k]) / spk.widths[k];
    g += std::exp(-0.5 * d * d);
  }
  // gentle spectral tilt
  g *= std::pow(std::max(freq, 50.0) / 500.0, spk.tilt);
  return g;
}

}  // namespace

ToySpeaker make_toy_speaker(std::uint64_t seed, int index) {
  Rng rng(derive_seed(seed, 0x5D00 + static_cast<std::uint64_t>(index)));
  ToySpeaker s;
  // pitches interleaved across a ~1.2 octave range so neighbors differ
  s.f0 = 105.0 * std::pow(2.0, 1.2 * ((index * 7) % 20) / 20.0) * rng.uniform(0.97, 1.03);
  s.formants[0] = rng.uniform(350.0, 850.0);
  s.formants[1] = rng.uniform(1000.0, 2400.0);
  s.formants[2] = rng.uniform(2600.0, 3900.0);
  s.widths[0] = rng.uniform(80.0, 160.0);
  s.widths[1] = rng.uniform(120.0, 260.0);
  s.widths[2] = rng.uniform(200.0, 420.0);
  s.tilt = rng.uniform(-0.6, 0.1);
  return s;
}

ToySpeaker make_bandlimited_speaker(double lo_hz, double hi_hz) {
  ToySpeaker s;
  const double mid = 0.5 * (lo_hz + hi_hz);
  const double width = (hi_hz - lo_hz) / 4.0;
  s.f0 = std::max(90.0, lo_hz / 4.0);
  for (int k = 0; k < 3; ++k) {
    s.formants[k] = mid + (k - 1) * width;
    s.widths[k] = width;
  }
  s.tilt = 0.0;
  return s;
}

Waveform synth_utterance(const ToySpeaker& spk, std::uint64_t seed, int n_samples, int sample_rate) {
  if (n_samples <= 0) throw RuntimeError("synth: n_samples must be positive");
  Rng rng(derive_seed(seed, 0x7A11));
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(static_cast<std::size_t>(n_samples), 0.0);

  // piecewise-linear f0 contour: a new target every ~0.15 s
  const int seg = sample_rate * 3 / 20;
  std::vector<double> f0(static_cast<std::size_t>(n_samples));
  double cur = spk.f0 * rng.uniform(0.92, 1.08);
  double next = spk.f0 * rng.uniform(0.92, 1.08);
  for (int i = 0; i < n_samples; ++i) {
    const int p = i % seg;
    if (p == 0 && i > 0) {
      cur = next;
      next = spk.f0 * rng.uniform(0.88, 1.12);
    }
    f0[i] = cur + (next - cur) * p / seg;
  }

  const double syl_rate = rng.uniform(2.0, 4.5);
  const double syl_phase = rng.uniform(0.0, kTwoPi);
  const double fmax = std::min(7800.0, sample_rate / 2.0 * 0.7);

  const int max_h = static_cast<int>(fmax / (spk.f0 * 0.85));
  std::vector<double> phase(static_cast<std::size_t>(max_h) + 1);
  for (int h = 1; h <= max_h; ++h) phase[h] = rng.uniform(0.0, kTwoPi);
  std::vector<double> amp(static_cast<std::size_t>(max_h) + 1, 0.0);

  const int block = 128;
  for (int i = 0; i < n_samples; ++i) {
    if (i % block == 0) {
      for (int h = 1; h <= max_h; ++h) {
        const double f = h * f0[i];
        amp[h] = f < fmax ? formant_gain(spk, f) / std::sqrt(static_cast<double>(h)) : 0.0;
      }
    }
    const double t = static_cast<double>(i) / sample_rate;
    const double syl = 0.35 + 0.65 * std::pow(0.5 + 0.5 * std::sin(kTwoPi * syl_rate * t + syl_phase), 1.5);
    double acc = 0.0;
    for (int h = 1; h <= max_h; ++h) {
      if (amp[h] < 1e-3) continue;
      phase[h] += kTwoPi * h * f0[i] / sample_rate;
      if (phase[h] > kTwoPi) phase[h] -= kTwoPi;
      acc += amp[h] * std::sin(phase[h]);
    }
    w.samples[i] = syl * acc + 0.002 * rng.gaussian();
  }

  double peak = 1e-9;
  for (double s : w.samples) peak = std::max(peak, std::abs(s));
  const double norm = 0.65 / peak;
  for (double& s : w.samples) s *= norm;
  return w;
}

std::map<std::string, std::vector<Waveform>> ToyDataset::as_map() const {
  std::map<std::string, std::vector<Waveform>> out;
  for (std::size_t i = 0; i < speaker_ids.size(); ++i) out[speaker_ids[i]] = utterances[i];
  return out;
}

ToyDataset make_toy_dataset(std::uint64_t seed, int n_speakers, int utts_per_speaker, int samples_per_utt,
                            int sample_rate) {
  ToyDataset ds;
  for (int s = 0; s < n_speakers; ++s) {
    char id[16];
    std::snprintf(id, sizeof(id), "spk%02d", s);
    ds.speaker_ids.push_back(id);
    ToySpeaker spk = make_toy_speaker(seed, s);
    std::vector<Waveform> utts;
    for (int u = 0; u < utts_per_speaker; ++u)
      utts.push_back(synth_utterance(spk, derive_seed(seed, 0xA000 + s * 1000 + u), samples_per_utt, sample_rate));
    ds.utterances.push_back(std::move(utts));
  }
  return ds;
}

void write_dataset(const ToyDataset& ds, const std::string& data_root) {
  std::filesystem::create_directories(data_root);
  std::ofstream manifest(data_root + "/manifest.tsv");
  if (!manifest) throw RuntimeError("dataset: cannot write manifest in " + data_root);
  for (std::size_t s = 0; s < ds.speaker_ids.size(); ++s) {
    const std::string spk_dir = data_root + "/" + ds.speaker_ids[s];
    std::filesystem::create_directories(spk_dir);
    for (std::size_t u = 0; u < ds.utterances[s].size(); ++u) {
      char name[32];
      std::snprintf(name, sizeof(name), "utt%03d.wav", static_cast<int>(u));
      const std::string rel = ds.speaker_ids[s] + "/" + name;
      save_wav(ds.utterances[s][u], data_root + "/" + rel);
      manifest << ds.speaker_ids[s] << '\t' << rel << '\n';
    }
  }
}

ToyDataset load_dataset(const std::string& data_root) {
  std::ifstream manifest(data_root + "/manifest.tsv");
  if (!manifest) throw DependencyError("dataset: cannot open " + data_root + "/manifest.tsv");
  ToyDataset ds;
  std::map<std::string, std::size_t> index;
  std::string line;
  while (std::getline(manifest, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split(line, '\t');
    if (fields.size() != 2) throw FormatError("dataset: bad manifest line: " + line);
    auto it = index.find(fields[0]);
    if (it == index.end()) {
      index[fields[0]] = ds.speaker_ids.size();
      ds.speaker_ids.push_back(fields[0]);
      ds.utterances.emplace_back();
      it = index.find(fields[0]);
    }
    ds.utterances[it->second].push_back(load_wav(data_root + "/" + fields[1]));
  }
  if (ds.speaker_ids.empty()) throw FormatError("dataset: empty manifest in " + data_root);
  return ds;
}

}  // namespace vox
