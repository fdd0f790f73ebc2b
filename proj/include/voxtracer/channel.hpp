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

#ifndef VOXTRACER_CHANNEL_HPP_
#define VOXTRACER_CHANNEL_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "voxtracer/audio.hpp"
#include "voxtracer/util.hpp"

namespace vox {

struct ProcessingOp {
  enum class Kind { GaussianNoise, ResampleRoundtrip, Requantize, Amplitude, Lowpass, Median };
  Kind kind;
  double param = 0.0;

  std::string label() const;
};

// Declarative description of one transmission scenario: codec round trip
// followed by audio processing ops in listed order.
struct ChannelSpec {
  std::string codec = "none";  // none | mp3 | aac | opus | silk
  std::string bitrate;         // kbps as text, or "vbr"; empty for none
  std::vector<ProcessingOp> ops;

  std::string label() const;
  bool is_identity() const { return codec == "none" && ops.empty(); }
};

// Grammar: "none" or "<codec>@<bitrate>" with optional "+op(arg)" items,
// e.g. "mp3@64 + noise(30) + amp(0.9)". Parameters outside the default
// enumerated sets are rejected unless allow_any is set.
ChannelSpec parse_channel_spec(const std::string& text, bool allow_any = false);
std::vector<ChannelSpec> parse_channel_list(const std::string& text, bool allow_any = false);

// Encoder/decoder command templates for one codec; placeholders {in}, {out},
// {bitrate}, {rate}. Versions are pinned in the experiment config.
struct CodecTemplates {
  std::string encode_cmd;
  std::string decode_cmd;
  std::string extension;
  std::string actual_name;  // reported codec (e.g. "opus-voip" standing in for silk)
  std::string version;
};

class CodecRegistry {
 public:
  void add(const std::string& codec, CodecTemplates t) { map_[codec] = std::move(t); }
  const CodecTemplates& get(const std::string& codec) const;
  bool has(const std::string& codec) const { return map_.count(codec) != 0; }

 private:
  std::map<std::string, CodecTemplates> map_;
};

// --- audio processing ops (all length-preserving) ---

Waveform add_gaussian_noise(const Waveform& w, double snr_db, std::uint64_t seed);
Waveform resample(const Waveform& w, int new_rate);
Waveform resample_roundtrip(const Waveform& w, int rate);
Waveform requantize(const Waveform& w, int bits);
Waveform amplitude_scale(const Waveform& w, double factor);
// order-5 Butterworth, zero-phase (forward-backward).
Waveform lowpass_butterworth(const Waveform& w, double cutoff_hz);
// replicate-edge sliding median.
Waveform median_filter_wave(const Waveform& w, int window);

struct RealignResult {
  Waveform aligned;
  int shift = 0;    // samples the degraded signal lags the reference
  double peak = 0;  // normalized cross-correlation at the chosen lag
};

// Shift by the argmax of normalized cross-correlation over [-max_lag, max_lag],
// then trim/pad to the reference length. Peak below 0.2 raises an error.
RealignResult realign(const Waveform& reference, const Waveform& degraded, int max_lag = 2048);

// Full transmission simulation: PCM16 saving error -> codec round trip (with
// realignment) -> processing ops in order. Output length equals input length;
// fully deterministic per seed.
Waveform transmit(const Waveform& w, const ChannelSpec& spec, std::uint64_t seed, const CodecRegistry& codecs,
                  const std::string& tmp_dir = "/tmp");

}  // namespace vox

#endif  // VOXTRACER_CHANNEL_HPP_
