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

#ifndef VOXTRACER_CONFIG_HPP_
#define VOXTRACER_CONFIG_HPP_

#include <map>
#include <optional>
#include <string>

#include "voxtracer/channel.hpp"
#include "voxtracer/flow.hpp"
#include "voxtracer/id_vae.hpp"
#include "voxtracer/restoration.hpp"
#include "voxtracer/speaker.hpp"
#include "voxtracer/training.hpp"
#include "voxtracer/vc.hpp"

namespace vox {

// key = value text file; '#' comments; later keys override earlier ones.
class KeyValueFile {
 public:
  static KeyValueFile load(const std::string& path);

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  std::string get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double num(const std::string& key) const;
  double num_or(const std::string& key, double fallback) const;
  long integer_or(const std::string& key, long fallback) const;
  bool flag_or(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;  // mandatory
  std::string out_dir;
  std::string data_root;
  std::string registry_path;
  std::string tmp_dir = "/tmp";

  int n_speakers = 10;
  int utts_per_speaker = 5;
  int samples_per_utt = 3 * kChunkSamples;
  int train_utts = 3;   // per speaker; the rest are held out for evaluation
  int enroll_utts = 2;  // enrollment utterances per speaker (from the train split)
  int chunk_samples = kChunkSamples;
  int vote_chunks = 5;

  StftConfig stft;
  FlowConfig flow;
  IdVaeConfig vae;
  ExtractorConfig extractor;
  ExtractorTrainConfig ext_train;
  TrainConfig train;
  RestorationTrainConfig restoration;

  std::vector<ChannelSpec> eval_channels;
  bool channels_allow_any = false;
  CodecRegistry codecs;
  VcBackend backend;

  std::string extractor_ckpt() const { return out_dir + "/extractor.ckpt"; }
  std::string encoder_ckpt() const { return out_dir + "/id_encoder.ckpt"; }
  std::string generator_ckpt() const { return out_dir + "/generator.ckpt"; }
  std::string inverter_ckpt() const { return out_dir + "/inverter.ckpt"; }
  std::string decoder_ckpt() const { return out_dir + "/id_decoder.ckpt"; }
  std::string restoration_ckpt() const { return out_dir + "/restoration.ckpt"; }

  static ExperimentConfig from_file(const std::string& path);
};

}  // namespace vox

#endif  // VOXTRACER_CONFIG_HPP_
