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

#include "voxtracer/config.hpp"

#include <fstream>

#include "voxtracer/errors.hpp"

namespace vox {

KeyValueFile KeyValueFile::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  KeyValueFile out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config: missing '=' at " + path + ":" + std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config: empty key at " + path + ":" + std::to_string(lineno));
    out.kv_[key] = value;
  }
  return out;
}

std::string KeyValueFile::get(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw ConfigError("config: missing required key '" + key + "'");
  return it->second;
}

std::string KeyValueFile::get_or(const std::string& key, const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

double KeyValueFile::num(const std::string& key) const {
  try {
    return std::stod(get(key));
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    throw ConfigError("config: key '" + key + "' is not a number");
  }
}

double KeyValueFile::num_or(const std::string& key, double fallback) const {
  return has(key) ? num(key) : fallback;
}

long KeyValueFile::integer_or(const std::string& key, long fallback) const {
  return has(key) ? static_cast<long>(num(key)) : fallback;
}

bool KeyValueFile::flag_or(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = lowercase(get(key));
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: key '" + key + "' is not a boolean");
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  const KeyValueFile kv = KeyValueFile::load(path);
  ExperimentConfig c;
  if (!kv.has("seed")) throw ConfigError("config: seed is mandatory");
  c.seed = static_cast<std::uint64_t>(kv.num("seed"));
  c.out_dir = kv.get("out_dir");
  c.data_root = kv.get_or("data_root", c.out_dir + "/data");
  c.registry_path = kv.get_or("registry", c.out_dir + "/registry.txt");
  c.tmp_dir = kv.get_or("tmp_dir", "/tmp");

  c.n_speakers = static_cast<int>(kv.integer_or("dataset.speakers", c.n_speakers));
  c.utts_per_speaker = static_cast<int>(kv.integer_or("dataset.utts_per_speaker", c.utts_per_speaker));
  c.samples_per_utt = static_cast<int>(kv.integer_or("dataset.samples_per_utt", c.samples_per_utt));
  c.train_utts = static_cast<int>(kv.integer_or("dataset.train_utts", c.train_utts));
  c.enroll_utts = static_cast<int>(kv.integer_or("dataset.enroll_utts", c.enroll_utts));
  c.chunk_samples = static_cast<int>(kv.integer_or("chunk_samples", c.chunk_samples));
  c.vote_chunks = static_cast<int>(kv.integer_or("vote_chunks", c.vote_chunks));

  c.stft.window_length = static_cast<int>(kv.integer_or("stft.window", 1024));
  c.stft.hop = static_cast<int>(kv.integer_or("stft.hop", 256));
  c.stft.bands = static_cast<int>(kv.integer_or("stft.bands", 80));
  c.stft.fmin = kv.num_or("stft.fmin", 0.0);
  c.stft.fmax = kv.num_or("stft.fmax", 8000.0);
  if (c.chunk_samples % c.stft.hop != 0) throw ConfigError("config: chunk_samples must be a multiple of stft.hop");

  c.flow.n_blocks = static_cast<int>(kv.integer_or("flow.blocks", 6));
  c.flow.cond_channels = static_cast<int>(kv.integer_or("flow.cond_channels", 64));
  c.flow.cond_layers = static_cast<int>(kv.integer_or("flow.cond_layers", 4));
  c.flow.mel_bands = c.stft.bands;
  c.flow.hop = c.stft.hop;
  if (c.chunk_samples % c.flow.squeeze != 0) throw ConfigError("config: chunk_samples must be a multiple of the squeeze factor");

  c.vae.wn_channels = static_cast<int>(kv.integer_or("vae.channels", 128));
  c.vae.encoder_layers = static_cast<int>(kv.integer_or("vae.layers", 4));
  c.vae.head_gain = kv.num_or("vae.head_gain", 6.0);
  c.vae.logvar_bias = kv.num_or("vae.logvar_bias", -2.0);

  c.extractor.hidden = static_cast<int>(kv.integer_or("extractor.hidden", 128));
  c.extractor.layers = static_cast<int>(kv.integer_or("extractor.layers", 2));
  c.extractor.frame_stride = static_cast<int>(kv.integer_or("extractor.frame_stride", 1));
  c.extractor.stft = c.stft;
  c.ext_train.steps = static_cast<int>(kv.integer_or("extractor.steps", 200));
  c.ext_train.lr = kv.num_or("extractor.lr", 1e-2);
  c.ext_train.speakers_per_batch = static_cast<int>(kv.integer_or("extractor.speakers_per_batch", 0));
  c.ext_train.utts_per_speaker = static_cast<int>(kv.integer_or("extractor.utts_per_batch", 4));
  c.ext_train.crop_frames = static_cast<int>(kv.integer_or("extractor.crop_frames", 64));
  c.ext_train.seed = c.seed;

  c.train.lr = kv.num_or("train.lr", 1e-4);
  c.train.beta1 = kv.num_or("train.beta1", 0.9);
  c.train.beta2 = kv.num_or("train.beta2", 0.999);
  c.train.batch_encoder = static_cast<int>(kv.integer_or("train.batch_encoder", 8));
  c.train.batch_generator = static_cast<int>(kv.integer_or("train.batch_generator", 16));
  c.train.batch_tracing = static_cast<int>(kv.integer_or("train.batch_tracing", 20));
  c.train.lambda_z = kv.num_or("train.lambda_z", 1.0);
  c.train.lambda_v = kv.num_or("train.lambda_v", 1.0);
  const std::string norm = lowercase(kv.get_or("train.loss_norm", "l1"));
  if (norm == "l1") c.train.loss_norm = TrainConfig::LossNorm::L1;
  else if (norm == "l2") c.train.loss_norm = TrainConfig::LossNorm::L2;
  else throw ConfigError("config: train.loss_norm must be l1 or l2");
  c.train.seed = c.seed;
  c.train.encoder_steps = static_cast<int>(kv.integer_or("train.encoder_steps", 150));
  c.train.generator_steps = static_cast<int>(kv.integer_or("train.generator_steps", 300));
  c.train.tracing_steps = static_cast<int>(kv.integer_or("train.tracing_steps", 300));
  c.train.kl_stop_per_entry = kv.num_or("train.kl_stop_per_entry", 0.35);
  c.train.generator_crop = static_cast<int>(kv.integer_or("train.generator_crop", 2048));
  c.train.tracing_crop = static_cast<int>(kv.integer_or("train.tracing_crop", 4096));
  c.train.joint_tracing = kv.flag_or("train.joint_tracing", true);
  c.train.report_every = static_cast<int>(kv.integer_or("train.report_every", 10));
  c.train.channel_variants = static_cast<int>(kv.integer_or("train.channel_variants", 2));
  if (c.train.lambda_z < 0 || c.train.lambda_v < 0) throw ConfigError("config: lambda weights must be >= 0");
  if (c.train.batch_encoder < 1 || c.train.batch_generator < 1 || c.train.batch_tracing < 1)
    throw ConfigError("config: batch sizes must be >= 1");

  c.restoration.steps = static_cast<int>(kv.integer_or("restoration.steps", 300));
  c.restoration.batch = static_cast<int>(kv.integer_or("restoration.batch", 8));
  c.restoration.lr = kv.num_or("restoration.lr", 1e-3);
  c.restoration.seed = c.seed;

  c.channels_allow_any = kv.flag_or("channels_allow_any", false);
  c.train.channels = parse_channel_list(kv.get_or("train.channels", "none"), c.channels_allow_any);
  c.eval_channels = parse_channel_list(kv.get_or("channels", "none"), c.channels_allow_any);

  for (const std::string codec : {"mp3", "aac", "opus", "silk"}) {
    const std::string base = "codec." + std::string(codec) + ".";
    if (kv.has(base + "encode")) {
      CodecTemplates t;
      t.encode_cmd = kv.get(base + "encode");
      t.decode_cmd = kv.get(base + "decode");
      t.extension = kv.get_or(base + "ext", std::string(codec));
      t.actual_name = kv.get_or(base + "actual_name", std::string(codec));
      t.version = kv.get_or(base + "version", "unpinned");
      c.codecs.add(codec, std::move(t));
    }
  }

  const std::string bk = lowercase(kv.get_or("backend.kind", "identity_toy"));
  if (bk == "identity_toy") {
    c.backend = VcBackend::identity_toy();
  } else if (bk == "toy_warp") {
    c.backend = VcBackend::toy_warp(kv.num_or("backend.warp", 1.25));
  } else if (bk == "one_stage" || bk == "two_stage") {
    c.backend.kind = bk == "one_stage" ? VcBackend::Kind::OneStage : VcBackend::Kind::TwoStage;
    c.backend.command = kv.get("backend.command");
  } else {
    throw ConfigError("config: backend.kind must be identity_toy, toy_warp, one_stage or two_stage");
  }
  return c;
}

}  // namespace vox
