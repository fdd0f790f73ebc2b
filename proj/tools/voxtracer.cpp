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

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "voxtracer/checkpoint.hpp"
#include "voxtracer/errors.hpp"
#include "voxtracer/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDependency = 3;
constexpr int kExitRuntime = 4;

vox::ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override,
                                  const std::string& out_override) {
  vox::ExperimentConfig cfg = vox::ExperimentConfig::from_file(path);
  if (seed_override) {
    cfg.seed = *seed_override;
    cfg.train.seed = *seed_override;
    cfg.ext_train.seed = *seed_override;
    cfg.restoration.seed = *seed_override;
  }
  if (!out_override.empty()) cfg.out_dir = out_override;
  return cfg;
}

double read_threshold(const vox::ExperimentConfig& cfg, std::optional<double> flag) {
  if (flag) return *flag;
  std::ifstream f(cfg.out_dir + "/threshold.txt");
  double t = 0.0;
  if (!(f >> t))
    throw vox::DependencyError("no threshold: pass --threshold or run `voxtracer evaluate` first (missing " +
                               cfg.out_dir + "/threshold.txt)");
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxtracer: traceable voice conversion pipeline"};
  app.require_subcommand(1);

  std::string config_path, out_dir_override;
  std::optional<std::uint64_t> seed_override;
  app.add_option("--config", config_path, "experiment config file")->required();
  app.add_option("--seed", seed_override, "override the config seed");
  app.add_option("--out", out_dir_override, "override the output directory");

  auto* c_mkdata = app.add_subcommand("make-dataset", "synthesize the toy speaker dataset");
  auto* c_ext = app.add_subcommand("train-extractor", "train the speaker ID extractor");
  auto* c_enroll = app.add_subcommand("enroll", "register training speakers into the registry");
  auto* c_hiding = app.add_subcommand("train-hiding", "train ID encoder and speech generator");
  auto* c_tracing = app.add_subcommand("train-tracing", "train speech inverter and ID decoder");
  auto* c_resto = app.add_subcommand("train-restoration", "train the speech restoration model");

  std::string src_wav, tgt_wav, in_wav, out_path, channel_str, pairs_path;
  std::optional<double> threshold_flag;
  std::optional<int> vote_chunks_flag;
  std::uint64_t transmit_seed = 1;

  auto* c_hide = app.add_subcommand("hide", "convert + hide the source identity");
  c_hide->add_option("--source", src_wav, "source speech wav")->required();
  c_hide->add_option("--target", tgt_wav, "target speech wav")->required();
  c_hide->add_option("--out-wav", out_path, "output wav")->required();

  auto* c_tx = app.add_subcommand("transmit", "simulate lossy transmission");
  c_tx->add_option("--in", in_wav, "input wav")->required();
  c_tx->add_option("--channel", channel_str, "channel spec, e.g. 'mp3@64 + noise(30)'")->required();
  c_tx->add_option("--tx-seed", transmit_seed, "transmission randomness seed");
  c_tx->add_option("--out-wav", out_path, "output wav")->required();

  auto* c_trace = app.add_subcommand("trace", "recover and verify the hidden identity");
  c_trace->add_option("--in", in_wav, "degraded wav")->required();
  c_trace->add_option("--threshold", threshold_flag, "verification threshold (default: tuned value on disk)");
  c_trace->add_option("--chunks", vote_chunks_flag, "vote over this many chunks (odd)");
  c_trace->add_option("--out-csv", out_path, "per-chunk decision csv");

  auto* c_eval = app.add_subcommand("evaluate", "full robustness evaluation (metrics + curves)");
  auto* c_plot = app.add_subcommand("plot-embeddings", "2-D projection of source vs recovered embeddings");
  c_plot->add_option("--pairs", pairs_path, "pairs file (default: evaluate output)");
  c_plot->add_option("--out-png", out_path, "output image")->required();

  auto* c_restore = app.add_subcommand("restore", "restore source-sounding speech from degraded input");
  c_restore->add_option("--in", in_wav, "degraded wav")->required();
  c_restore->add_option("--out-wav", out_path, "restored wav")->required();
  c_restore->add_option("--threshold", threshold_flag, "verification threshold for the embedding recovery");

  CLI11_PARSE(app, argc, argv);

  try {
    vox::ExperimentConfig cfg = load_config(config_path, seed_override, out_dir_override);
    std::filesystem::create_directories(cfg.out_dir);

    if (c_mkdata->parsed()) {
      vox::exp_make_dataset(cfg);
      std::cout << "dataset written to " << cfg.data_root << "\n";
    } else if (c_ext->parsed()) {
      vox::exp_train_extractor(cfg);
      std::cout << "extractor checkpoint: " << cfg.extractor_ckpt() << "\n";
    } else if (c_enroll->parsed()) {
      vox::exp_enroll(cfg);
      std::cout << "registry: " << cfg.registry_path << "\n";
    } else if (c_hiding->parsed()) {
      vox::exp_train_hiding(cfg);
      std::cout << "hiding checkpoints: " << cfg.encoder_ckpt() << ", " << cfg.generator_ckpt() << "\n";
    } else if (c_tracing->parsed()) {
      vox::TracingSummary s = vox::exp_train_tracing(cfg);
      std::cout << "tracing checkpoints: " << cfg.inverter_ckpt() << ", " << cfg.decoder_ckpt() << "\n"
                << "validation z-L1 (inverter vs generator inverse): " << s.eval.inverter_z_l1 << " vs "
                << s.eval.generator_z_l1 << "\n";
    } else if (c_resto->parsed()) {
      vox::exp_train_restoration(cfg);
      std::cout << "restoration checkpoint: " << cfg.restoration_ckpt() << "\n";
    } else if (c_hide->parsed()) {
      vox::SpeakerExtractor ext = vox::load_extractor_ckpt(cfg);
      vox::IdEncoder enc = vox::load_encoder_ckpt(cfg);
      vox::FlowModel gen = vox::load_flow_ckpt(cfg, cfg.generator_ckpt());
      vox::Waveform out = vox::exp_hide(cfg, vox::load_wav(src_wav), vox::load_wav(tgt_wav), ext, enc, gen);
      vox::save_wav(out, out_path);
      std::cout << "hidden speech: " << out_path << " (" << out.duration_seconds() << " s)\n";
    } else if (c_tx->parsed()) {
      vox::ChannelSpec spec = vox::parse_channel_spec(channel_str, cfg.channels_allow_any);
      vox::Waveform out = vox::transmit(vox::load_wav(in_wav), spec, transmit_seed, cfg.codecs, cfg.tmp_dir);
      vox::save_wav(out, out_path);
      std::cout << "transmitted through " << spec.label() << ": " << out_path << "\n";
    } else if (c_trace->parsed()) {
      vox::FlowModel inv = vox::load_flow_ckpt(cfg, cfg.inverter_ckpt());
      vox::IdDecoder dec = vox::load_decoder_ckpt(cfg);
      vox::SpeakerRegistry reg = vox::SpeakerRegistry::load(cfg.registry_path);
      const double threshold = read_threshold(cfg, threshold_flag);
      vox::TraceOutcome res = vox::exp_trace(cfg, vox::load_wav(in_wav), reg, inv, dec, threshold, vote_chunks_flag);
      for (std::size_t i = 0; i < res.decisions.size(); ++i) {
        const auto& d = res.decisions[i];
        std::cout << "chunk " << i << ": score " << d.best_score << " -> "
                  << (d.claimed_speaker ? *d.claimed_speaker : std::string("none")) << "\n";
      }
      std::cout << "verdict (" << res.voted_chunks << " chunks): "
                << (res.verdict ? *res.verdict : std::string("not identified")) << "\n";
      if (!out_path.empty()) {
        std::ofstream f(out_path);
        f << "chunk,score,claimed,threshold\n";
        for (std::size_t i = 0; i < res.decisions.size(); ++i) {
          const auto& d = res.decisions[i];
          f << i << ',' << d.best_score << ',' << (d.claimed_speaker ? *d.claimed_speaker : std::string("none"))
            << ',' << d.threshold << '\n';
        }
      }
    } else if (c_eval->parsed()) {
      vox::EvaluateOutput out = vox::exp_evaluate(cfg);
      vox::save_evaluate_output(out, cfg);
      for (const auto& row : out.rows)
        std::cout << row.condition << ": TA " << row.ta << ", EER " << row.eer << ", MCS " << row.mcs << ", MTC "
                  << row.mtc_seconds << " s\n";
      std::cout << "metrics: " << cfg.out_dir << "/metrics.csv\n";
    } else if (c_plot->parsed()) {
      const std::string path = pairs_path.empty() ? cfg.out_dir + "/embedding_pairs.tsv" : pairs_path;
      std::vector<vox::EmbeddingPair> pairs = vox::load_pairs_file(path);
      vox::plot_embedding_pairs(pairs, out_path);
      std::cout << "plot: " << out_path << " (" << pairs.size() << " pairs)\n";
    } else if (c_restore->parsed()) {
      vox::FlowModel inv = vox::load_flow_ckpt(cfg, cfg.inverter_ckpt());
      vox::FlowModel gen = vox::load_flow_ckpt(cfg, cfg.generator_ckpt());
      vox::IdDecoder dec = vox::load_decoder_ckpt(cfg);
      vox::RestorationModel resto = vox::load_restoration_ckpt(cfg);
      vox::Waveform degraded = vox::load_wav(in_wav);
      std::vector<vox::Waveform> chunks = vox::chunk_split(degraded, cfg.chunk_samples);
      if (chunks.empty()) throw vox::RuntimeError("restore: input shorter than one chunk");
      std::vector<double> acc(vox::kEmbeddingDim, 0.0);
      for (const auto& c : chunks) {
        vox::SpeakerEmbedding e = vox::recover_embedding(c, inv, dec, cfg.stft);
        for (int i = 0; i < vox::kEmbeddingDim; ++i) acc[i] += e.values[i];
      }
      vox::SpeakerEmbedding recovered = vox::SpeakerEmbedding::from_raw(std::move(acc));
      vox::Waveform restored = vox::restore_speech(degraded, recovered, resto, gen, cfg.stft, cfg.seed);
      vox::save_wav(restored, out_path);
      std::cout << "restored speech: " << out_path << "\n";
    }
    return kExitOk;
  } catch (const vox::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const vox::DependencyError& e) {
    std::cerr << "dependency error: " << e.what() << "\n";
    return kExitDependency;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
