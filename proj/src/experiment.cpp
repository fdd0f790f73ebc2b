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

#include "voxtracer/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "voxtracer/checkpoint.hpp"
#include "voxtracer/errors.hpp"

namespace vox {

void save_model_checkpoint(const ParamStore& ps, const std::map<std::string, std::string>& meta,
                           const std::string& path) {
  Checkpoint ck;
  ck.put_params(ps);
  ck.meta = meta;
  ck.save(path);
}

namespace {

Checkpoint load_ck(const std::string& path, const std::string& expected_kind) {
  Checkpoint ck = Checkpoint::load(path);
  auto it = ck.meta.find("model");
  if (it == ck.meta.end() || it->second != expected_kind)
    throw DependencyError("checkpoint " + path + " is not a " + expected_kind + " checkpoint");
  return ck;
}

}  // namespace

SpeakerExtractor load_extractor_ckpt(const ExperimentConfig& cfg) {
  Checkpoint ck = load_ck(cfg.extractor_ckpt(), "extractor");
  SpeakerExtractor ext(cfg.extractor, cfg.seed);
  ck.restore_params(ext.params());
  return ext;
}

IdEncoder load_encoder_ckpt(const ExperimentConfig& cfg) {
  Checkpoint ck = load_ck(cfg.encoder_ckpt(), "id_encoder");
  IdEncoder enc(cfg.vae, cfg.seed);
  ck.restore_params(enc.params());
  return enc;
}

FlowModel load_flow_ckpt(const ExperimentConfig& cfg, const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  auto it = ck.meta.find("model");
  if (it == ck.meta.end() || (it->second != "flow_generator" && it->second != "flow_inverter"))
    throw DependencyError("checkpoint " + path + " is not a flow checkpoint");
  FlowModel flow(cfg.flow, cfg.seed);
  ck.restore_params(flow.params());
  flow.check_mixing_invertible();
  return flow;
}

IdDecoder load_decoder_ckpt(const ExperimentConfig& cfg) {
  Checkpoint ck = load_ck(cfg.decoder_ckpt(), "id_decoder");
  IdDecoder dec(cfg.vae, cfg.seed);
  ck.restore_params(dec.params());
  return dec;
}

RestorationModel load_restoration_ckpt(const ExperimentConfig& cfg) {
  Checkpoint ck = load_ck(cfg.restoration_ckpt(), "restoration");
  RestorationModel model(RestorationConfig{}, cfg.seed);
  ck.restore_params(model.params());
  return model;
}

ToyDataset train_split(const ToyDataset& ds, int train_utts) {
  ToyDataset out;
  out.speaker_ids = ds.speaker_ids;
  for (const auto& utts : ds.utterances) {
    const int n = std::min<int>(train_utts, static_cast<int>(utts.size()));
    out.utterances.emplace_back(utts.begin(), utts.begin() + n);
  }
  return out;
}

ToyDataset test_split(const ToyDataset& ds, int train_utts) {
  ToyDataset out;
  out.speaker_ids = ds.speaker_ids;
  for (const auto& utts : ds.utterances) {
    const int n = std::min<int>(train_utts, static_cast<int>(utts.size()));
    out.utterances.emplace_back(utts.begin() + n, utts.end());
  }
  return out;
}

void exp_make_dataset(const ExperimentConfig& cfg) {
  ToyDataset ds = make_toy_dataset(cfg.seed, cfg.n_speakers, cfg.utts_per_speaker, cfg.samples_per_utt);
  write_dataset(ds, cfg.data_root);
}

void exp_train_extractor(const ExperimentConfig& cfg) {
  ToyDataset ds = load_dataset(cfg.data_root);
  ToyDataset train = train_split(ds, cfg.train_utts);
  SpeakerExtractor ext = train_extractor(train.as_map(), cfg.extractor, cfg.ext_train);
  std::filesystem::create_directories(cfg.out_dir);
  save_model_checkpoint(ext.params(), {{"model", "extractor"}, {"seed", std::to_string(cfg.seed)}},
                        cfg.extractor_ckpt());
}

void exp_enroll(const ExperimentConfig& cfg) {
  ToyDataset ds = load_dataset(cfg.data_root);
  ToyDataset train = train_split(ds, cfg.train_utts);
  SpeakerExtractor ext = load_extractor_ckpt(cfg);
  SpeakerRegistry reg;
  for (std::size_t s = 0; s < train.speaker_ids.size(); ++s) {
    std::vector<SpeakerEmbedding> embs;
    const int n = std::min<int>(cfg.enroll_utts, static_cast<int>(train.utterances[s].size()));
    for (int u = 0; u < n; ++u) embs.push_back(ext.extract(train.utterances[s][u]));
    reg.register_speaker(train.speaker_ids[s], embs);
  }
  std::filesystem::create_directories(cfg.out_dir);
  reg.save(cfg.registry_path);
}

void exp_train_hiding(const ExperimentConfig& cfg) {
  ToyDataset ds = load_dataset(cfg.data_root);
  ToyDataset train = train_split(ds, cfg.train_utts);
  SpeakerExtractor ext = load_extractor_ckpt(cfg);
  HidingDataset data = build_hiding_dataset(train, ext, cfg.stft, cfg.chunk_samples);

  IdEncoder encoder(cfg.vae, cfg.seed);
  FlowModel generator(cfg.flow, cfg.seed);
  TrainReport report = train_hiding(data, cfg.train, encoder, generator);

  std::filesystem::create_directories(cfg.out_dir);
  save_model_checkpoint(encoder.params(), {{"model", "id_encoder"}, {"seed", std::to_string(cfg.seed)}},
                        cfg.encoder_ckpt());
  save_model_checkpoint(generator.params(), {{"model", "flow_generator"}, {"seed", std::to_string(cfg.seed)}},
                        cfg.generator_ckpt());
  report.save_csv(cfg.out_dir + "/train_hiding.csv");
}

TracingSummary exp_train_tracing(const ExperimentConfig& cfg) {
  ToyDataset ds = load_dataset(cfg.data_root);
  ToyDataset train = train_split(ds, cfg.train_utts);
  SpeakerExtractor ext = load_extractor_ckpt(cfg);
  IdEncoder encoder = load_encoder_ckpt(cfg);
  FlowModel generator = load_flow_ckpt(cfg, cfg.generator_ckpt());
  HidingDataset data = build_hiding_dataset(train, ext, cfg.stft, cfg.chunk_samples);

  // hold out the last training utterance of each speaker for the paired check
  std::vector<int> val_items;
  for (std::size_t i = cfg.train_utts - 1; i < data.size(); i += cfg.train_utts)
    val_items.push_back(static_cast<int>(i));

  FlowModel inverter(cfg.flow, cfg.seed);
  inverter.copy_params_from(generator);  // initialized with the generator weights
  IdDecoder decoder(cfg.vae, cfg.seed);

  TracingResult res = train_tracing(data, val_items, encoder, generator, inverter, decoder, cfg.train, cfg.codecs,
                                    cfg.tmp_dir);

  const std::string gen_fp = std::to_string(file_fingerprint(cfg.generator_ckpt()));
  save_model_checkpoint(inverter.params(),
                        {{"model", "flow_inverter"},
                         {"seed", std::to_string(cfg.seed)},
                         {"initialized_from", cfg.generator_ckpt()},
                         {"initialized_from_fingerprint", gen_fp}},
                        cfg.inverter_ckpt());
  save_model_checkpoint(decoder.params(), {{"model", "id_decoder"}, {"seed", std::to_string(cfg.seed)}},
                        cfg.decoder_ckpt());
  res.report.save_csv(cfg.out_dir + "/train_tracing.csv");

  std::ofstream f(cfg.out_dir + "/tracing_eval.txt");
  f << "inverter_z_l1 " << res.eval.inverter_z_l1 << "\n"
    << "generator_z_l1 " << res.eval.generator_z_l1 << "\n"
    << "mean_cosine " << res.eval.mean_cosine << "\n";
  return TracingSummary{res.eval};
}

void exp_train_restoration(const ExperimentConfig& cfg) {
  ToyDataset ds = load_dataset(cfg.data_root);
  ToyDataset train = train_split(ds, cfg.train_utts);
  SpeakerExtractor ext = load_extractor_ckpt(cfg);
  std::vector<RestorationSample> samples;
  for (std::size_t s = 0; s < train.speaker_ids.size(); ++s) {
    for (const Waveform& utt : train.utterances[s]) {
      RestorationSample rs;
      rs.mel = compute_mel(align_to_chunks(utt, cfg.chunk_samples), cfg.stft);
      rs.embedding = ext.extract(utt);
      samples.push_back(std::move(rs));
    }
  }
  RestorationModel model(RestorationConfig{}, cfg.seed);
  train_restoration(model, samples, cfg.restoration);
  std::filesystem::create_directories(cfg.out_dir);
  save_model_checkpoint(model.params(), {{"model", "restoration"}, {"seed", std::to_string(cfg.seed)}},
                        cfg.restoration_ckpt());
}

Waveform exp_hide(const ExperimentConfig& cfg, const Waveform& source, const Waveform& target,
                  const SpeakerExtractor& extractor, const IdEncoder& encoder, const FlowModel& generator) {
  const SpeakerEmbedding v = extractor.extract(source);
  MelSpectrogram mel = convert_to_mel(VcRequest{source, target}, cfg.backend, cfg.stft, cfg.chunk_samples, cfg.tmp_dir);
  const int chunk_frames = cfg.chunk_samples / cfg.stft.hop;
  const int chunk_t = cfg.chunk_samples / cfg.flow.squeeze;
  const int groups = mel.frames() / chunk_frames;
  const Tensor z = tile_payload(encoder.encode(v, EncodeMode::Mean).second, chunk_t / kPayloadTime);

  Waveform out;
  out.sample_rate = source.sample_rate;
  for (int g = 0; g < groups; ++g) {
    MelSpectrogram mc;
    mc.hop = mel.hop;
    mc.bands = mel.bands;
    mc.values = Tensor::uninit(chunk_frames, mel.bands);
    for (int f = 0; f < chunk_frames; ++f)
      for (int b = 0; b < mel.bands; ++b) mc.values(f, b) = mel.values(g * chunk_frames + f, b);
    Waveform wc = generator.generate(z, mc, source.sample_rate);
    out.samples.insert(out.samples.end(), wc.samples.begin(), wc.samples.end());
  }
  return out;
}

TraceOutcome exp_trace(const ExperimentConfig& cfg, const Waveform& degraded, const SpeakerRegistry& registry,
                       const FlowModel& inverter, const IdDecoder& decoder, double threshold,
                       std::optional<int> vote_chunks) {
  std::vector<Waveform> chunks = chunk_split(degraded, cfg.chunk_samples);
  if (chunks.empty()) throw RuntimeError("trace: input shorter than one chunk");
  TraceOutcome out;
  out.threshold = threshold;
  for (const Waveform& c : chunks) {
    SpeakerEmbedding v = recover_embedding(c, inverter, decoder, cfg.stft);
    out.decisions.push_back(verify_speaker(v, registry, threshold));
    out.recovered.push_back(std::move(v));
  }
  int n = static_cast<int>(out.decisions.size());
  if (vote_chunks.has_value()) {
    if (*vote_chunks % 2 == 0) throw RuntimeError("trace: vote chunk count must be odd");
    n = std::min(n, *vote_chunks);
  }
  if (n % 2 == 0) n -= 1;  // default vote: largest odd prefix
  out.voted_chunks = n;
  std::vector<VerificationDecision> head(out.decisions.begin(), out.decisions.begin() + n);
  // majority over claimed ids
  std::map<std::string, int> counts;
  for (const auto& d : head)
    if (d.claimed_speaker) counts[*d.claimed_speaker]++;
  for (const auto& [id, c] : counts) {
    if (c >= n / 2 + 1) {
      out.verdict = id;
      break;
    }
  }
  return out;
}

EvaluateOutput exp_evaluate(const ExperimentConfig& cfg) {
  if (cfg.eval_channels.empty()) throw ConfigError("evaluate: empty condition list");
  ToyDataset ds = load_dataset(cfg.data_root);
  ToyDataset test = test_split(ds, cfg.train_utts);
  SpeakerExtractor ext = load_extractor_ckpt(cfg);
  IdEncoder encoder = load_encoder_ckpt(cfg);
  FlowModel generator = load_flow_ckpt(cfg, cfg.generator_ckpt());
  FlowModel inverter = load_flow_ckpt(cfg, cfg.inverter_ckpt());
  IdDecoder decoder = load_decoder_ckpt(cfg);
  SpeakerRegistry registry = SpeakerRegistry::load(cfg.registry_path);

  struct Hidden {
    std::string speaker;
    SpeakerEmbedding embedding;
    Waveform audio;
  };
  std::vector<Hidden> hidden;
  for (std::size_t s = 0; s < test.speaker_ids.size(); ++s) {
    for (const Waveform& utt : test.utterances[s]) {
      Hidden h;
      h.speaker = test.speaker_ids[s];
      h.embedding = ext.extract(utt);
      h.audio = exp_hide(cfg, utt, utt, ext, encoder, generator);
      hidden.push_back(std::move(h));
    }
  }
  if (hidden.empty()) throw RuntimeError("evaluate: no test utterances (dataset.train_utts too large?)");

  EvaluateOutput out;
  std::vector<double> all_genuine, all_impostor;
  std::uint64_t utt_counter = 0;

  for (const ChannelSpec& spec : cfg.eval_channels) {
    struct ChunkRec {
      std::string speaker;
      int utt = 0;
      SpeakerEmbedding recovered;
      double genuine_score = 0.0;
    };
    std::vector<ChunkRec> recs;
    std::vector<double> genuine, impostor;
    std::vector<std::pair<SpeakerEmbedding, SpeakerEmbedding>> mcs_pairs;

    for (std::size_t u = 0; u < hidden.size(); ++u) {
      const Hidden& h = hidden[u];
      Waveform degraded = spec.is_identity() ? quantize_waveform(h.audio)
                                             : transmit(h.audio, spec, derive_seed(cfg.seed, 0xE7A1 + utt_counter),
                                                        cfg.codecs, cfg.tmp_dir);
      ++utt_counter;
      for (const Waveform& chunk : chunk_split(degraded, cfg.chunk_samples)) {
        ChunkRec r;
        r.speaker = h.speaker;
        r.utt = static_cast<int>(u);
        r.recovered = recover_embedding(chunk, inverter, decoder, cfg.stft);
        r.genuine_score = r.recovered.cosine(registry.get(h.speaker).embedding);
        genuine.push_back(r.genuine_score);
        for (const auto& [id, entry] : registry.entries())
          if (id != h.speaker) impostor.push_back(r.recovered.cosine(entry.embedding));
        mcs_pairs.emplace_back(r.recovered, h.embedding);
        recs.push_back(std::move(r));
      }
    }

    const double threshold = tune_threshold(genuine, impostor);
    out.per_condition_threshold[spec.label()] = threshold;
    all_genuine.insert(all_genuine.end(), genuine.begin(), genuine.end());
    all_impostor.insert(all_impostor.end(), impostor.begin(), impostor.end());

    long correct = 0;
    std::map<int, std::vector<VerificationDecision>> by_utt;
    std::map<int, std::string> utt_speaker;
    for (const ChunkRec& r : recs) {
      VerificationDecision d = verify_speaker(r.recovered, registry, threshold);
      if (d.claimed_speaker && *d.claimed_speaker == r.speaker) ++correct;
      by_utt[r.utt].push_back(d);
      utt_speaker[r.utt] = r.speaker;
    }
    const double ta = static_cast<double>(correct) / static_cast<double>(recs.size());

    // mean hide-stage time on one representative chunk
    const Hidden& rep = hidden.front();
    Waveform rep_chunk;
    rep_chunk.sample_rate = rep.audio.sample_rate;
    rep_chunk.samples.assign(rep.audio.samples.begin(), rep.audio.samples.begin() + cfg.chunk_samples);
    const double mtc = measure_mtc([&]() {
      MelSpectrogram m = compute_mel(rep_chunk, cfg.stft);
      const Tensor z = tile_payload(encoder.encode(rep.embedding, EncodeMode::Mean).second,
                                    cfg.chunk_samples / cfg.flow.squeeze / kPayloadTime);
      (void)generator.generate(z, m, rep_chunk.sample_rate);
    }, 10, 2);

    MetricRow row;
    row.condition = spec.label();
    row.codec = spec.codec == "none" ? "none" : cfg.codecs.get(spec.codec).actual_name;
    row.bitrate = spec.bitrate;
    row.n_chunks = 1;
    row.ta = ta;
    row.eer = compute_eer(genuine, impostor);
    row.mcs = compute_mcs(mcs_pairs);
    row.mtc_seconds = mtc;
    out.rows.push_back(row);
    out.per_chunk_ta[spec.label()] = ta;

    EvaluateCurve curve;
    curve.condition = spec.label();
    for (int n = 1; n <= cfg.vote_chunks; n += 2) {
      long identified = 0, total = 0;
      for (const auto& [utt, decisions] : by_utt) {
        if (static_cast<int>(decisions.size()) < n) continue;
        std::vector<VerificationDecision> head(decisions.begin(), decisions.begin() + n);
        if (chunk_vote(head, utt_speaker[utt])) ++identified;
        ++total;
      }
      if (total > 0) curve.points.emplace_back(n, static_cast<double>(identified) / static_cast<double>(total));
    }
    out.curves.push_back(std::move(curve));

    if (spec.is_identity()) {
      for (const auto& [utt, decisions] : by_utt) {
        SpeakerEmbedding mean_rec;
        std::vector<double> acc(kEmbeddingDim, 0.0);
        int cnt = 0;
        for (const ChunkRec& r : recs)
          if (r.utt == utt) {
            for (int i = 0; i < kEmbeddingDim; ++i) acc[i] += r.recovered.values[i];
            ++cnt;
          }
        for (double& a : acc) a /= std::max(1, cnt);
        EmbeddingPair p;
        p.speaker_id = utt_speaker[utt];
        p.source = hidden[static_cast<std::size_t>(utt)].embedding;
        p.recovered = SpeakerEmbedding::from_raw(std::move(acc));
        out.pairs.push_back(std::move(p));
      }
    }
  }
  out.global_threshold = tune_threshold(all_genuine, all_impostor);
  return out;
}

void save_evaluate_output(const EvaluateOutput& out, const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  save_metric_csv(out.rows, cfg.out_dir + "/metrics.csv");
  {
    std::ofstream f(cfg.out_dir + "/ta_curves.csv");
    f << "condition,n_chunks,speech_ta\n";
    for (const auto& c : out.curves)
      for (const auto& [n, ta] : c.points) f << c.condition << ',' << n << ',' << ta << '\n';
  }
  {
    std::ofstream f(cfg.out_dir + "/threshold.txt");
    f << out.global_threshold << '\n';
    for (const auto& [cond, t] : out.per_condition_threshold) f << cond << ' ' << t << '\n';
  }
  if (!out.pairs.empty()) save_pairs_file(out.pairs, cfg.out_dir + "/embedding_pairs.tsv");
}

double exp_leakage(const ExperimentConfig& cfg, const VcBackend& backend, double threshold) {
  ToyDataset ds = load_dataset(cfg.data_root);
  ToyDataset test = test_split(ds, cfg.train_utts);
  SpeakerExtractor ext = load_extractor_ckpt(cfg);
  SpeakerRegistry registry = SpeakerRegistry::load(cfg.registry_path);
  std::vector<std::pair<std::string, Waveform>> converted;
  for (std::size_t s = 0; s < test.speaker_ids.size(); ++s)
    for (const Waveform& utt : test.utterances[s])
      converted.emplace_back(test.speaker_ids[s],
                             convert_to_waveform(VcRequest{utt, utt}, backend, cfg.chunk_samples, cfg.tmp_dir));
  return leakage_probe(converted, registry, ext, threshold);
}

}  // namespace vox
