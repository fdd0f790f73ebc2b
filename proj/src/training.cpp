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

#include "voxtracer/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "voxtracer/errors.hpp"
#include "voxtracer/vc.hpp"

namespace vox {

namespace {

std::vector<Tensor> snapshot(ParamStore& ps) {
  std::vector<Tensor> out;
  for (Tensor* p : ps.all()) out.push_back(*p);
  return out;
}

void restore(ParamStore& ps, const std::vector<Tensor>& snap) {
  auto all = ps.all();
  for (std::size_t i = 0; i < all.size(); ++i) *all[i] = snap[i];
}

Var norm_loss(Var a, Var b, TrainConfig::LossNorm norm) {
  return norm == TrainConfig::LossNorm::L1 ? ad::l1_diff(a, b) : ad::l2_sq_diff(a, b);
}

}  // namespace

void TrainReport::append(int step, const std::string& phase, std::map<std::string, double> losses) {
  for (const auto& [k, v] : losses)
    if (!std::isfinite(v)) throw RuntimeError("report: non-finite loss " + k + " at step " + std::to_string(step));
  rows.push_back(Row{step, phase, std::move(losses)});
}

void TrainReport::save_csv(const std::string& path) const {
  std::set<std::string> names;
  for (const Row& r : rows)
    for (const auto& [k, _] : r.losses) names.insert(k);
  std::ofstream f(path);
  if (!f) throw RuntimeError("report: cannot write " + path);
  f << "step,phase";
  for (const auto& n : names) f << ',' << n;
  f << '\n';
  char buf[32];
  for (const Row& r : rows) {
    f << r.step << ',' << r.phase;
    for (const auto& n : names) {
      auto it = r.losses.find(n);
      f << ',';
      if (it != r.losses.end()) {
        std::snprintf(buf, sizeof(buf), "%.12g", it->second);
        f << buf;
      }
    }
    f << '\n';
  }
}

std::vector<double> TrainReport::series(const std::string& phase, const std::string& loss) const {
  std::vector<double> out;
  for (const Row& r : rows) {
    if (r.phase != phase) continue;
    auto it = r.losses.find(loss);
    if (it != r.losses.end()) out.push_back(it->second);
  }
  return out;
}

HidingDataset build_hiding_dataset(const ToyDataset& ds, const SpeakerExtractor& extractor, const StftConfig& stft,
                                   int chunk_samples) {
  HidingDataset out;
  for (std::size_t s = 0; s < ds.speaker_ids.size(); ++s) {
    for (const Waveform& utt : ds.utterances[s]) {
      HidingItem item;
      item.speaker_id = ds.speaker_ids[s];
      item.audio = align_to_chunks(utt, chunk_samples);
      item.mel = compute_mel(item.audio, stft);
      item.embedding = extractor.extract(utt);
      out.push_back(std::move(item));
    }
  }
  return out;
}

TrainReport train_hiding(const HidingDataset& data, const TrainConfig& cfg, IdEncoder& encoder, FlowModel& generator) {
  if (data.empty()) throw RuntimeError("train_hiding: empty dataset");
  TrainReport report;
  Rng rng(derive_seed(cfg.seed, 0x41D));

  // --- phase 1: ID encoder, KL objective only (stops inside the target band) ---
  {
    Adam opt(encoder.params().all(), cfg.lr, cfg.beta1, cfg.beta2);
    std::vector<Tensor> good = snapshot(encoder.params());
    const double entries = static_cast<double>(kLatentChannels * kPayloadTime);
    for (int step = 0; step < cfg.encoder_steps; ++step) {
      Tape t;
      Var loss{};
      for (int b = 0; b < cfg.batch_encoder; ++b) {
        const HidingItem& item = data[rng.uniform_int(static_cast<int>(data.size()))];
        Var kl = encoder.kl_loss_t(t, t.leaf(embedding_to_payload(item.embedding)));
        loss = (loss.tape == nullptr) ? kl : ad::add(loss, kl);
      }
      loss = ad::scale(loss, 1.0 / cfg.batch_encoder);
      const double kl_per_entry = loss.val()[0] / entries;
      if (!std::isfinite(kl_per_entry)) {
        restore(encoder.params(), good);
        break;
      }
      if (step % cfg.report_every == 0) report.append(step, "encoder", {{"kl", loss.val()[0]}, {"kl_per_entry", kl_per_entry}});
      if (kl_per_entry <= cfg.kl_stop_per_entry) {
        report.append(step, "encoder", {{"kl", loss.val()[0]}, {"kl_per_entry", kl_per_entry}});
        break;
      }
      t.backward(loss);
      GradMap grads;
      t.accumulate_param_grads(grads);
      opt.step(grads);
      if (step % cfg.snapshot_every == 0) good = snapshot(encoder.params());
    }
  }

  // --- phase 2: speech generator, maximum likelihood on crops ---
  {
    Adam opt(generator.params().all(), cfg.lr, cfg.beta1, cfg.beta2);
    std::vector<Tensor> good = snapshot(generator.params());
    const FlowConfig& fc = generator.config();
    const int crop = cfg.generator_crop - cfg.generator_crop % fc.hop;
    if (crop <= 0) throw RuntimeError("train_hiding: generator_crop smaller than one hop");
    const double dims = static_cast<double>(crop);
    for (int step = 0; step < cfg.generator_steps; ++step) {
      Tape t;
      Var loss{};
      for (int b = 0; b < cfg.batch_generator; ++b) {
        const HidingItem& item = data[rng.uniform_int(static_cast<int>(data.size()))];
        const int max_start = static_cast<int>(item.audio.samples.size()) - crop;
        const int start = (max_start > 0 ? rng.uniform_int(max_start / fc.hop + 1) * fc.hop : 0);
        std::vector<double> seg(item.audio.samples.begin() + start, item.audio.samples.begin() + start + crop);
        Tensor x_sq = FlowModel::squeeze(seg, fc.squeeze);
        MelSpectrogram mseg;
        mseg.hop = item.mel.hop;
        mseg.bands = item.mel.bands;
        const int f0 = start / fc.hop, f1 = (start + crop) / fc.hop;
        mseg.values = Tensor::uninit(f1 - f0, item.mel.bands);
        for (int r = f0; r < f1; ++r)
          for (int c = 0; c < item.mel.bands; ++c) mseg.values(r - f0, c) = item.mel.values(r, c);
        Var nll = generator.neg_log_likelihood_t(t, t.leaf(std::move(x_sq)), t.leaf(generator.upsample_condition(mseg)));
        loss = (loss.tape == nullptr) ? nll : ad::add(loss, nll);
      }
      loss = ad::scale(loss, 1.0 / (cfg.batch_generator * dims));
      if (!std::isfinite(loss.val()[0])) {
        restore(generator.params(), good);
        break;
      }
      if (step % cfg.report_every == 0) report.append(step, "generator", {{"nll_per_dim", loss.val()[0]}});
      t.backward(loss);
      GradMap grads;
      t.accumulate_param_grads(grads);
      opt.step(grads);
      generator.check_mixing_invertible();
      if (step % cfg.snapshot_every == 0) good = snapshot(generator.params());
    }
  }
  return report;
}

namespace {

// One cached distorted rendering of one hidden utterance.
struct DistortedVariant {
  Tensor x_sq;  // squeezed degraded audio [8, T']
  Tensor cond;  // upsampled recovered-mel conditioning [bands, T']
};

struct TracingItem {
  int item_index = 0;
  Tensor z_payload;                                  // [8, 64]
  Tensor z_chunk;                                    // tiled to one chunk [8, chunkT]
  Waveform hidden;                                   // generated utterance with payload
  std::vector<std::vector<DistortedVariant>> dist;   // [spec][variant]
};

}  // namespace

TracingResult train_tracing(const HidingDataset& data, const std::vector<int>& val_items, const IdEncoder& encoder,
                            const FlowModel& generator, FlowModel& inverter, IdDecoder& decoder,
                            const TrainConfig& cfg, const CodecRegistry& codecs, const std::string& tmp_dir) {
  if (data.empty()) throw RuntimeError("train_tracing: empty dataset");
  if (cfg.channels.empty()) throw RuntimeError("train_tracing: no channel specs configured");
  const FlowConfig& fc = inverter.config();
  const int chunk_t = kChunkSamples / fc.squeeze;               // 2048
  const int chunk_frames = kChunkSamples / fc.hop;              // 64
  const int reps = chunk_t / kPayloadTime;                      // 32 tiles per chunk
  Rng rng(derive_seed(cfg.seed, 0x7AC));

  // --- data generation with frozen hiding models ---
  std::vector<TracingItem> items;
  std::set<int> val_set(val_items.begin(), val_items.end());
  for (std::size_t idx = 0; idx < data.size(); ++idx) {
    const HidingItem& h = data[idx];
    TracingItem ti;
    ti.item_index = static_cast<int>(idx);
    ti.z_payload = encoder.encode(h.embedding, EncodeMode::Mean).second;
    ti.z_chunk = tile_payload(ti.z_payload, reps);
    const int n_chunks = static_cast<int>(h.audio.samples.size()) / kChunkSamples;
    Waveform hidden;
    hidden.sample_rate = h.audio.sample_rate;
    for (int c = 0; c < n_chunks; ++c) {
      MelSpectrogram mc;
      mc.hop = h.mel.hop;
      mc.bands = h.mel.bands;
      mc.values = Tensor::uninit(chunk_frames, h.mel.bands);
      for (int r = 0; r < chunk_frames; ++r)
        for (int b = 0; b < h.mel.bands; ++b) mc.values(r, b) = h.mel.values(c * chunk_frames + r, b);
      Waveform xc = generator.generate(ti.z_chunk, mc, h.audio.sample_rate);
      hidden.samples.insert(hidden.samples.end(), xc.samples.begin(), xc.samples.end());
    }
    ti.hidden = std::move(hidden);
    ti.dist.resize(cfg.channels.size());
    for (std::size_t s = 0; s < cfg.channels.size(); ++s) {
      for (int v = 0; v < cfg.channel_variants; ++v) {
        const std::uint64_t tseed = derive_seed(cfg.seed, 0xD000 + idx * 131 + s * 17 + v);
        Waveform xt = transmit(ti.hidden, cfg.channels[s], tseed, codecs, tmp_dir);
        DistortedVariant dv;
        dv.x_sq = FlowModel::squeeze(xt.samples, fc.squeeze);
        dv.cond = inverter.upsample_condition(compute_mel(xt, StftConfig{1024, fc.hop, fc.mel_bands, 0.0, 8000.0}));
        ti.dist[s].push_back(std::move(dv));
      }
    }
    items.push_back(std::move(ti));
  }

  std::vector<int> train_idx;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (val_set.count(static_cast<int>(i)) == 0) train_idx.push_back(static_cast<int>(i));
  if (train_idx.empty()) throw RuntimeError("train_tracing: no training items left after validation split");

  const int crop_t = std::max(kPayloadTime, (cfg.tracing_crop / fc.squeeze) / kPayloadTime * kPayloadTime);

  TrainReport report;
  auto run_phase = [&](bool update_inverter, bool update_decoder, int steps, const std::string& phase) {
    std::vector<Tensor*> params;
    if (update_inverter)
      for (Tensor* p : inverter.params().all()) params.push_back(p);
    if (update_decoder)
      for (Tensor* p : decoder.params().all()) params.push_back(p);
    Adam opt(params, cfg.lr, cfg.beta1, cfg.beta2);
    std::vector<Tensor> good_inv = snapshot(inverter.params());
    std::vector<Tensor> good_dec = snapshot(decoder.params());
    for (int step = 0; step < steps; ++step) {
      Tape t;
      Var lz_total{}, lv_total{};
      for (int b = 0; b < cfg.batch_tracing; ++b) {
        const TracingItem& ti = items[train_idx[rng.uniform_int(static_cast<int>(train_idx.size()))]];
        const int spec = rng.uniform_int(static_cast<int>(ti.dist.size()));
        const DistortedVariant& dv = ti.dist[spec][rng.uniform_int(static_cast<int>(ti.dist[spec].size()))];
        const int max_off = dv.x_sq.cols() - crop_t;
        const int off = max_off > 0 ? rng.uniform_int(max_off / kPayloadTime + 1) * kPayloadTime : 0;
        Tensor x_crop = Tensor::uninit(fc.squeeze, crop_t);
        for (int r = 0; r < fc.squeeze; ++r)
          for (int c = 0; c < crop_t; ++c) x_crop(r, c) = dv.x_sq(r, off + c);
        Tensor cond_crop = Tensor::uninit(fc.mel_bands, crop_t);
        for (int r = 0; r < fc.mel_bands; ++r)
          for (int c = 0; c < crop_t; ++c) cond_crop(r, c) = dv.cond(r, off + c);
        auto [z_rec, logdet] = inverter.normalize_t(t, t.leaf(std::move(x_crop)), t.leaf(std::move(cond_crop)));
        (void)logdet;
        Var z_ref = t.leaf(tile_payload(ti.z_payload, crop_t / kPayloadTime));
        Var lz = norm_loss(z_rec, z_ref, cfg.loss_norm);
        Var payload_rec = ad::tile_mean(z_rec, kPayloadTime);
        Var v_rec = decoder.forward(t, payload_rec);
        Var v_ref = t.leaf(Tensor::from_vector(data[ti.item_index].embedding.values, 1, kEmbeddingDim));
        Var lv = norm_loss(v_rec, v_ref, cfg.loss_norm);
        lz_total = (lz_total.tape == nullptr) ? lz : ad::add(lz_total, lz);
        lv_total = (lv_total.tape == nullptr) ? lv : ad::add(lv_total, lv);
      }
      lz_total = ad::scale(lz_total, 1.0 / cfg.batch_tracing);
      lv_total = ad::scale(lv_total, 1.0 / cfg.batch_tracing);
      Var lt = ad::add(ad::scale(lz_total, cfg.lambda_z), ad::scale(lv_total, cfg.lambda_v));
      Var objective{};
      if (update_inverter && !update_decoder) objective = ad::scale(lz_total, cfg.lambda_z);
      else if (update_decoder && !update_inverter) objective = ad::scale(lv_total, cfg.lambda_v);
      else objective = lt;
      if (!std::isfinite(objective.val()[0])) {
        restore(inverter.params(), good_inv);
        restore(decoder.params(), good_dec);
        break;
      }
      if (step % cfg.report_every == 0)
        report.append(step, phase,
                      {{"l_z", lz_total.val()[0]}, {"l_v", lv_total.val()[0]}, {"l_t", lt.val()[0]}});
      t.backward(objective);
      GradMap grads;
      t.accumulate_param_grads(grads);
      opt.step(grads);
      if (update_inverter) inverter.check_mixing_invertible();
      if (step % cfg.snapshot_every == 0) {
        good_inv = snapshot(inverter.params());
        good_dec = snapshot(decoder.params());
      }
    }
  };

  if (cfg.joint_tracing) {
    run_phase(true, true, cfg.tracing_steps, "tracing");
  } else {
    run_phase(true, false, cfg.tracing_steps / 2, "tracing_inverter");
    run_phase(false, true, cfg.tracing_steps - cfg.tracing_steps / 2, "tracing_decoder");
  }

  // --- paired validation: fine-tuned inverter vs raw generator inverse ---
  TracingResult result;
  result.report = std::move(report);
  const std::vector<int>& eval_items = val_items.empty() ? train_idx : val_items;
  double inv_l1 = 0.0, gen_l1 = 0.0, cos_sum = 0.0;
  long n_chunks_eval = 0;
  for (int idx : eval_items) {
    const TracingItem& ti = items[static_cast<std::size_t>(idx)];
    for (std::size_t s = 0; s < ti.dist.size(); ++s) {
      const DistortedVariant& dv = ti.dist[s][0];
      const int n_chunks = dv.x_sq.cols() / chunk_t;
      for (int c = 0; c < n_chunks; ++c) {
        Tensor x_c = Tensor::uninit(fc.squeeze, chunk_t);
        Tensor cond_c = Tensor::uninit(fc.mel_bands, chunk_t);
        for (int r = 0; r < fc.squeeze; ++r)
          for (int j = 0; j < chunk_t; ++j) x_c(r, j) = dv.x_sq(r, c * chunk_t + j);
        for (int r = 0; r < fc.mel_bands; ++r)
          for (int j = 0; j < chunk_t; ++j) cond_c(r, j) = dv.cond(r, c * chunk_t + j);
        Tensor z_inv = inverter.normalize_cond(x_c, cond_c).first;
        Tensor z_gen = generator.normalize_cond(x_c, cond_c).first;
        double li = 0.0, lg = 0.0;
        for (std::size_t i = 0; i < z_inv.size(); ++i) {
          li += std::abs(z_inv[i] - ti.z_chunk[i]);
          lg += std::abs(z_gen[i] - ti.z_chunk[i]);
        }
        inv_l1 += li / static_cast<double>(z_inv.size());
        gen_l1 += lg / static_cast<double>(z_gen.size());
        SpeakerEmbedding v_rec = decoder.decode(untile_mean(z_inv, kPayloadTime));
        cos_sum += v_rec.cosine(data[ti.item_index].embedding);
        ++n_chunks_eval;
      }
    }
  }
  result.eval.inverter_z_l1 = inv_l1 / static_cast<double>(n_chunks_eval);
  result.eval.generator_z_l1 = gen_l1 / static_cast<double>(n_chunks_eval);
  result.eval.mean_cosine = cos_sum / static_cast<double>(n_chunks_eval);
  return result;
}

double gradient_check(const std::vector<Tensor*>& params, const std::function<double()>& loss_fn,
                      const std::function<GradMap()>& grad_fn, double step) {
  std::size_t total = 0;
  for (const Tensor* p : params) total += p->size();
  if (total > 10000) throw RuntimeError("gradient_check: fragment too large (" + std::to_string(total) + " entries)");
  GradMap analytic = grad_fn();
  double worst = 0.0;
  for (Tensor* p : params) {
    auto it = analytic.find(p);
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double keep = (*p)[i];
      (*p)[i] = keep + step;
      const double up = loss_fn();
      (*p)[i] = keep - step;
      const double down = loss_fn();
      (*p)[i] = keep;
      const double numeric = (up - down) / (2.0 * step);
      const double a = (it == analytic.end()) ? 0.0 : it->second[i];
      worst = std::max(worst, std::abs(a - numeric) / (std::abs(numeric) + 1e-8));
    }
  }
  return worst;
}

}  // namespace vox
