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

#include "voxtracer/restoration.hpp"

#include <cmath>

#include "voxtracer/errors.hpp"

namespace vox {

namespace {

Tensor mel_to_channel_major(const MelSpectrogram& m) {
  Tensor out = Tensor::uninit(m.bands, m.frames());
  for (int f = 0; f < m.frames(); ++f)
    for (int b = 0; b < m.bands; ++b) out(b, f) = m.values(f, b);
  return out;
}

}  // namespace

RestorationModel::RestorationModel(const RestorationConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  Rng rng(derive_seed(seed, 0x9E57));
  enc1_ = Conv1dLayer::create(ps_, "res.enc1", cfg.bands, 64, 5, 1, rng);
  enc2_ = Conv1dLayer::create(ps_, "res.enc2", 64, cfg.content_ch, 3, 1, rng);
  emb_proj_ = DenseLayer::create(ps_, "res.embp", kEmbeddingDim, cfg.emb_proj, rng);
  dec1_ = Conv1dLayer::create(ps_, "res.dec1", cfg.content_ch + cfg.emb_proj, cfg.dec_ch, 5, 1, rng);
  dec2_ = Conv1dLayer::create(ps_, "res.dec2", cfg.dec_ch, cfg.dec_ch, 5, 1, rng);
  dec3_ = Conv1dLayer::create(ps_, "res.dec3", cfg.dec_ch, cfg.bands, 1, 1, rng);
}

Var RestorationModel::content(Tape& t, Var mel_cb) const {
  if (mel_cb.cols() % cfg_.downsample != 0)
    throw RuntimeError("restoration: frames must divide by " + std::to_string(cfg_.downsample));
  Var h = ad::tanh_v(enc1_.apply(t, mel_cb));
  h = ad::avgpool_cols(h, cfg_.downsample);
  h = ad::tanh_v(enc2_.apply(t, h));
  // instance norm strips static spectral identity from the content path
  return ad::instance_norm_rows(h);
}

Var RestorationModel::decode(Tape& t, Var content_code, Var emb) const {
  Var up = ad::repeat_cols(content_code, cfg_.downsample);
  Var ep = ad::tanh_v(emb_proj_.apply(t, emb));            // [1, emb_proj]
  Var eb = ad::broadcast_col(ad::transpose(ep), up.cols());  // [emb_proj, T]
  Var h = ad::concat_rows(up, eb);
  h = ad::tanh_v(dec1_.apply(t, h));
  h = ad::tanh_v(dec2_.apply(t, h));
  return dec3_.apply(t, h);
}

Var RestorationModel::reconstruct(Tape& t, Var mel_cb, Var emb) const {
  return decode(t, content(t, mel_cb), emb);
}

Tensor RestorationModel::restore_mel(const MelSpectrogram& degraded, const SpeakerEmbedding& emb) const {
  const int usable = degraded.frames() / cfg_.downsample * cfg_.downsample;
  if (usable <= 0) throw RuntimeError("restoration: input shorter than one frame group");
  MelSpectrogram clip = degraded;
  if (usable != degraded.frames()) {
    clip.values = Tensor::uninit(usable, degraded.bands);
    for (int f = 0; f < usable; ++f)
      for (int b = 0; b < degraded.bands; ++b) clip.values(f, b) = degraded.values(f, b);
  }
  Tape t(/*grad_enabled=*/false);
  Var mel_cb = t.leaf(mel_to_channel_major(clip));
  Var emb_v = t.leaf(Tensor::from_vector(emb.values, 1, kEmbeddingDim));
  Var out = reconstruct(t, mel_cb, emb_v);  // [bands, T]
  Tensor res = Tensor::uninit(usable, degraded.bands);
  for (int f = 0; f < usable; ++f)
    for (int b = 0; b < degraded.bands; ++b) res(f, b) = std::max(out.val()(b, f), kMelLogFloor);
  return res;
}

double train_restoration(RestorationModel& model, const std::vector<RestorationSample>& data,
                         const RestorationTrainConfig& cfg) {
  if (data.empty()) throw RuntimeError("train_restoration: empty dataset");
  Adam opt(model.params().all(), cfg.lr);
  Rng rng(derive_seed(cfg.seed, 0x9E5));
  const int crop = cfg.crop_frames / model.config().downsample * model.config().downsample;
  std::vector<Tensor> good;
  for (Tensor* p : model.params().all()) good.push_back(*p);
  double last = 0.0;
  for (int step = 0; step < cfg.steps; ++step) {
    Tape t;
    Var loss{};
    double denom = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      const RestorationSample& s = data[rng.uniform_int(static_cast<int>(data.size()))];
      const int frames = std::min(crop, s.mel.frames() / model.config().downsample * model.config().downsample);
      const int start = s.mel.frames() > frames ? rng.uniform_int(s.mel.frames() - frames + 1) : 0;
      Tensor mel_cb = Tensor::uninit(s.mel.bands, frames);
      for (int f = 0; f < frames; ++f)
        for (int bd = 0; bd < s.mel.bands; ++bd) mel_cb(bd, f) = s.mel.values(start + f, bd);
      Var mel_v = t.leaf(mel_cb);
      Var emb_v = t.leaf(Tensor::from_vector(s.embedding.values, 1, kEmbeddingDim));
      Var rec = model.reconstruct(t, mel_v, emb_v);
      Var l = ad::l1_diff(rec, mel_v);
      denom += static_cast<double>(mel_cb.size());
      loss = (loss.tape == nullptr) ? l : ad::add(loss, l);
    }
    loss = ad::scale(loss, 1.0 / denom);
    last = loss.val()[0];
    if (!std::isfinite(last)) {
      auto all = model.params().all();
      for (std::size_t i = 0; i < all.size(); ++i) *all[i] = good[i];
      break;
    }
    t.backward(loss);
    GradMap grads;
    t.accumulate_param_grads(grads);
    opt.step(grads);
    if (step % 25 == 0) {
      good.clear();
      for (Tensor* p : model.params().all()) good.push_back(*p);
    }
  }
  return last;
}

double self_reconstruction_l1(const RestorationModel& model, const std::vector<RestorationSample>& data) {
  if (data.empty()) throw RuntimeError("self_reconstruction_l1: empty dataset");
  double acc = 0.0, denom = 0.0;
  for (const RestorationSample& s : data) {
    Tensor rec = model.restore_mel(s.mel, s.embedding);
    for (int f = 0; f < rec.rows(); ++f)
      for (int b = 0; b < rec.cols(); ++b) acc += std::abs(rec(f, b) - s.mel.values(f, b));
    denom += static_cast<double>(rec.size());
  }
  return acc / denom;
}

Waveform restore_speech(const Waveform& degraded, const SpeakerEmbedding& recovered, const RestorationModel& model,
                        const FlowModel& generator, const StftConfig& stft, std::uint64_t vocoder_seed) {
  MelSpectrogram mel = compute_mel(degraded, stft);
  const int chunk_frames = kChunkSamples / stft.hop;
  const int groups = mel.frames() / chunk_frames;
  if (groups <= 0) throw RuntimeError("restore: input shorter than one chunk");
  Tensor restored = model.restore_mel(mel, recovered);

  Rng rng(derive_seed(vocoder_seed, 0xCD0));
  const FlowConfig& fc = generator.config();
  const int chunk_t = kChunkSamples / fc.squeeze;
  Waveform out;
  out.sample_rate = degraded.sample_rate;
  for (int g = 0; g < groups; ++g) {
    MelSpectrogram mc;
    mc.hop = mel.hop;
    mc.bands = mel.bands;
    mc.values = Tensor::uninit(chunk_frames, mel.bands);
    for (int f = 0; f < chunk_frames; ++f)
      for (int b = 0; b < mel.bands; ++b)
        mc.values(f, b) = (g * chunk_frames + f) < restored.rows() ? restored(g * chunk_frames + f, b) : kMelLogFloor;
    Tensor z = Tensor::uninit(fc.squeeze, chunk_t);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = model.config().vocoder_sigma * rng.gaussian();
    Waveform wc = generator.generate(z, mc, degraded.sample_rate);
    out.samples.insert(out.samples.end(), wc.samples.begin(), wc.samples.end());
  }
  return out;
}

}  // namespace vox
