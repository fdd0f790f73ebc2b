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

#include "voxtracer/flow.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "voxtracer/errors.hpp"

namespace vox {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Tensor random_orthogonal(int n, Rng& rng) {
  Eigen::MatrixXd a(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) a(r, c) = rng.gaussian();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  Tensor out = Tensor::uninit(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) out(r, c) = q(r, c);
  return out;
}

}  // namespace

FlowModel::FlowModel(const FlowConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.squeeze % 2 != 0) throw RuntimeError("flow: squeeze factor must be even");
  Rng rng(derive_seed(seed, 0xF10));
  const int half = cfg.squeeze / 2;
  blocks_.resize(cfg.n_blocks);
  for (int k = 0; k < cfg.n_blocks; ++k) {
    const std::string prefix = "flow.b" + std::to_string(k);
    Tensor mix = cfg.identity_mixing ? Tensor::zeros(cfg.squeeze, cfg.squeeze) : random_orthogonal(cfg.squeeze, rng);
    if (cfg.identity_mixing)
      for (int i = 0; i < cfg.squeeze; ++i) mix(i, i) = 1.0;
    blocks_[k].mixing = ps_.add(prefix + ".mixing", std::move(mix));
    blocks_[k].coupling = WaveNet::create(ps_, prefix + ".wn", half, cfg.squeeze, cfg.cond_channels,
                                          cfg.cond_layers, cfg.mel_bands, rng, /*zero_out=*/true);
  }
}

Tensor FlowModel::squeeze(const std::vector<double>& samples, int squeeze) {
  if (samples.empty() || static_cast<int>(samples.size()) % squeeze != 0)
    throw RuntimeError("squeeze: length must be a positive multiple of " + std::to_string(squeeze));
  const int T = static_cast<int>(samples.size()) / squeeze;
  Tensor out = Tensor::uninit(squeeze, T);
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < squeeze; ++c) out(c, t) = samples[static_cast<std::size_t>(t) * squeeze + c];
  return out;
}

std::vector<double> FlowModel::unsqueeze(const Tensor& sq) {
  std::vector<double> out(sq.size());
  for (int t = 0; t < sq.cols(); ++t)
    for (int c = 0; c < sq.rows(); ++c) out[static_cast<std::size_t>(t) * sq.rows() + c] = sq(c, t);
  return out;
}

Tensor FlowModel::upsample_condition(const MelSpectrogram& m) const {
  const int reps = cfg_.hop / cfg_.squeeze;
  Tensor cond = Tensor::uninit(m.bands, m.frames() * reps);
  for (int f = 0; f < m.frames(); ++f)
    for (int b = 0; b < m.bands; ++b)
      for (int r = 0; r < reps; ++r) cond(b, f * reps + r) = m.values(f, b);
  return cond;
}

std::pair<Var, Var> FlowModel::normalize_t(Tape& t, Var x_sq, Var cond) const {
  if (x_sq.rows() != cfg_.squeeze) throw RuntimeError("flow: squeezed input must have " + std::to_string(cfg_.squeeze) + " channels");
  if (cond.rows() != cfg_.mel_bands || cond.cols() != x_sq.cols()) throw RuntimeError("flow: conditioning shape mismatch");
  const int half = cfg_.squeeze / 2;
  const double T = static_cast<double>(x_sq.cols());
  Var h = x_sq;
  Var logdet{};
  for (const Block& blk : blocks_) {
    Var w = t.param(*blk.mixing);
    h = ad::matmul(w, h);
    Var ld_mix = ad::scale(ad::logdet_mat(w), T);
    Var ha = ad::slice_rows(h, 0, half);
    Var hb = ad::slice_rows(h, half, cfg_.squeeze);
    Var st = blk.coupling.apply(t, ha, cond);
    Var log_s = ad::slice_rows(st, 0, half);
    Var shift = ad::slice_rows(st, half, cfg_.squeeze);
    Var zb = ad::add(ad::mul(hb, ad::exp_v(log_s)), shift);
    h = ad::concat_rows(ha, zb);
    Var ld = ad::add(ld_mix, ad::sum_all(log_s));
    logdet = (logdet.tape == nullptr) ? ld : ad::add(logdet, ld);
  }
  return {h, logdet};
}

Var FlowModel::neg_log_likelihood_t(Tape& t, Var x_sq, Var cond) const {
  auto [z, logdet] = normalize_t(t, x_sq, cond);
  const double s2 = cfg_.prior_sigma * cfg_.prior_sigma;
  const double d = static_cast<double>(z.val().size());
  Var nll = ad::scale(ad::sum_squares(z), 0.5 / s2);
  nll = ad::add_const(nll, 0.5 * d * (kLog2Pi + std::log(s2)));
  return ad::sub(nll, logdet);
}

std::pair<Tensor, double> FlowModel::normalize_cond(const Tensor& x_sq, const Tensor& cond) const {
  Tape t(/*grad_enabled=*/false);
  auto [z, logdet] = normalize_t(t, t.leaf(x_sq), t.leaf(cond));
  return {z.val(), logdet.val()[0]};
}

Tensor FlowModel::generate_cond(const Tensor& z, const Tensor& cond) const {
  if (z.rows() != cfg_.squeeze) throw RuntimeError("flow: latent must have " + std::to_string(cfg_.squeeze) + " channels");
  if (cond.rows() != cfg_.mel_bands || cond.cols() != z.cols()) throw RuntimeError("flow: conditioning shape mismatch");
  const int half = cfg_.squeeze / 2;
  Tensor h = z;
  for (int k = cfg_.n_blocks - 1; k >= 0; --k) {
    const Block& blk = blocks_[k];
    // coupling inverse: h_b = (z_b - t) * exp(-log_s)
    Tape t(/*grad_enabled=*/false);
    Tensor ha = Tensor::uninit(half, h.cols());
    for (int r = 0; r < half; ++r)
      for (int c = 0; c < h.cols(); ++c) ha(r, c) = h(r, c);
    Var st = blk.coupling.apply(t, t.leaf(std::move(ha)), t.leaf(cond));
    const Tensor& stv = st.val();
    for (int r = 0; r < half; ++r) {
      for (int c = 0; c < h.cols(); ++c) {
        const double log_s = stv(r, c);
        const double shift = stv(half + r, c);
        h(half + r, c) = (h(half + r, c) - shift) * std::exp(-log_s);
      }
    }
    // mixing inverse
    Tensor winv = mat_inverse(*blk.mixing);
    Tensor hn = Tensor::uninit(h.rows(), h.cols());
    using CM = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    using M = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    M(hn.data(), hn.rows(), hn.cols()).noalias() =
        CM(winv.data(), winv.rows(), winv.cols()) * CM(h.data(), h.rows(), h.cols());
    h = std::move(hn);
  }
  return h;
}

Waveform FlowModel::generate(const Tensor& z, const MelSpectrogram& m, int sample_rate) const {
  if (m.frames() * cfg_.hop != z.cols() * cfg_.squeeze)
    throw RuntimeError("flow: mel frames not aligned to latent length");
  Tensor x_sq = generate_cond(z, upsample_condition(m));
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples = unsqueeze(x_sq);
  return w;
}

Tensor FlowModel::invert(const Waveform& x, const MelSpectrogram& m) const {
  Tensor x_sq = squeeze(x.samples, cfg_.squeeze);
  if (m.frames() * cfg_.hop != x_sq.cols() * cfg_.squeeze)
    throw RuntimeError("flow: mel frames not aligned to chunk length");
  return normalize_cond(x_sq, upsample_condition(m)).first;
}

double FlowModel::log_likelihood(const Waveform& x, const MelSpectrogram& m) const {
  Tensor x_sq = squeeze(x.samples, cfg_.squeeze);
  if (m.frames() * cfg_.hop != x_sq.cols() * cfg_.squeeze)
    throw RuntimeError("flow: mel frames not aligned to chunk length");
  auto [z, logdet] = normalize_cond(x_sq, upsample_condition(m));
  const double s2 = cfg_.prior_sigma * cfg_.prior_sigma;
  const double d = static_cast<double>(z.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) sq += z[i] * z[i];
  return -0.5 * sq / s2 - 0.5 * d * (kLog2Pi + std::log(s2)) + logdet;
}

void FlowModel::copy_params_from(const FlowModel& other) {
  if (other.ps_.size() != ps_.size()) throw RuntimeError("flow: parameter count mismatch in copy");
  for (std::size_t i = 0; i < ps_.size(); ++i) {
    if (!ps_.value(i).same_shape(other.ps_.value(i))) throw RuntimeError("flow: shape mismatch in copy");
    ps_.value(i) = other.ps_.value(i);
  }
}

void FlowModel::check_mixing_invertible() const {
  for (const Block& blk : blocks_) {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
        blk.mixing->data(), blk.mixing->rows(), blk.mixing->cols());
    const double det = Eigen::MatrixXd(m).determinant();
    if (std::abs(det) <= 1e-12) throw RuntimeError("flow: mixing matrix near-singular (|det| <= 1e-12)");
  }
}

Tensor tile_payload(const Tensor& payload, int reps) {
  Tensor z = Tensor::uninit(payload.rows(), payload.cols() * reps);
  for (int r = 0; r < payload.rows(); ++r)
    for (int c = 0; c < z.cols(); ++c) z(r, c) = payload(r, c % payload.cols());
  return z;
}

Tensor untile_mean(const Tensor& z, int period) {
  if (z.cols() % period != 0) throw RuntimeError("untile: length not divisible by period");
  const int reps = z.cols() / period;
  Tensor p = Tensor::zeros(z.rows(), period);
  for (int r = 0; r < z.rows(); ++r)
    for (int c = 0; c < z.cols(); ++c) p(r, c % period) += z(r, c) / reps;
  return p;
}

}  // namespace vox
