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
//
// Independent oracles used by the test suites. Everything here recomputes
// expected values by a route different from the implementation under test.

#ifndef VOXTRACER_TESTS_ORACLES_HPP_
#define VOXTRACER_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "voxtracer/audio.hpp"
#include "voxtracer/channel.hpp"
#include "voxtracer/flow.hpp"
#include "voxtracer/id_vae.hpp"
#include "voxtracer/util.hpp"

namespace oracle {

// Frame count by direct enumeration of window placements over the padded
// signal, dropping the trailing frame.
inline int mel_frame_count(int samples, int window, int hop) {
  const int padded = samples + 2 * (window / 2);
  int frames = 0;
  for (long start = 0; start + window <= padded; start += hop) ++frames;
  return frames - 1;
}

// Monte-Carlo estimate of D_KL(q || N(0,I)) with its standard error.
struct McKl {
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline McKl mc_kl(const vox::GaussianPosterior& q, int n_samples, std::uint64_t seed) {
  vox::Rng rng(seed);
  double acc = 0.0, acc2 = 0.0;
  const std::size_t d = q.mu.size();
  for (int s = 0; s < n_samples; ++s) {
    double logq = 0.0, logp = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double eps = rng.gaussian();
      const double z = q.mu[i] + q.sigma[i] * eps;
      logq += -0.5 * eps * eps - std::log(q.sigma[i]);
      logp += -0.5 * z * z;
    }
    const double v = logq - logp;  // constants cancel
    acc += v;
    acc2 += v * v;
  }
  McKl out;
  out.mean = acc / n_samples;
  const double var = std::max(0.0, acc2 / n_samples - out.mean * out.mean);
  out.stderr_ = std::sqrt(var / n_samples);
  return out;
}

// log|det J| of the normalize map by central finite differences, feasible
// for dimension <= 16.
inline double fd_jacobian_logdet(const vox::FlowModel& flow, const vox::Tensor& x_sq, const vox::Tensor& cond,
                                 double h = 1e-5) {
  const int d = static_cast<int>(x_sq.size());
  std::vector<double> jac(static_cast<std::size_t>(d) * d);
  for (int j = 0; j < d; ++j) {
    vox::Tensor xp = x_sq, xm = x_sq;
    xp[j] += h;
    xm[j] -= h;
    vox::Tensor zp = flow.normalize_cond(xp, cond).first;
    vox::Tensor zm = flow.normalize_cond(xm, cond).first;
    for (int i = 0; i < d; ++i) jac[static_cast<std::size_t>(i) * d + j] = (zp[i] - zm[i]) / (2.0 * h);
  }
  // log|det| by Gaussian elimination with partial pivoting
  double logdet = 0.0;
  for (int c = 0; c < d; ++c) {
    int piv = c;
    for (int r = c + 1; r < d; ++r)
      if (std::abs(jac[static_cast<std::size_t>(r) * d + c]) > std::abs(jac[static_cast<std::size_t>(piv) * d + c]))
        piv = r;
    if (piv != c)
      for (int k = 0; k < d; ++k) std::swap(jac[static_cast<std::size_t>(c) * d + k], jac[static_cast<std::size_t>(piv) * d + k]);
    const double p = jac[static_cast<std::size_t>(c) * d + c];
    logdet += std::log(std::abs(p));
    for (int r = c + 1; r < d; ++r) {
      const double f = jac[static_cast<std::size_t>(r) * d + c] / p;
      for (int k = c; k < d; ++k) jac[static_cast<std::size_t>(r) * d + k] -= f * jac[static_cast<std::size_t>(c) * d + k];
    }
  }
  return logdet;
}

// Brute-force threshold sweep EER at a fixed grid resolution, with the same
// linear interpolation at the crossing. Independent counting path.
inline double sweep_eer(const std::vector<double>& genuine, const std::vector<double>& impostor, double step = 1e-4) {
  double lo = genuine[0], hi = genuine[0];
  for (double s : genuine) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  for (double s : impostor) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  lo -= 2 * step;
  hi += 2 * step;
  auto far_frr = [&](double t) {
    long fa = 0, fr = 0;
    for (double s : impostor)
      if (s > t) ++fa;
    for (double s : genuine)
      if (s <= t) ++fr;
    return std::pair<double, double>(static_cast<double>(fa) / impostor.size(),
                                     static_cast<double>(fr) / genuine.size());
  };
  auto [pf, pr] = far_frr(lo);
  for (double t = lo + step; t <= hi; t += step) {
    auto [f, r] = far_frr(t);
    const double d = f - r;
    if (d <= 0.0) {
      if (d == 0.0) return f;
      const double dp = pf - pr;
      const double alpha = dp / (dp - d);
      return pf + alpha * (f - pf);
    }
    pf = f;
    pr = r;
  }
  return pf;
}

// Brute-force sweep for the operating threshold: minimizes |FAR-FRR| on a
// grid; returns the achieved |FAR-FRR|.
inline double sweep_min_far_frr_gap(const std::vector<double>& genuine, const std::vector<double>& impostor,
                                    double step = 1e-4) {
  double lo = 1e300, hi = -1e300;
  for (double s : genuine) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  for (double s : impostor) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  lo -= 2 * step;
  hi += 2 * step;
  double best = 2.0;
  for (double t = lo; t <= hi; t += step) {
    long fa = 0, fr = 0;
    for (double s : impostor)
      if (s > t) ++fa;
    for (double s : genuine)
      if (s <= t) ++fr;
    best = std::min(best, std::abs(static_cast<double>(fa) / impostor.size() -
                                   static_cast<double>(fr) / genuine.size()));
  }
  return best;
}

// Full-lag search over every feasible shift (not just the realign window).
inline int full_lag_search(const std::vector<double>& ref, const std::vector<double>& deg, int max_lag) {
  double best = -2.0;
  int best_lag = 0;
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double num = 0.0, rr = 0.0, dd = 0.0;
    const int i0 = std::max(0, -lag);
    const int i1 = std::min<int>(static_cast<int>(ref.size()), static_cast<int>(deg.size()) - lag);
    if (i1 - i0 < 32) continue;
    for (int i = i0; i < i1; ++i) {
      num += ref[i] * deg[i + lag];
      rr += ref[i] * ref[i];
      dd += deg[i + lag] * deg[i + lag];
    }
    const double c = (rr > 0 && dd > 0) ? num / std::sqrt(rr * dd) : 0.0;
    if (c > best) {
      best = c;
      best_lag = lag;
    }
  }
  return best_lag;
}

// Gives the zero-initialized couplings real work to do in flow tests.
inline void randomize_flow_couplings(vox::FlowModel& flow, std::uint64_t seed, double scale = 0.1) {
  vox::Rng rng(seed);
  for (std::size_t i = 0; i < flow.params().size(); ++i) {
    const std::string& name = flow.params().name(i);
    if (name.find(".wn.out.w") != std::string::npos) {
      vox::Tensor& w = flow.params().value(i);
      for (std::size_t j = 0; j < w.size(); ++j) w[j] = scale * rng.gaussian();
    }
  }
}

inline bool voxcodec_available() { return std::system("voxcodec version >/dev/null 2>&1") == 0; }

inline vox::CodecRegistry test_codecs() {
  vox::CodecRegistry reg;
  vox::CodecTemplates mp3{"voxcodec encode --codec mp3 --bitrate {bitrate} --in {in} --out {out}",
                          "voxcodec decode --codec mp3 --rate {rate} --in {in} --out {out}", "mp3", "mp3",
                          "voxcodec-0.1"};
  vox::CodecTemplates aac{"voxcodec encode --codec aac --bitrate {bitrate} --in {in} --out {out}",
                          "voxcodec decode --codec aac --rate {rate} --in {in} --out {out}", "aac", "aac",
                          "voxcodec-0.1"};
  vox::CodecTemplates opus{"voxcodec encode --codec opus --bitrate {bitrate} --in {in} --out {out}",
                           "voxcodec decode --codec opus --rate {rate} --in {in} --out {out}", "opus", "opus",
                           "voxcodec-0.1"};
  vox::CodecTemplates silk{"voxcodec encode --codec opus-voip --bitrate {bitrate} --in {in} --out {out}",
                           "voxcodec decode --codec opus-voip --rate {rate} --in {in} --out {out}", "opus",
                           "opus-voip", "voxcodec-0.1"};
  reg.add("mp3", mp3);
  reg.add("aac", aac);
  reg.add("opus", opus);
  reg.add("silk", silk);
  return reg;
}

inline vox::Waveform test_sine(double freq, int samples, double amp = 0.5, int rate = vox::kDefaultSampleRate) {
  vox::Waveform w;
  w.sample_rate = rate;
  w.samples.resize(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) w.samples[i] = amp * std::sin(2.0 * 3.14159265358979323846 * freq * i / rate);
  return w;
}

}  // namespace oracle

#endif  // VOXTRACER_TESTS_ORACLES_HPP_
