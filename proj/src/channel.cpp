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

#include "voxtracer/channel.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <set>

#include "voxtracer/errors.hpp"

namespace vox {

namespace {

constexpr double kPi = 3.14159265358979323846;

const std::set<double>& allowed_params(ProcessingOp::Kind k) {
  static const std::set<double> noise{20, 30, 40, 50};
  static const std::set<double> rates{16000, 24000};
  static const std::set<double> bits{8, 32};
  static const std::set<double> amp{0.9};
  static const std::set<double> cutoff{1000};
  static const std::set<double> median{3};
  switch (k) {
    case ProcessingOp::Kind::GaussianNoise: return noise;
    case ProcessingOp::Kind::ResampleRoundtrip: return rates;
    case ProcessingOp::Kind::Requantize: return bits;
    case ProcessingOp::Kind::Amplitude: return amp;
    case ProcessingOp::Kind::Lowpass: return cutoff;
    case ProcessingOp::Kind::Median: return median;
  }
  throw RuntimeError("channel: unknown op kind");
}

struct OpName {
  const char* name;
  ProcessingOp::Kind kind;
};

constexpr OpName kOpNames[] = {
    {"noise", ProcessingOp::Kind::GaussianNoise}, {"resample", ProcessingOp::Kind::ResampleRoundtrip},
    {"requant", ProcessingOp::Kind::Requantize},  {"amp", ProcessingOp::Kind::Amplitude},
    {"lowpass", ProcessingOp::Kind::Lowpass},     {"median", ProcessingOp::Kind::Median},
};

std::string format_param(double p) {
  char buf[32];
  if (p == std::floor(p)) std::snprintf(buf, sizeof(buf), "%d", static_cast<int>(p));
  else std::snprintf(buf, sizeof(buf), "%g", p);
  return buf;
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

void run_command(const std::string& cmd, const std::string& binary_hint, const std::string& log_path) {
  const std::string full = cmd + " >" + log_path + " 2>&1";
  const int rc = std::system(full.c_str());
  if (rc != 0) {
    std::string diag;
    try {
      diag = read_file_bytes(log_path);
      if (diag.size() > 400) diag = diag.substr(0, 400) + "...";
    } catch (...) {
    }
    const int code = WIFEXITED(rc) ? WEXITSTATUS(rc) : rc;
    if (code == 127)
      throw DependencyError("codec binary not found: " + binary_hint + " (command: " + cmd + ")");
    throw RuntimeError("codec command failed (exit " + std::to_string(code) + "): " + cmd +
                       (diag.empty() ? "" : "\n" + diag));
  }
}

std::string unique_stem(const std::string& tmp_dir, std::uint64_t seed) {
  static std::atomic<std::uint64_t> counter{0};
  const std::uint64_t n = counter.fetch_add(1);
  return tmp_dir + "/voxtx_" + std::to_string(static_cast<unsigned long long>(::getpid())) + "_" +
         std::to_string(seed) + "_" + std::to_string(n);
}

}  // namespace

std::string ProcessingOp::label() const {
  for (const auto& on : kOpNames)
    if (on.kind == kind) return std::string(on.name) + "(" + format_param(param) + ")";
  return "?";
}

std::string ChannelSpec::label() const {
  std::string s = codec == "none" ? "none" : codec + "@" + bitrate;
  for (const auto& op : ops) s += "+" + op.label();
  return s;
}

ChannelSpec parse_channel_spec(const std::string& text, bool allow_any) {
  ChannelSpec spec;
  std::vector<std::string> parts = split(text, '+');
  if (parts.empty() || trim(parts[0]).empty()) throw ConfigError("channel: empty spec");
  const std::string head = trim(parts[0]);
  bool head_is_codec = true;
  for (const auto& on : kOpNames)
    if (head.rfind(on.name, 0) == 0 && head.find('(') != std::string::npos) head_is_codec = false;

  std::size_t op_start = 1;
  if (!head_is_codec) {
    spec.codec = "none";
    op_start = 0;
  } else if (head == "none") {
    spec.codec = "none";
  } else {
    auto at = head.find('@');
    if (at == std::string::npos) throw ConfigError("channel: codec needs a bitrate, e.g. mp3@64: " + head);
    spec.codec = lowercase(trim(head.substr(0, at)));
    spec.bitrate = lowercase(trim(head.substr(at + 1)));
    static const std::set<std::string> codecs{"mp3", "aac", "opus", "silk"};
    if (codecs.count(spec.codec) == 0) throw ConfigError("channel: unknown codec " + spec.codec);
    if (spec.bitrate != "vbr") {
      // default bitrate grids per codec
      static const std::map<std::string, std::set<int>> grid{{"aac", {128, 96, 64, 32}},
                                                             {"mp3", {128, 96, 64, 32}},
                                                             {"opus", {64, 48, 32, 24}},
                                                             {"silk", {40, 32, 25, 16}}};
      int kbps = 0;
      try {
        kbps = std::stoi(spec.bitrate);
      } catch (...) {
        throw ConfigError("channel: bad bitrate " + spec.bitrate);
      }
      if (!allow_any && grid.at(spec.codec).count(kbps) == 0)
        throw ConfigError("channel: bitrate " + spec.bitrate + " outside the default grid for " + spec.codec +
                          " (set channels_allow_any to override)");
    }
  }

  for (std::size_t i = op_start; i < parts.size(); ++i) {
    const std::string p = trim(parts[i]);
    auto lp = p.find('(');
    auto rp = p.find(')');
    if (lp == std::string::npos || rp == std::string::npos || rp < lp)
      throw ConfigError("channel: bad op syntax: " + p);
    const std::string name = lowercase(trim(p.substr(0, lp)));
    const std::string arg = trim(p.substr(lp + 1, rp - lp - 1));
    ProcessingOp op;
    bool found = false;
    for (const auto& on : kOpNames) {
      if (name == on.name) {
        op.kind = on.kind;
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("channel: unknown op " + name);
    try {
      op.param = std::stod(arg);
    } catch (...) {
      throw ConfigError("channel: bad op parameter: " + p);
    }
    if (!allow_any && allowed_params(op.kind).count(op.param) == 0)
      throw ConfigError("channel: parameter " + arg + " outside the default set for " + name +
                        " (set channels_allow_any to override)");
    spec.ops.push_back(op);
  }
  return spec;
}

std::vector<ChannelSpec> parse_channel_list(const std::string& text, bool allow_any) {
  std::vector<ChannelSpec> out;
  for (const std::string& part : split(text, ';')) {
    const std::string p = trim(part);
    if (!p.empty()) out.push_back(parse_channel_spec(p, allow_any));
  }
  if (out.empty()) throw ConfigError("channel: empty channel list");
  return out;
}

const CodecTemplates& CodecRegistry::get(const std::string& codec) const {
  auto it = map_.find(codec);
  if (it == map_.end()) throw ConfigError("channel: no codec templates configured for " + codec);
  return it->second;
}

Waveform add_gaussian_noise(const Waveform& w, double snr_db, std::uint64_t seed) {
  double power = 0.0;
  for (double s : w.samples) power += s * s;
  power /= static_cast<double>(w.samples.size());
  if (power < 1e-12) throw RuntimeError("noise: zero-energy input, SNR undefined");
  const double noise_std = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  Rng rng(derive_seed(seed, 0x401));
  Waveform out = w;
  for (double& s : out.samples) s += noise_std * rng.gaussian();
  return out;
}

Waveform resample(const Waveform& w, int new_rate) {
  if (new_rate <= 0) throw RuntimeError("resample: bad rate");
  if (new_rate == w.sample_rate) return w;
  const double ratio = static_cast<double>(new_rate) / w.sample_rate;
  const auto& x = w.samples;
  const int out_len = static_cast<int>(std::llround(x.size() * ratio));
  const double cutoff = 0.45 * std::min(1.0, ratio);
  const int half = 24;
  const double beta = 8.6;
  auto bessel_i0 = [](double v) {
    double s = 1.0, t = 1.0;
    for (int k = 1; k < 30; ++k) {
      t *= (v / (2.0 * k)) * (v / (2.0 * k));
      s += t;
    }
    return s;
  };
  const double i0b = bessel_i0(beta);
  Waveform out;
  out.sample_rate = new_rate;
  out.samples.resize(out_len);
  for (int n = 0; n < out_len; ++n) {
    const double center = n / ratio;
    const long c0 = static_cast<long>(std::floor(center));
    double acc = 0.0;
    for (long k = c0 - half; k <= c0 + half; ++k) {
      if (k < 0 || k >= static_cast<long>(x.size())) continue;
      const double d = center - static_cast<double>(k);
      const double sinc = std::abs(d) < 1e-12 ? 2.0 * cutoff : std::sin(2.0 * kPi * cutoff * d) / (kPi * d);
      const double u = 2.0 * (static_cast<double>(k - (c0 - half)) / (2.0 * half)) - 1.0;
      const double kaiser = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - u * u))) / i0b;
      acc += x[static_cast<std::size_t>(k)] * sinc * kaiser;
    }
    out.samples[n] = acc;
  }
  return out;
}

Waveform resample_roundtrip(const Waveform& w, int rate) {
  Waveform down = resample(w, rate);
  Waveform back = resample(down, w.sample_rate);
  back.samples.resize(w.samples.size(), 0.0);  // length-preserving
  return back;
}

Waveform requantize(const Waveform& w, int bits) {
  if (bits != 8 && bits != 32) throw RuntimeError("requantize: bits must be 8 or 32");
  Waveform out = w;
  if (bits == 32) return out;  // 16 -> 32 -> 16 bits is lossless
  const double scale = 127.0;
  for (double& s : out.samples) {
    double v = std::clamp(s, -1.0, 1.0) * scale;
    v = v >= 0.0 ? std::floor(v + 0.5) : std::ceil(v - 0.5);
    s = v / scale;
  }
  return out;
}

Waveform amplitude_scale(const Waveform& w, double factor) {
  if (!(factor > 0.0)) throw RuntimeError("amplitude: factor must be positive");
  Waveform out = w;
  for (double& s : out.samples) s *= factor;
  return out;
}

namespace {

// Order-n lowpass Butterworth via bilinear transform; returns (b, a).
std::pair<std::vector<double>, std::vector<double>> butter_lowpass(int order, double cutoff_hz, double fs) {
  if (!(cutoff_hz > 0.0) || cutoff_hz >= fs / 2.0) throw RuntimeError("butterworth: cutoff out of range");
  const double warped = 2.0 * fs * std::tan(kPi * cutoff_hz / fs);
  std::vector<std::complex<double>> zpoles;
  for (int k = 0; k < order; ++k) {
    const double theta = kPi * (2.0 * k + order + 1.0) / (2.0 * order);
    std::complex<double> s = warped * std::complex<double>(std::cos(theta), std::sin(theta));
    zpoles.push_back((2.0 * fs + s) / (2.0 * fs - s));  // bilinear
  }
  // a(z) from poles, b(z) = gain * (1 + z^-1)^order
  std::vector<std::complex<double>> a{1.0};
  for (const auto& p : zpoles) {
    std::vector<std::complex<double>> next(a.size() + 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      next[i] += a[i];
      next[i + 1] -= a[i] * p;
    }
    a = std::move(next);
  }
  std::vector<double> b(order + 1);
  for (int i = 0; i <= order; ++i) {
    double binom = 1.0;
    for (int j = 0; j < i; ++j) binom = binom * (order - j) / (j + 1);
    b[i] = binom;
  }
  // unit gain at DC
  double asum = 0.0, bsum = 0.0;
  for (const auto& c : a) asum += c.real();
  for (double v : b) bsum += v;
  const double gain = asum / bsum;
  std::vector<double> ar(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) ar[i] = a[i].real();
  for (double& v : b) v *= gain;
  return {b, ar};
}

std::vector<double> iir_filter(const std::vector<double>& b, const std::vector<double>& a, const std::vector<double>& x) {
  std::vector<double> y(x.size(), 0.0);
  const std::size_t nb = b.size(), na = a.size();
  for (std::size_t n = 0; n < x.size(); ++n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < nb && i <= n; ++i) acc += b[i] * x[n - i];
    for (std::size_t i = 1; i < na && i <= n; ++i) acc -= a[i] * y[n - i];
    y[n] = acc;
  }
  return y;
}

}  // namespace

Waveform lowpass_butterworth(const Waveform& w, double cutoff_hz) {
  auto [b, a] = butter_lowpass(5, cutoff_hz, static_cast<double>(w.sample_rate));
  // odd-reflection padding keeps the filtfilt edge transient out of the signal
  const int pad = std::min<int>(3 * 6 * 4, static_cast<int>(w.samples.size()) - 1);
  std::vector<double> x;
  x.reserve(w.samples.size() + 2 * pad);
  for (int i = pad; i >= 1; --i) x.push_back(2.0 * w.samples.front() - w.samples[i]);
  x.insert(x.end(), w.samples.begin(), w.samples.end());
  const std::size_t n = w.samples.size();
  for (int i = 1; i <= pad; ++i) x.push_back(2.0 * w.samples.back() - w.samples[n - 1 - i]);

  std::vector<double> y = iir_filter(b, a, x);
  std::reverse(y.begin(), y.end());
  y = iir_filter(b, a, y);
  std::reverse(y.begin(), y.end());

  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(y.begin() + pad, y.begin() + pad + n);
  return out;
}

Waveform median_filter_wave(const Waveform& w, int window) {
  if (window < 1 || window % 2 == 0) throw RuntimeError("median: window must be odd and positive");
  const int half = window / 2;
  const int n = static_cast<int>(w.samples.size());
  Waveform out = w;
  std::vector<double> buf(window);
  for (int i = 0; i < n; ++i) {
    for (int k = -half; k <= half; ++k) {
      int j = std::clamp(i + k, 0, n - 1);  // replicate edges
      buf[k + half] = w.samples[j];
    }
    std::nth_element(buf.begin(), buf.begin() + half, buf.end());
    out.samples[i] = buf[half];
  }
  return out;
}

RealignResult realign(const Waveform& reference, const Waveform& degraded, int max_lag) {
  const auto& r = reference.samples;
  const auto& d = degraded.samples;
  if (r.empty() || d.empty()) throw RuntimeError("realign: empty input");
  if (static_cast<long>(d.size()) < static_cast<long>(r.size()) - max_lag)
    throw RuntimeError("realign: degraded input too short");
  double best_corr = -2.0;
  int best_lag = 0;
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double num = 0.0, rr = 0.0, dd = 0.0;
    const int i0 = std::max(0, -lag);
    const int i1 = std::min<int>(static_cast<int>(r.size()), static_cast<int>(d.size()) - lag);
    if (i1 - i0 < 32) continue;
    for (int i = i0; i < i1; ++i) {
      num += r[i] * d[i + lag];
      rr += r[i] * r[i];
      dd += d[i + lag] * d[i + lag];
    }
    const double denom = std::sqrt(rr * dd);
    const double corr = denom < 1e-12 ? 0.0 : num / denom;
    if (corr > best_corr) {
      best_corr = corr;
      best_lag = lag;
    }
  }
  if (best_corr < 0.2)
    throw RuntimeError("realign: correlation peak " + std::to_string(best_corr) + " below 0.2, alignment failed");
  RealignResult res;
  res.shift = best_lag;
  res.peak = best_corr;
  res.aligned.sample_rate = reference.sample_rate;
  res.aligned.samples.resize(r.size(), 0.0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const long j = static_cast<long>(i) + best_lag;
    if (j >= 0 && j < static_cast<long>(d.size())) res.aligned.samples[i] = d[static_cast<std::size_t>(j)];
  }
  return res;
}

Waveform transmit(const Waveform& w, const ChannelSpec& spec, std::uint64_t seed, const CodecRegistry& codecs,
                  const std::string& tmp_dir) {
  // WAV float->int saving error is always the first distortion.
  Waveform cur = quantize_waveform(w);

  if (spec.codec != "none") {
    const CodecTemplates& tpl = codecs.get(spec.codec);
    const std::string stem = unique_stem(tmp_dir, seed);
    const std::string in_wav = stem + "_in.wav";
    const std::string coded = stem + "_coded." + tpl.extension;
    const std::string out_wav = stem + "_out.wav";
    const std::string log = stem + ".log";
    save_wav(cur, in_wav);
    const std::string bitrate = spec.bitrate.empty() ? "vbr" : spec.bitrate;
    auto fill = [&](std::string cmd, const std::string& in, const std::string& out) {
      cmd = replace_all(cmd, "{in}", in);
      cmd = replace_all(cmd, "{out}", out);
      cmd = replace_all(cmd, "{bitrate}", bitrate);
      cmd = replace_all(cmd, "{rate}", std::to_string(w.sample_rate));
      return cmd;
    };
    const std::string enc_bin = split(trim(tpl.encode_cmd), ' ')[0];
    const std::string dec_bin = split(trim(tpl.decode_cmd), ' ')[0];
    run_command(fill(tpl.encode_cmd, in_wav, coded), enc_bin, log);
    run_command(fill(tpl.decode_cmd, coded, out_wav), dec_bin, log);
    Waveform decoded = load_wav(out_wav);
    for (const auto& p : {in_wav, coded, out_wav, log}) std::filesystem::remove(p);
    if (decoded.sample_rate != w.sample_rate)
      throw RuntimeError("transmit: decoder returned sample rate " + std::to_string(decoded.sample_rate) +
                         ", expected " + std::to_string(w.sample_rate) + " (fix the decode template)");
    cur = realign(cur, decoded).aligned;
  }

  int op_index = 0;
  for (const ProcessingOp& op : spec.ops) {
    const std::uint64_t op_seed = derive_seed(seed, 0x900 + static_cast<std::uint64_t>(op_index++));
    switch (op.kind) {
      case ProcessingOp::Kind::GaussianNoise: cur = add_gaussian_noise(cur, op.param, op_seed); break;
      case ProcessingOp::Kind::ResampleRoundtrip: cur = resample_roundtrip(cur, static_cast<int>(op.param)); break;
      case ProcessingOp::Kind::Requantize: cur = requantize(cur, static_cast<int>(op.param)); break;
      case ProcessingOp::Kind::Amplitude: cur = amplitude_scale(cur, op.param); break;
      case ProcessingOp::Kind::Lowpass: cur = lowpass_butterworth(cur, op.param); break;
      case ProcessingOp::Kind::Median: cur = median_filter_wave(cur, static_cast<int>(op.param)); break;
    }
  }
  if (cur.samples.size() != w.samples.size()) throw RuntimeError("transmit: internal length drift");
  return cur;
}

}  // namespace vox
