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

#include "voxtracer/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "voxtracer/errors.hpp"

namespace vox {

namespace {

constexpr double kPi = 3.14159265358979323846;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

void put_u32(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff), static_cast<unsigned char>((v >> 24) & 0xff)};
  f.write(reinterpret_cast<char*>(b), 4);
}

void put_u16(std::ofstream& f, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff)};
  f.write(reinterpret_cast<char*>(b), 2);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

void fft_complex(std::vector<double>& re, std::vector<double>& im, bool inverse) {
  const std::size_t n = re.size();
  if (n == 0 || (n & (n - 1)) != 0 || im.size() != n) throw RuntimeError("fft: length must be a power of two");
  // bit reversal
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    double wr = std::cos(ang), wi = std::sin(ang);
    for (std::size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (std::size_t k = 0; k < len / 2; ++k) {
        double ur = re[i + k], ui = im[i + k];
        double vr = re[i + k + len / 2] * cr - im[i + k + len / 2] * ci;
        double vi = re[i + k + len / 2] * ci + im[i + k + len / 2] * cr;
        re[i + k] = ur + vr;
        im[i + k] = ui + vi;
        re[i + k + len / 2] = ur - vr;
        im[i + k + len / 2] = ui - vi;
        double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
  if (inverse) {
    for (std::size_t i = 0; i < n; ++i) {
      re[i] /= static_cast<double>(n);
      im[i] /= static_cast<double>(n);
    }
  }
}

Tensor mel_filterbank(int bands, int fft_size, int sample_rate, double fmin, double fmax) {
  const int nbins = fft_size / 2 + 1;
  Tensor fb = Tensor::zeros(bands, nbins);
  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(bands + 2);
  for (int i = 0; i < bands + 2; ++i) edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (bands + 1));
  for (int b = 0; b < bands; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    for (int k = 0; k < nbins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / fft_size;
      double w = 0.0;
      if (f > lo && f < mid) w = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi) w = (hi - f) / (hi - mid);
      fb(b, k) = w;
    }
  }
  return fb;
}

MelSpectrogram compute_mel(const Waveform& w, const StftConfig& cfg) {
  if (w.samples.empty()) throw RuntimeError("compute_mel: empty waveform");
  if (cfg.window_length < cfg.hop) throw RuntimeError("compute_mel: window shorter than hop");
  if (cfg.fmax > w.sample_rate / 2.0) throw RuntimeError("compute_mel: fmax above Nyquist");
  const int L = static_cast<int>(w.samples.size());
  const int win = cfg.window_length;
  const int hop = cfg.hop;
  if (L < win) throw RuntimeError("compute_mel: waveform shorter than one window");

  // Reflect padding by win/2 on both sides, then drop the trailing frame so
  // hop-aligned inputs give exactly L/hop frames.
  const int pad = win / 2;
  std::vector<double> x(L + 2 * pad);
  for (int i = 0; i < pad; ++i) x[i] = w.samples[pad - i];
  for (int i = 0; i < L; ++i) x[pad + i] = w.samples[i];
  for (int i = 0; i < pad; ++i) x[pad + L + i] = w.samples[L - 2 - i];

  const int frames = L / hop;  // floor; the trailing frame is dropped
  const int nbins = win / 2 + 1;

  std::vector<double> window(win);
  for (int i = 0; i < win; ++i) window[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / win);

  static thread_local Tensor fb_cache;
  static thread_local int fb_key = -1;
  const int key = cfg.bands * 1000003 + w.sample_rate + static_cast<int>(cfg.fmax);
  if (fb_key != key || fb_cache.rows() != cfg.bands) {
    fb_cache = mel_filterbank(cfg.bands, win, w.sample_rate, cfg.fmin, cfg.fmax);
    fb_key = key;
  }

  Tensor mag = Tensor::uninit(frames, nbins);
  std::vector<double> re(win), im(win);
  for (int t = 0; t < frames; ++t) {
    const int start = t * hop;
    for (int i = 0; i < win; ++i) {
      re[i] = x[start + i] * window[i];
      im[i] = 0.0;
    }
    fft_complex(re, im, false);
    for (int k = 0; k < nbins; ++k) mag(t, k) = std::sqrt(re[k] * re[k] + im[k] * im[k]);
  }

  MelSpectrogram mel;
  mel.hop = hop;
  mel.bands = cfg.bands;
  mel.values = Tensor::uninit(frames, cfg.bands);
  for (int t = 0; t < frames; ++t) {
    for (int b = 0; b < cfg.bands; ++b) {
      double acc = 0.0;
      for (int k = 0; k < nbins; ++k) acc += fb_cache(b, k) * mag(t, k);
      mel.values(t, b) = std::log(std::max(acc, 1e-5));
    }
  }
  return mel;
}

std::vector<Waveform> chunk_split(const Waveform& w, int chunk_samples) {
  if (chunk_samples <= 0) throw RuntimeError("chunk_split: chunk_samples must be positive");
  std::vector<Waveform> out;
  const std::size_t n = w.samples.size() / static_cast<std::size_t>(chunk_samples);
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Waveform c;
    c.sample_rate = w.sample_rate;
    c.samples.assign(w.samples.begin() + i * chunk_samples, w.samples.begin() + (i + 1) * chunk_samples);
    out.push_back(std::move(c));
  }
  return out;
}

int16_t quantize_pcm16(double x) {
  x = std::clamp(x, -1.0, 1.0);
  double scaled = x * 32767.0;
  // round half away from zero, symmetric clamp at +/-32767
  double r = scaled >= 0.0 ? std::floor(scaled + 0.5) : std::ceil(scaled - 0.5);
  r = std::clamp(r, -32767.0, 32767.0);
  return static_cast<int16_t>(r);
}

Waveform quantize_waveform(const Waveform& w) {
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) out.samples[i] = quantize_pcm16(w.samples[i]) / 32767.0;
  return out;
}

void save_wav(const Waveform& w, const std::string& path) {
  if (w.samples.empty()) throw RuntimeError("save_wav: empty waveform");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("save_wav: cannot open " + path);
  const std::uint32_t nsamples = static_cast<std::uint32_t>(w.samples.size());
  const std::uint32_t data_bytes = nsamples * 2;
  f.write("RIFF", 4);
  put_u32(f, 36 + data_bytes);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  put_u32(f, 16);
  put_u16(f, 1);  // PCM
  put_u16(f, 1);  // mono
  put_u32(f, static_cast<std::uint32_t>(w.sample_rate));
  put_u32(f, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put_u16(f, 2);
  put_u16(f, 16);
  f.write("data", 4);
  put_u32(f, data_bytes);
  for (double s : w.samples) {
    int16_t q = quantize_pcm16(s);
    unsigned char b[2] = {static_cast<unsigned char>(q & 0xff), static_cast<unsigned char>((q >> 8) & 0xff)};
    f.write(reinterpret_cast<char*>(b), 2);
  }
  if (!f) throw FormatError("save_wav: write failed for " + path);
}

Waveform load_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("load_wav: cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError("load_wav: malformed RIFF header in " + path);

  // Walk chunks; decoders emit extra LIST/fact chunks before data.
  std::size_t pos = 12;
  int sample_rate = 0;
  bool have_fmt = false;
  const unsigned char* data_ptr = nullptr;
  std::size_t data_len = 0;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    std::uint32_t len = get_u32(bytes.data() + pos + 4);
    if (pos + 8 + len > bytes.size()) len = static_cast<std::uint32_t>(bytes.size() - pos - 8);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw FormatError("load_wav: truncated fmt chunk in " + path);
      const unsigned char* p = bytes.data() + pos + 8;
      const std::uint16_t format = get_u16(p);
      const std::uint16_t channels = get_u16(p + 2);
      sample_rate = static_cast<int>(get_u32(p + 4));
      const std::uint16_t bits = get_u16(p + 14);
      if (format != 1) throw FormatError("load_wav: not PCM16 (format tag " + std::to_string(format) + ") in " + path);
      if (channels != 1) throw FormatError("load_wav: expected mono, got " + std::to_string(channels) + " channels in " + path);
      if (bits != 16) throw FormatError("load_wav: expected 16-bit samples, got " + std::to_string(bits) + " in " + path);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_ptr = bytes.data() + pos + 8;
      data_len = len;
    }
    pos += 8 + len + (len & 1);  // chunks are word-aligned
  }
  if (!have_fmt || data_ptr == nullptr) throw FormatError("load_wav: missing fmt/data chunk in " + path);

  Waveform w;
  w.sample_rate = sample_rate;
  const std::size_t n = data_len / 2;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    int16_t v = static_cast<int16_t>(data_ptr[2 * i] | (data_ptr[2 * i + 1] << 8));
    w.samples[i] = static_cast<double>(v) / 32767.0;
  }
  if (w.samples.empty()) throw FormatError("load_wav: empty data chunk in " + path);
  return w;
}

}  // namespace vox
