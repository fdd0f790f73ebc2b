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

#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "voxtracer/audio.hpp"
#include "voxtracer/errors.hpp"

using namespace vox;

namespace {

Waveform random_waveform(int n, std::uint64_t seed) {
  Rng rng(seed);
  Waveform w;
  w.samples.resize(static_cast<std::size_t>(n));
  for (double& s : w.samples) s = rng.uniform(-1.0, 1.0);
  return w;
}

std::string tmp_path(const char* name) { return std::string("/tmp/voxtest_") + name; }

}  // namespace

TEST_SUITE_BEGIN("audio");

TEST_CASE("mel frame counts match the enumeration oracle") {
  StftConfig cfg;
  CHECK(oracle::mel_frame_count(16384, 1024, 256) == 64);
  CHECK(compute_mel(random_waveform(16384, 1), cfg).frames() == 64);

  CHECK(oracle::mel_frame_count(1024, 1024, 256) == 4);
  CHECK(compute_mel(random_waveform(1024, 2), cfg).frames() == 4);

  for (int n : {2048, 4096, 16384 + 256, 49152}) {
    CHECK(compute_mel(random_waveform(n, 3), cfg).frames() == oracle::mel_frame_count(n, 1024, 256));
  }
}

TEST_CASE("all-zero waveform maps to the log floor everywhere") {
  Waveform w;
  w.samples.assign(4096, 0.0);
  MelSpectrogram m = compute_mel(w, StftConfig{});
  for (int f = 0; f < m.frames(); ++f)
    for (int b = 0; b < m.bands; ++b) CHECK(m.values(f, b) == kMelLogFloor);
}

TEST_CASE("waveform shorter than one window is rejected") {
  CHECK_THROWS_AS(compute_mel(random_waveform(512, 4), StftConfig{}), RuntimeError);
  Waveform empty;
  CHECK_THROWS_AS(compute_mel(empty, StftConfig{}), RuntimeError);
}

TEST_CASE("compute_mel is pure") {
  Waveform w = random_waveform(8192, 5);
  MelSpectrogram a = compute_mel(w, StftConfig{});
  MelSpectrogram b = compute_mel(w, StftConfig{});
  REQUIRE(a.values.size() == b.values.size());
  CHECK(std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) == 0);
}

TEST_CASE("mel peaks at the band containing a pure tone") {
  Waveform w = oracle::test_sine(1000.0, 16384);
  MelSpectrogram m = compute_mel(w, StftConfig{});
  Tensor fb = mel_filterbank(80, 1024, kDefaultSampleRate, 0.0, 8000.0);
  // oracle: the filterbank band whose weight at the 1 kHz bin is largest
  const int bin = static_cast<int>(std::lround(1000.0 * 1024 / kDefaultSampleRate));
  int expect_band = 0;
  for (int b = 1; b < 80; ++b)
    if (fb(b, bin) > fb(expect_band, bin)) expect_band = b;
  int got_band = 0;
  for (int b = 1; b < 80; ++b)
    if (m.values(32, b) > m.values(32, got_band)) got_band = b;
  CHECK(std::abs(got_band - expect_band) <= 1);
}

TEST_CASE("chunk_split arithmetic and prefix property") {
  CHECK(chunk_split(random_waveform(49152, 6), 16384).size() == 3);
  CHECK(chunk_split(random_waveform(16383, 7), 16384).empty());

  Waveform w = random_waveform(40000, 8);
  auto chunks = chunk_split(w, 16384);
  REQUIRE(chunks.size() == 2);  // 7232 samples dropped
  std::size_t pos = 0;
  for (const auto& c : chunks)
    for (double s : c.samples) CHECK(s == w.samples[pos++]);
  CHECK(pos == 32768);

  CHECK_THROWS_AS(chunk_split(w, 0), RuntimeError);
  CHECK_THROWS_AS(chunk_split(w, -5), RuntimeError);
}

TEST_CASE("pcm16 quantizer maps the anchor values exactly") {
  CHECK(quantize_pcm16(0.0) == 0);
  CHECK(quantize_pcm16(1.0) == 32767);
  CHECK(quantize_pcm16(-1.0) == -32767);
  CHECK(quantize_pcm16(2.0) == 32767);  // clamp before quantize
}

TEST_CASE("wav save/load round trip is bounded by one quantization step") {
  const std::string path = tmp_path("roundtrip.wav");
  Waveform w = random_waveform(8192, 9);
  save_wav(w, path);
  Waveform r = load_wav(path);
  REQUIRE(r.samples.size() == w.samples.size());
  CHECK(r.sample_rate == w.sample_rate);
  double max_err = 0.0;
  for (std::size_t i = 0; i < w.samples.size(); ++i) max_err = std::max(max_err, std::abs(r.samples[i] - w.samples[i]));
  CHECK(max_err <= 1.0 / 32767.0);

  // anchors: 0.0 exact, 1.0 within a step
  Waveform anchors;
  anchors.samples = {0.0, 1.0, -1.0};
  save_wav(anchors, path);
  Waveform ra = load_wav(path);
  CHECK(ra.samples[0] == 0.0);
  CHECK(std::abs(ra.samples[1] - 1.0) <= 1.0 / 32767.0);
  std::filesystem::remove(path);
}

TEST_CASE("malformed wav inputs are rejected with format errors") {
  const std::string path = tmp_path("bad.wav");

  SUBCASE("truncated header") {
    std::ofstream f(path, std::ios::binary);
    f << "RIFFxxxx";
    f.close();
    CHECK_THROWS_AS(load_wav(path), FormatError);
  }
  SUBCASE("not a riff file") {
    std::ofstream f(path, std::ios::binary);
    for (int i = 0; i < 64; ++i) f.put(static_cast<char>(i));
    f.close();
    CHECK_THROWS_AS(load_wav(path), FormatError);
  }
  SUBCASE("stereo rejected") {
    Waveform w = random_waveform(64, 10);
    save_wav(w, path);
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(22);
    char two[2] = {2, 0};
    f.write(two, 2);
    f.close();
    CHECK_THROWS_AS(load_wav(path), FormatError);
  }
  SUBCASE("float format rejected") {
    Waveform w = random_waveform(64, 11);
    save_wav(w, path);
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(20);
    char fmt[2] = {3, 0};  // IEEE float tag
    f.write(fmt, 2);
    f.close();
    CHECK_THROWS_AS(load_wav(path), FormatError);
  }
  std::filesystem::remove(path);
}

TEST_CASE("wav loader walks extra chunks before data") {
  // emulate a decoder that inserts a LIST chunk
  const std::string path = tmp_path("list.wav");
  Waveform w = random_waveform(128, 12);
  save_wav(w, path);
  std::string bytes = read_file_bytes(path);
  std::string with_list = bytes.substr(0, 36);
  const char list[] = {'L', 'I', 'S', 'T', 6, 0, 0, 0, 'I', 'N', 'F', 'O', 'x', 'x'};
  with_list.append(list, sizeof(list));
  with_list.append(bytes.substr(36));
  std::ofstream f(path, std::ios::binary);
  f.write(with_list.data(), static_cast<std::streamsize>(with_list.size()));
  f.close();
  Waveform r = load_wav(path);
  CHECK(r.samples.size() == w.samples.size());
  std::filesystem::remove(path);
}

TEST_CASE("fft inverts itself") {
  Rng rng(13);
  std::vector<double> re(256), im(256), re0, im0;
  for (auto& x : re) x = rng.gaussian();
  for (auto& x : im) x = rng.gaussian();
  re0 = re;
  im0 = im;
  fft_complex(re, im, false);
  fft_complex(re, im, true);
  for (int i = 0; i < 256; ++i) {
    CHECK(re[i] == doctest::Approx(re0[i]).epsilon(1e-10));
    CHECK(im[i] == doctest::Approx(im0[i]).epsilon(1e-10));
  }
}

TEST_SUITE_END();
