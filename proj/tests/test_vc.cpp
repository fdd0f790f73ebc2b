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

#include <cmath>
#include <cstring>
#include <filesystem>

#include "oracles.hpp"
#include "voxtracer/vc.hpp"

using namespace vox;

namespace {

int argmax_band(const MelSpectrogram& m, int frame) {
  int best = 0;
  for (int b = 1; b < m.bands; ++b)
    if (m.values(frame, b) > m.values(frame, best)) best = b;
  return best;
}

}  // namespace

TEST_SUITE_BEGIN("vc");

TEST_CASE("align_to_chunks rounds to the nearest boundary with a one-chunk floor") {
  Waveform w;
  w.samples.assign(40000, 0.1);
  CHECK(align_to_chunks(w, 16384).samples.size() == 32768);
  w.samples.assign(16383, 0.1);
  CHECK(align_to_chunks(w, 16384).samples.size() == 16384);
  w.samples.assign(5000, 0.1);
  CHECK(align_to_chunks(w, 16384).samples.size() == 16384);
  w.samples.assign(25000, 0.1);
  CHECK(align_to_chunks(w, 16384).samples.size() == 32768);
}

TEST_CASE("identity backend passes the source mel through") {
  Waveform src = oracle::test_sine(523.0, 16384);
  Waveform tgt = oracle::test_sine(220.0, 16384);
  StftConfig stft;
  MelSpectrogram m = convert_to_mel(VcRequest{src, tgt}, VcBackend::identity_toy(), stft, 16384);
  MelSpectrogram direct = compute_mel(src, stft);
  REQUIRE(m.frames() == 64);
  REQUIRE(m.bands == 80);
  CHECK(std::memcmp(m.values.data(), direct.values.data(), m.values.size() * sizeof(double)) == 0);
}

TEST_CASE("one-stage backend without warp matches the identity backend") {
  Waveform src = oracle::test_sine(523.0, 16384);
  Waveform tgt = oracle::test_sine(220.0, 16384);
  StftConfig stft;
  VcBackend one = VcBackend::toy_warp(1.0);
  MelSpectrogram a = convert_to_mel(VcRequest{src, tgt}, one, stft, 16384);
  MelSpectrogram b = convert_to_mel(VcRequest{src, tgt}, VcBackend::identity_toy(), stft, 16384);
  CHECK(std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) == 0);
}

TEST_CASE("toy warp shifts the dominant band by the configured factor") {
  const double warp = 1.3;
  Waveform src = oracle::test_sine(440.0, 32768);
  Waveform tgt = oracle::test_sine(220.0, 16384);
  StftConfig stft;
  MelSpectrogram warped = convert_to_mel(VcRequest{src, tgt}, VcBackend::toy_warp(warp), stft, 16384);
  // oracle: a sine at 440*warp lands in this band
  MelSpectrogram ref = compute_mel(oracle::test_sine(440.0 * warp, 16384), stft);
  CHECK(std::abs(argmax_band(warped, 30) - argmax_band(ref, 30)) <= 1);
  // and it differs from the unwarped band
  MelSpectrogram plain = compute_mel(oracle::test_sine(440.0, 16384), stft);
  CHECK(argmax_band(warped, 30) != argmax_band(plain, 30));
}

TEST_CASE("sample-rate mismatch and empty inputs are rejected") {
  Waveform src = oracle::test_sine(440.0, 16384);
  Waveform tgt = oracle::test_sine(220.0, 16384, 0.5, 16000);
  CHECK_THROWS_AS(convert_to_mel(VcRequest{src, tgt}, VcBackend::identity_toy(), StftConfig{}, 16384), RuntimeError);
  Waveform empty;
  CHECK_THROWS_AS(convert_to_mel(VcRequest{src, empty}, VcBackend::identity_toy(), StftConfig{}, 16384), RuntimeError);
}

TEST_CASE("external one-stage backend through the command contract") {
  Waveform src = oracle::test_sine(440.0, 16384);
  Waveform tgt = oracle::test_sine(220.0, 16384);
  VcBackend ext;
  ext.kind = VcBackend::Kind::OneStage;
  ext.command = "cp {source} {out}";  // identity system under the plug-in contract
  StftConfig stft;
  MelSpectrogram a = convert_to_mel(VcRequest{src, tgt}, ext, stft, 16384);
  MelSpectrogram b = compute_mel(quantize_waveform(src), stft);  // path goes through wav
  REQUIRE(a.frames() == b.frames());
  double max_diff = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) max_diff = std::max(max_diff, std::abs(a.values[i] - b.values[i]));
  CHECK(max_diff < 1e-9);
}

TEST_CASE("external backend failure surfaces the diagnostic") {
  Waveform src = oracle::test_sine(440.0, 16384);
  VcBackend ext;
  ext.kind = VcBackend::Kind::OneStage;
  ext.command = "false";
  CHECK_THROWS_WITH_AS(convert_to_mel(VcRequest{src, src}, ext, StftConfig{}, 16384),
                       doctest::Contains("vc backend failed"), RuntimeError);
}

TEST_CASE("external two-stage backend passes its mel through") {
  Waveform src = oracle::test_sine(440.0, 16384);
  StftConfig stft;
  MelSpectrogram fixture = compute_mel(src, stft);
  const std::string fixture_path = "/tmp/voxtest_fixture.mel";
  save_mel(fixture, fixture_path);

  VcBackend two;
  two.kind = VcBackend::Kind::TwoStage;
  two.command = "cp " + fixture_path + " {out}";
  MelSpectrogram m = convert_to_mel(VcRequest{src, src}, two, stft, 16384);
  REQUIRE(m.frames() == fixture.frames());
  CHECK(std::memcmp(m.values.data(), fixture.values.data(), m.values.size() * sizeof(double)) == 0);
  std::filesystem::remove(fixture_path);
}

TEST_CASE("mel file round trip") {
  Waveform src = oracle::test_sine(880.0, 16384);
  MelSpectrogram m = compute_mel(src, StftConfig{});
  const std::string path = "/tmp/voxtest_roundtrip.mel";
  save_mel(m, path);
  MelSpectrogram r = load_mel(path);
  CHECK(r.frames() == m.frames());
  CHECK(r.bands == m.bands);
  CHECK(r.hop == m.hop);
  CHECK(std::memcmp(r.values.data(), m.values.data(), m.values.size() * sizeof(double)) == 0);
  std::filesystem::remove(path);
}

TEST_SUITE_END();
