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

#include "oracles.hpp"
#include "voxtracer/channel.hpp"
#include "voxtracer/dataset.hpp"
#include "voxtracer/errors.hpp"

using namespace vox;

namespace {

Waveform random_waveform(int n, std::uint64_t seed, double amp = 0.5) {
  Rng rng(seed);
  Waveform w;
  w.samples.resize(static_cast<std::size_t>(n));
  for (double& s : w.samples) s = amp * rng.uniform(-1.0, 1.0);
  return w;
}

double power_of(const std::vector<double>& x) {
  double p = 0.0;
  for (double s : x) p += s * s;
  return p / static_cast<double>(x.size());
}

}  // namespace

TEST_SUITE_BEGIN("channel");

TEST_CASE("gaussian noise hits the target snr") {
  Waveform w = oracle::test_sine(440.0, 16384, 0.7071);  // near unit power after doubling? no: amp^2/2
  const double sig_power = power_of(w.samples);
  for (double snr : {20.0, 30.0, 40.0}) {
    Waveform noisy = add_gaussian_noise(w, snr, 99);
    std::vector<double> noise(w.samples.size());
    for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = noisy.samples[i] - w.samples[i];
    const double realized_snr = 10.0 * std::log10(sig_power / power_of(noise));
    CHECK(std::abs(realized_snr - snr) <= 0.5);
  }
}

TEST_CASE("noise is deterministic per seed and rejects silent input") {
  Waveform w = random_waveform(4096, 1);
  Waveform a = add_gaussian_noise(w, 30.0, 7);
  Waveform b = add_gaussian_noise(w, 30.0, 7);
  Waveform c = add_gaussian_noise(w, 30.0, 8);
  bool same = true, differs = false;
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    same = same && (a.samples[i] == b.samples[i]);
    differs = differs || (a.samples[i] != c.samples[i]);
  }
  CHECK(same);
  CHECK(differs);

  Waveform silent;
  silent.samples.assign(1024, 0.0);
  CHECK_THROWS_AS(add_gaussian_noise(silent, 30.0, 1), RuntimeError);
}

TEST_CASE("amplitude scaling is exact") {
  Waveform w;
  w.samples = {1.0, -0.5};
  Waveform s = amplitude_scale(w, 0.9);
  CHECK(s.samples[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(s.samples[1] == doctest::Approx(-0.45).epsilon(1e-15));
  CHECK_THROWS_AS(amplitude_scale(w, -1.0), RuntimeError);
}

TEST_CASE("requantization bounds") {
  Waveform w;
  w.samples = {0.5};
  Waveform q8 = requantize(w, 8);
  CHECK(std::abs(q8.samples[0] - 0.5) <= 1.0 / 128.0);

  Waveform r = quantize_waveform(random_waveform(1024, 2));
  Waveform q32 = requantize(r, 32);
  for (std::size_t i = 0; i < r.samples.size(); ++i) CHECK(q32.samples[i] == r.samples[i]);  // lossless from PCM16

  Waveform q8b = requantize(r, 8);
  for (std::size_t i = 0; i < r.samples.size(); ++i) CHECK(std::abs(q8b.samples[i] - r.samples[i]) <= 1.0 / 128.0);

  CHECK_THROWS_AS(requantize(r, 12), RuntimeError);
}

TEST_CASE("median filter matches the hand-evaluated example") {
  Waveform w;
  w.samples = {0.0, 1.0, 0.0, 1.0, 0.0};
  Waveform m = median_filter_wave(w, 3);
  const std::vector<double> expect = {0.0, 0.0, 1.0, 0.0, 0.0};  // replicate edges
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(m.samples[i] == expect[i]);
  CHECK_THROWS_AS(median_filter_wave(w, 4), RuntimeError);
}

TEST_CASE("butterworth lowpass attenuates above cutoff and is zero phase") {
  Waveform low = oracle::test_sine(200.0, 16384);
  Waveform mid = oracle::test_sine(1000.0, 16384);
  Waveform high = oracle::test_sine(3000.0, 16384);

  const double p_low = power_of(lowpass_butterworth(low, 1000.0).samples) / power_of(low.samples);
  const double p_mid = power_of(lowpass_butterworth(mid, 1000.0).samples) / power_of(mid.samples);
  const double p_high = power_of(lowpass_butterworth(high, 1000.0).samples) / power_of(high.samples);

  CHECK(p_low > 0.98);          // passband
  CHECK(p_mid == doctest::Approx(0.25).epsilon(0.08));  // -3 dB each pass at fc
  CHECK(p_high < 1e-4);         // stopband

  // zero phase: the filtered low tone aligns with the input at lag 0
  Waveform f = lowpass_butterworth(low, 1000.0);
  RealignResult r = realign(low, f, 64);
  CHECK(r.shift == 0);
}

TEST_CASE("resample round trip preserves band-limited content and length") {
  Waveform w = oracle::test_sine(1000.0, 16384);
  for (int rate : {16000, 24000}) {
    Waveform rt = resample_roundtrip(w, rate);
    CHECK(rt.samples.size() == w.samples.size());
    double err = 0.0;
    for (std::size_t i = 2048; i < w.samples.size() - 2048; ++i)
      err = std::max(err, std::abs(rt.samples[i] - w.samples[i]));
    CHECK(err < 0.02);
  }
}

TEST_CASE("realign recovers constructed delays exactly") {
  Waveform ref = random_waveform(16384, 3);
  SUBCASE("identity") {
    RealignResult r = realign(ref, ref);
    CHECK(r.shift == 0);
    CHECK(r.peak == doctest::Approx(1.0));
  }
  SUBCASE("delay of 100") {
    Waveform delayed;
    delayed.samples.assign(100, 0.0);
    delayed.samples.insert(delayed.samples.end(), ref.samples.begin(), ref.samples.end());
    RealignResult r = realign(ref, delayed);
    CHECK(r.shift == 100);
    for (std::size_t i = 0; i < ref.samples.size(); ++i) CHECK(r.aligned.samples[i] == ref.samples[i]);
  }
  SUBCASE("negative delay") {
    Waveform advanced;
    advanced.samples.assign(ref.samples.begin() + 70, ref.samples.end());
    RealignResult r = realign(ref, advanced);
    CHECK(r.shift == -70);
  }
  SUBCASE("uncorrelated input fails") {
    Waveform junk = random_waveform(16384, 999);
    CHECK_THROWS_AS(realign(ref, junk), RuntimeError);
  }
}

TEST_CASE("transmit under the identity spec is exactly the pcm16 saving error") {
  Waveform w = random_waveform(16384, 4);
  ChannelSpec spec;  // none codec, no ops
  CodecRegistry codecs;
  Waveform out = transmit(w, spec, 1, codecs);
  CHECK(out.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    CHECK(std::abs(out.samples[i] - w.samples[i]) <= 1.0 / 32767.0);
    CHECK(out.samples[i] == quantize_pcm16(w.samples[i]) / 32767.0);
  }
}

TEST_CASE("transmit applies ops in the listed order") {
  Waveform w = random_waveform(8192, 5);
  CodecRegistry codecs;
  ChannelSpec ab = parse_channel_spec("amp(0.9) + requant(8)");
  ChannelSpec ba = parse_channel_spec("requant(8) + amp(0.9)");
  Waveform out_ab = transmit(w, ab, 1, codecs);
  Waveform out_ba = transmit(w, ba, 1, codecs);

  // oracle: direct composition on the quantized waveform
  Waveform expect_ab = requantize(amplitude_scale(quantize_waveform(w), 0.9), 8);
  Waveform expect_ba = amplitude_scale(requantize(quantize_waveform(w), 8), 0.9);
  bool ab_match = true, differ = false;
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    ab_match = ab_match && (out_ab.samples[i] == expect_ab.samples[i]);
    differ = differ || (out_ab.samples[i] != out_ba.samples[i]);
  }
  CHECK(ab_match);
  CHECK(differ);
  bool ba_match = true;
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    ba_match = ba_match && (out_ba.samples[i] == expect_ba.samples[i]);
  CHECK(ba_match);
}

TEST_CASE("channel spec grammar and enumerated defaults") {
  ChannelSpec s1 = parse_channel_spec("mp3@64 + noise(30) + amp(0.9)");
  CHECK(s1.codec == "mp3");
  CHECK(s1.bitrate == "64");
  REQUIRE(s1.ops.size() == 2);
  CHECK(s1.label() == "mp3@64+noise(30)+amp(0.9)");

  ChannelSpec s2 = parse_channel_spec("none");
  CHECK(s2.is_identity());

  ChannelSpec s3 = parse_channel_spec("noise(20)");
  CHECK(s3.codec == "none");
  REQUIRE(s3.ops.size() == 1);

  CHECK_THROWS_AS(parse_channel_spec("mp3@57"), ConfigError);          // off-grid bitrate
  CHECK(parse_channel_spec("mp3@57", true).bitrate == "57");           // explicit override
  CHECK_THROWS_AS(parse_channel_spec("noise(25)"), ConfigError);       // off-set snr
  CHECK(parse_channel_spec("noise(25)", true).ops[0].param == 25.0);
  CHECK_THROWS_AS(parse_channel_spec("mp3"), ConfigError);
  CHECK_THROWS_AS(parse_channel_spec("h264@64"), ConfigError);
  CHECK_THROWS_AS(parse_channel_spec("mp3@64 + warble(3)"), ConfigError);
  CHECK_THROWS_AS(parse_channel_list("  ;  "), ConfigError);
  CHECK(parse_channel_list("none; noise(30); mp3@64").size() == 3);
}

TEST_CASE("missing codec binary raises a dependency error naming it") {
  Waveform w = random_waveform(16384, 6);
  CodecRegistry codecs;
  CodecTemplates broken{"definitely_missing_codec_binary_xyz encode {in} {out} {bitrate}",
                        "definitely_missing_codec_binary_xyz decode {in} {out}", "bin", "mp3", "none"};
  codecs.add("mp3", broken);
  ChannelSpec spec = parse_channel_spec("mp3@64");
  try {
    transmit(w, spec, 1, codecs);
    FAIL("expected DependencyError");
  } catch (const DependencyError& e) {
    CHECK(std::string(e.what()).find("definitely_missing_codec_binary_xyz") != std::string::npos);
  }
}

TEST_CASE("codec round trips keep the signal recognizable" * doctest::timeout(300)) {
  REQUIRE_MESSAGE(oracle::voxcodec_available(), "voxcodec binary must be installed for codec tests");
  CodecRegistry codecs = oracle::test_codecs();
  ToySpeaker spk = make_toy_speaker(7, 3);
  Waveform w = synth_utterance(spk, 8, 32768);

  for (const char* spec_text : {"mp3@64", "aac@64", "opus@32", "silk@16"}) {
    ChannelSpec spec = parse_channel_spec(spec_text);
    Waveform out = transmit(w, spec, 9, codecs);
    CHECK(out.samples.size() == w.samples.size());
    // normalized correlation against the quantized input
    Waveform q = quantize_waveform(w);
    double num = 0.0, qq = 0.0, oo = 0.0;
    for (std::size_t i = 0; i < q.samples.size(); ++i) {
      num += q.samples[i] * out.samples[i];
      qq += q.samples[i] * q.samples[i];
      oo += out.samples[i] * out.samples[i];
    }
    const double corr = num / std::sqrt(qq * oo);
    MESSAGE(spec_text, " correlation after realignment: ", corr);
    CHECK(corr >= 0.9);
  }
}

TEST_CASE("mp3 residual misalignment stays within two samples of the full search oracle" * doctest::timeout(300)) {
  REQUIRE_MESSAGE(oracle::voxcodec_available(), "voxcodec binary must be installed for codec tests");
  CodecRegistry codecs = oracle::test_codecs();
  Waveform w = random_waveform(32768, 10, 0.4);  // white noise
  ChannelSpec spec = parse_channel_spec("mp3@64");
  Waveform out = transmit(w, spec, 11, codecs);
  const int residual = oracle::full_lag_search(quantize_waveform(w).samples, out.samples, 8192);
  CHECK(std::abs(residual) <= 2);
}

TEST_CASE("transmit is reproducible bit for bit" * doctest::timeout(300)) {
  REQUIRE_MESSAGE(oracle::voxcodec_available(), "voxcodec binary must be installed for codec tests");
  CodecRegistry codecs = oracle::test_codecs();
  Waveform w = random_waveform(16384, 12, 0.4);
  ChannelSpec spec = parse_channel_spec("mp3@64 + noise(30)");
  Waveform a = transmit(w, spec, 13, codecs);
  Waveform b = transmit(w, spec, 13, codecs);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i] == b.samples[i]);
}

TEST_SUITE_END();
