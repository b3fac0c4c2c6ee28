/*
 Copyright 2026 The Scribo Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "scribo/features.hpp"
#include "scribo/wav.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
namespace feat = scribo::features;
namespace wav = scribo::wav;
using scribo::Error;
using scribo::ErrorKind;

namespace {

std::vector<float> sine(double freq, double rate, std::size_t n, double amp = 0.5) {
  std::vector<float> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * freq * i / rate));
  }
  return x;
}

// Interleaved float samples written as PCM-16 with an arbitrary layout.
void write_wav(const fs::path& path, const std::vector<float>& interleaved, int rate, int channels) {
  std::vector<std::int16_t> pcm(interleaved.size());
  for (std::size_t i = 0; i < pcm.size(); ++i) pcm[i] = wav::to_pcm16(interleaved[i]);
  wav::write_pcm16(path, pcm, rate, channels);
}

// Minimal writer for non-16-bit layouts.
void write_raw_wav(const fs::path& path, int format, int bits, int rate, int channels,
                   const std::string& payload) {
  std::string out = "RIFF";
  wav::detail::put32(out, static_cast<std::uint32_t>(36 + payload.size()));
  out += "WAVEfmt ";
  wav::detail::put32(out, 16);
  wav::detail::put16(out, static_cast<std::uint16_t>(format));
  wav::detail::put16(out, static_cast<std::uint16_t>(channels));
  wav::detail::put32(out, static_cast<std::uint32_t>(rate));
  wav::detail::put32(out, static_cast<std::uint32_t>(rate * channels * bits / 8));
  wav::detail::put16(out, static_cast<std::uint16_t>(channels * bits / 8));
  wav::detail::put16(out, static_cast<std::uint16_t>(bits));
  out += "data";
  wav::detail::put32(out, static_cast<std::uint32_t>(payload.size()));
  out += payload;
  std::ofstream(path, std::ios::binary) << out;
}

}  // namespace

TEST(Wav, ConvertStereo48kToMono16k) {
  const auto dir = scribo::testing::temp_dir("wav_convert");
  const std::size_t frames = 96000;  // 2.0 s
  std::vector<float> stereo(frames * 2);
  const auto tone = sine(440.0, 48000.0, frames);
  for (std::size_t i = 0; i < frames; ++i) {
    stereo[2 * i] = tone[i];
    stereo[2 * i + 1] = tone[i];
  }
  write_wav(dir / "in.wav", stereo, 48000, 2);
  const double duration = wav::convert_audio(dir / "in.wav", dir / "out.wav");
  EXPECT_NEAR(duration, 2.0, 1.0 / 16000);
  const auto info = wav::probe(dir / "out.wav");
  EXPECT_TRUE(info.is_target_format());
  EXPECT_EQ(info.num_frames, 32000u);

  // The resampled tone keeps its amplitude away from the edges.
  const auto clip = feat::load_wav(dir / "out.wav");
  float peak = 0.0f;
  for (std::size_t i = 1000; i < 31000; ++i) peak = std::max(peak, std::abs(clip.samples[i]));
  EXPECT_NEAR(peak, 0.5f, 0.01f);
}

TEST(Wav, ConformantFileKeepsSamplesByteIdentical) {
  const auto dir = scribo::testing::temp_dir("wav_noop");
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> dist(-32768, 32767);
  std::vector<std::int16_t> pcm(12345);
  for (auto& s : pcm) s = static_cast<std::int16_t>(dist(rng));
  wav::write_pcm16(dir / "in.wav", pcm);
  const double duration = wav::convert_audio(dir / "in.wav", dir / "out.wav");
  EXPECT_DOUBLE_EQ(duration, 12345.0 / 16000.0);
  EXPECT_EQ(wav::read_pcm16(dir / "out.wav"), pcm);
}

TEST(Wav, ZeroLengthPayload) {
  const auto dir = scribo::testing::temp_dir("wav_empty");
  write_wav(dir / "in.wav", {}, 44100, 2);
  EXPECT_EQ(wav::convert_audio(dir / "in.wav", dir / "out.wav"), 0.0);
  const auto info = wav::probe(dir / "out.wav");
  EXPECT_EQ(info.num_frames, 0u);
  EXPECT_EQ(info.data_bytes, 0u);
  EXPECT_EQ(fs::file_size(dir / "out.wav"), 44u);
}

TEST(Wav, ReadsOtherSampleEncodings) {
  const auto dir = scribo::testing::temp_dir("wav_encodings");
  // 8-bit unsigned: 0x80 is silence, 0xC0 is +0.5.
  write_raw_wav(dir / "u8.wav", 1, 8, 8000, 1, std::string("\x80\xC0", 2));
  auto u8 = wav::read(dir / "u8.wav");
  EXPECT_FLOAT_EQ(u8.samples[0], 0.0f);
  EXPECT_FLOAT_EQ(u8.samples[1], 0.5f);
  // 24-bit: 0x400000 is +0.5.
  write_raw_wav(dir / "s24.wav", 1, 24, 8000, 1, std::string("\x00\x00\x40\x00\x00\xC0", 6));
  auto s24 = wav::read(dir / "s24.wav");
  EXPECT_FLOAT_EQ(s24.samples[0], 0.5f);
  EXPECT_FLOAT_EQ(s24.samples[1], -0.5f);
  // 32-bit float.
  float values[2] = {0.25f, -1.0f};
  write_raw_wav(dir / "f32.wav", 3, 32, 8000, 1,
                std::string(reinterpret_cast<const char*>(values), sizeof values));
  auto f32 = wav::read(dir / "f32.wav");
  EXPECT_FLOAT_EQ(f32.samples[0], 0.25f);
  EXPECT_FLOAT_EQ(f32.samples[1], -1.0f);
  EXPECT_NEAR(wav::convert_audio(dir / "f32.wav", dir / "f32_out.wav"), 4.0 / 16000, 1e-12);
}

TEST(Wav, MalformedAndUndecodableSources) {
  const auto dir = scribo::testing::temp_dir("wav_bad");
  std::ofstream(dir / "junk.wav") << "definitely not audio";
  EXPECT_THROW(wav::probe(dir / "junk.wav"), Error);
  EXPECT_THROW(wav::convert_audio(dir / "junk.wav", dir / "out.wav"), Error);
  std::ofstream(dir / "clip.mp3") << "ID3";
  try {
    wav::convert_audio(dir / "clip.mp3", dir / "out.wav");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
  }
  EXPECT_THROW(wav::convert_audio(dir / "missing.wav", dir / "out.wav"), Error);
}

TEST(Wav, PluggableDecoder) {
  const auto dir = scribo::testing::temp_dir("wav_plugin");
  std::ofstream(dir / "clip.mp3") << "ID3";
  wav::DecoderRegistry registry;
  registry.add(".mp3", [](const fs::path&) -> std::optional<wav::PcmAudio> {
    wav::PcmAudio audio;
    audio.sample_rate = 8000;
    audio.channels = 1;
    audio.samples.assign(8000, 0.1f);
    return audio;
  });
  EXPECT_NEAR(wav::convert_audio(dir / "clip.mp3", dir / "out.wav", &registry), 1.0, 1e-12);
  EXPECT_EQ(wav::probe(dir / "out.wav").num_frames, 16000u);
}

TEST(Wav, ResamplerLengthAndDcGain) {
  std::vector<float> dc(44100, 0.25f);
  const auto y = wav::resample(dc, 44100, 16000);
  ASSERT_EQ(y.size(), 16000u);
  for (std::size_t i = 200; i < y.size() - 200; ++i) EXPECT_NEAR(y[i], 0.25f, 2e-3f);
  const auto up = wav::resample(std::vector<float>(8000, 0.5f), 8000, 16000);
  ASSERT_EQ(up.size(), 16000u);
  EXPECT_NEAR(up[8000], 0.5f, 2e-3f);
}

TEST(Features, LoadWavExamples) {
  const auto dir = scribo::testing::temp_dir("features_load");
  std::vector<std::int16_t> pcm(16000, 0);
  pcm[0] = 32767;
  wav::write_pcm16(dir / "one.wav", pcm);
  const auto clip = feat::load_wav(dir / "one.wav");
  EXPECT_DOUBLE_EQ(clip.duration(), 1.0);
  EXPECT_FLOAT_EQ(clip.samples[0], 32767.0f / 32768.0f);

  wav::write_pcm16(dir / "stereo.wav", pcm, 16000, 2);
  try {
    feat::load_wav(dir / "stereo.wav");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
  }
  wav::write_pcm16(dir / "rate.wav", pcm, 8000, 1);
  EXPECT_THROW(feat::load_wav(dir / "rate.wav"), Error);
}

TEST(Features, SilenceIsLogEpsilon) {
  feat::AudioClip clip{std::vector<float>(16000, 0.0f)};
  const feat::FeatureConfig cfg;
  const auto m = feat::logmel(clip, cfg);
  ASSERT_EQ(m.cols(), 64u);
  const float floor = static_cast<float>(std::log(std::ldexp(1.0, -24)));
  for (float v : m.values()) EXPECT_EQ(v, floor);
}

TEST(Features, FrameCountOneSecond) {
  feat::AudioClip clip{std::vector<float>(16000, 0.1f)};
  // 1 + floor((16000 - 320) / 160)
  EXPECT_EQ(feat::logmel(clip).rows(), 99u);
}

TEST(Features, FrameCountPropertyAndShortClips) {
  std::mt19937 rng(9);
  std::uniform_int_distribution<int> len(0, 5000);
  const feat::FeatureConfig cfg;
  for (int i = 0; i < 50; ++i) {
    const int n = len(rng);
    const std::size_t expected = n < 320 ? 0 : 1 + (n - 320) / 160;
    feat::AudioClip clip{std::vector<float>(static_cast<std::size_t>(n), 0.01f)};
    EXPECT_EQ(feat::logmel(clip, cfg).rows(), expected) << n;
  }
}

TEST(Features, PureToneLandsInNearestMelBin) {
  feat::AudioClip clip{sine(1000.0, 16000.0, 16000)};
  const auto m = feat::logmel(clip);
  // Centers recomputed from the HTK formula: 64 filters spread evenly in mel
  // between 0 Hz and 8000 Hz, so 66 edge points.
  const double top = 2595.0 * std::log10(1.0 + 8000.0 / 700.0);
  int nearest = 0;
  double best = 1e9;
  for (int i = 0; i < 64; ++i) {
    const double mel = top * (i + 1) / 65.0;
    const double hz = 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
    if (std::abs(hz - 1000.0) < best) {
      best = std::abs(hz - 1000.0);
      nearest = i;
    }
  }
  for (std::size_t t = 0; t < m.rows(); ++t) {
    const auto row = m.row(t);
    const auto arg = std::max_element(row.begin(), row.end()) - row.begin();
    EXPECT_EQ(arg, nearest) << "frame " << t;
  }
}

TEST(Features, FilterbankEnergyMonotoneInAmplitude) {
  std::mt19937 rng(17);
  std::normal_distribution<float> noise(0.0f, 0.1f);
  for (int trial = 0; trial < 5; ++trial) {
    feat::AudioClip a{std::vector<float>(4000)};
    for (auto& s : a.samples) s = noise(rng);
    feat::AudioClip b = a;
    for (auto& s : b.samples) s *= 2.0f;
    const auto pa = feat::mel_power(a, {});
    const auto pb = feat::mel_power(b, {});
    for (std::size_t i = 0; i < pa.values().size(); ++i) {
      EXPECT_GE(pb.values()[i], pa.values()[i]);
    }
  }
}

TEST(Features, NormalizeExamples) {
  feat::FeatureMatrix m(2, 2, std::vector<float>{1.0f, 5.0f, 3.0f, 5.0f});
  const auto n = feat::normalize_features(m);
  EXPECT_FLOAT_EQ(n(0, 0), -1.0f);
  EXPECT_FLOAT_EQ(n(1, 0), 1.0f);
  EXPECT_EQ(n(0, 1), 0.0f);
  EXPECT_EQ(n(1, 1), 0.0f);
  EXPECT_THROW(feat::normalize_features(feat::FeatureMatrix(1, 3)), Error);
}

TEST(Features, NormalizeIsIdempotent) {
  std::mt19937 rng(21);
  std::normal_distribution<float> dist(3.0f, 4.0f);
  feat::FeatureMatrix m(50, 8);
  for (std::size_t t = 0; t < 50; ++t) {
    for (float& v : m.row(t)) v = dist(rng);
  }
  const auto once = feat::normalize_features(m);
  const auto twice = feat::normalize_features(once);
  EXPECT_LE(scribo::max_abs_diff(once, twice), 1e-6);
}

TEST(Features, ConfigValidation) {
  feat::FeatureConfig cfg;
  cfg.fft_size = 256;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.fmax = 9000;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.mel_bins = 0;
  EXPECT_THROW(cfg.validate(), Error);
  nlohmann::json j = feat::FeatureConfig{};
  EXPECT_EQ(j.get<feat::FeatureConfig>(), feat::FeatureConfig{});
}
