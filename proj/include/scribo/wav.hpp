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

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "scribo/error.hpp"

// RIFF/WAVE reading for the common PCM and IEEE-float layouts, canonical
// PCM-16 writing, and a windowed-sinc sample-rate converter.

namespace scribo::wav {

inline constexpr int kTargetRate = 16000;

struct WavInfo {
  int format = 0;  // 1 = integer PCM, 3 = IEEE float
  int channels = 0;
  int sample_rate = 0;
  int bits_per_sample = 0;
  std::uint64_t num_frames = 0;
  std::uint64_t data_offset = 0;
  std::uint64_t data_bytes = 0;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(num_frames) / sample_rate : 0.0;
  }
  bool is_target_format() const {
    return format == 1 && channels == 1 && sample_rate == kTargetRate && bits_per_sample == 16;
  }
};

/// Decoded audio, channel-interleaved, scaled to [-1, 1].
struct PcmAudio {
  int sample_rate = 0;
  int channels = 0;
  std::vector<float> samples;

  std::size_t num_frames() const {
    return channels > 0 ? samples.size() / static_cast<std::size_t>(channels) : 0;
  }
  double duration() const {
    return sample_rate > 0 ? static_cast<double>(num_frames()) / sample_rate : 0.0;
  }
};

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace detail

/// Reads the fmt and data chunk headers without touching sample data.
inline WavInfo probe(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0);
  unsigned char header[12];
  if (!in.read(reinterpret_cast<char*>(header), 12) || std::memcmp(header, "RIFF", 4) != 0 ||
      std::memcmp(header + 8, "WAVE", 4) != 0) {
    fail(ErrorKind::kParse, path.string() + ": not a RIFF/WAVE file");
  }
  WavInfo info;
  bool have_fmt = false;
  std::uint64_t pos = 12;
  while (pos + 8 <= file_size) {
    unsigned char chunk[8];
    in.seekg(static_cast<std::streamoff>(pos));
    if (!in.read(reinterpret_cast<char*>(chunk), 8)) break;
    const std::uint32_t size = detail::le32(chunk + 4);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) fail(ErrorKind::kParse, path.string() + ": fmt chunk too small");
      std::array<unsigned char, 40> fmt{};
      in.read(reinterpret_cast<char*>(fmt.data()), std::min<std::uint32_t>(size, 40));
      if (!in) fail(ErrorKind::kParse, path.string() + ": truncated fmt chunk");
      info.format = detail::le16(fmt.data());
      info.channels = detail::le16(fmt.data() + 2);
      info.sample_rate = static_cast<int>(detail::le32(fmt.data() + 4));
      info.bits_per_sample = detail::le16(fmt.data() + 14);
      if (info.format == 0xFFFE && size >= 26) info.format = detail::le16(fmt.data() + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) fail(ErrorKind::kParse, path.string() + ": data chunk before fmt chunk");
      info.data_offset = pos + 8;
      // Streamed writers leave the size at 0xFFFFFFFF; trust the file length.
      info.data_bytes = std::min<std::uint64_t>(size, file_size - info.data_offset);
      const std::uint64_t frame_bytes =
          static_cast<std::uint64_t>(info.channels) * (info.bits_per_sample / 8);
      if (frame_bytes == 0) fail(ErrorKind::kParse, path.string() + ": zero block size");
      info.num_frames = info.data_bytes / frame_bytes;
      if (info.sample_rate <= 0) fail(ErrorKind::kParse, path.string() + ": invalid sample rate");
      return info;
    }
    pos += 8 + size + (size & 1);
  }
  fail(ErrorKind::kParse, path.string() + ": missing " + (have_fmt ? "data" : "fmt") + " chunk");
}

/// Decodes 8/16/24/32-bit integer PCM and 32/64-bit float WAV data.
inline PcmAudio read(const std::filesystem::path& path) {
  const WavInfo info = probe(path);
  const int bytes = info.bits_per_sample / 8;
  const bool ok_int = info.format == 1 && (bytes >= 1 && bytes <= 4);
  const bool ok_float = info.format == 3 && (bytes == 4 || bytes == 8);
  if (!ok_int && !ok_float) {
    fail(ErrorKind::kFormat, path.string() + ": unsupported WAV encoding (format " +
                                 std::to_string(info.format) + ", " +
                                 std::to_string(info.bits_per_sample) + " bit)");
  }
  std::ifstream in(path, std::ios::binary);
  in.seekg(static_cast<std::streamoff>(info.data_offset));
  const std::size_t count = static_cast<std::size_t>(info.num_frames) * info.channels;
  std::vector<unsigned char> raw(count * bytes);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    fail(ErrorKind::kParse, path.string() + ": truncated data chunk");
  }
  PcmAudio audio;
  audio.sample_rate = info.sample_rate;
  audio.channels = info.channels;
  audio.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* p = raw.data() + i * bytes;
    float v = 0.0f;
    if (info.format == 3) {
      if (bytes == 4) {
        std::uint32_t bits = detail::le32(p);
        std::memcpy(&v, &bits, 4);
      } else {
        std::uint64_t bits = detail::le32(p) | (static_cast<std::uint64_t>(detail::le32(p + 4)) << 32);
        double d;
        std::memcpy(&d, &bits, 8);
        v = static_cast<float>(d);
      }
    } else if (bytes == 1) {
      v = (static_cast<int>(p[0]) - 128) / 128.0f;
    } else if (bytes == 2) {
      v = static_cast<std::int16_t>(detail::le16(p)) / 32768.0f;
    } else if (bytes == 3) {
      std::int32_t s = static_cast<std::int32_t>((p[0] << 8) | (p[1] << 16) | (p[2] << 24)) >> 8;
      v = static_cast<float>(s / 8388608.0);
    } else {
      v = static_cast<float>(static_cast<std::int32_t>(detail::le32(p)) / 2147483648.0);
    }
    audio.samples[i] = v;
  }
  return audio;
}

/// Raw little-endian 16-bit samples of a PCM-16 file.
inline std::vector<std::int16_t> read_pcm16(const std::filesystem::path& path) {
  const WavInfo info = probe(path);
  if (info.format != 1 || info.bits_per_sample != 16) {
    fail(ErrorKind::kFormat, path.string() + ": not 16-bit PCM");
  }
  std::ifstream in(path, std::ios::binary);
  in.seekg(static_cast<std::streamoff>(info.data_offset));
  std::vector<unsigned char> raw(static_cast<std::size_t>(info.num_frames) * info.channels * 2);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    fail(ErrorKind::kParse, path.string() + ": truncated data chunk");
  }
  std::vector<std::int16_t> out(raw.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::int16_t>(detail::le16(raw.data() + 2 * i));
  }
  return out;
}

inline std::int16_t to_pcm16(float v) {
  const float scaled = std::nearbyint(v * 32768.0f);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0f, 32767.0f));
}

/// Canonical 44-byte-header PCM-16 WAV.
inline void write_pcm16(const std::filesystem::path& path, const std::vector<std::int16_t>& samples,
                        int sample_rate = kTargetRate, int channels = 1) {
  std::string out;
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::put32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::put32(out, 16);
  detail::put16(out, 1);
  detail::put16(out, static_cast<std::uint16_t>(channels));
  detail::put32(out, static_cast<std::uint32_t>(sample_rate));
  detail::put32(out, static_cast<std::uint32_t>(sample_rate * channels * 2));
  detail::put16(out, static_cast<std::uint16_t>(channels * 2));
  detail::put16(out, 16);
  out += "data";
  detail::put32(out, data_bytes);
  for (std::int16_t s : samples) detail::put16(out, static_cast<std::uint16_t>(s));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f || !f.write(out.data(), static_cast<std::streamsize>(out.size()))) {
    fail(ErrorKind::kIo, "cannot write " + path.string());
  }
}

inline void write_pcm16(const std::filesystem::path& path, const std::vector<float>& samples,
                        int sample_rate = kTargetRate) {
  std::vector<std::int16_t> pcm(samples.size());
  std::transform(samples.begin(), samples.end(), pcm.begin(), to_pcm16);
  write_pcm16(path, pcm, sample_rate, 1);
}

inline std::vector<float> downmix(const PcmAudio& audio) {
  if (audio.channels == 1) return audio.samples;
  const std::size_t frames = audio.num_frames();
  std::vector<float> mono(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    float sum = 0.0f;
    for (int c = 0; c < audio.channels; ++c) sum += audio.samples[f * audio.channels + c];
    mono[f] = sum / static_cast<float>(audio.channels);
  }
  return mono;
}

inline std::size_t resampled_length(std::size_t n, int src_rate, int dst_rate) {
  return static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * dst_rate / static_cast<double>(src_rate)));
}

/// Hann-windowed sinc interpolation. The low-pass cutoff sits at the lower of
/// the two Nyquist frequencies; `zero_crossings` sets the kernel half-width.
inline std::vector<float> resample(const std::vector<float>& x, int src_rate, int dst_rate,
                                   int zero_crossings = 16) {
  if (src_rate <= 0 || dst_rate <= 0) fail(ErrorKind::kDomain, "sample rates must be positive");
  if (src_rate == dst_rate) return x;
  const std::size_t n_out = resampled_length(x.size(), src_rate, dst_rate);
  const double step = static_cast<double>(src_rate) / dst_rate;
  const double cutoff = 0.5 * std::min(1.0, static_cast<double>(dst_rate) / src_rate);
  const double half_width = zero_crossings / (2.0 * cutoff);
  std::vector<float> y(n_out);
  const auto n_in = static_cast<std::ptrdiff_t>(x.size());
  for (std::size_t i = 0; i < n_out; ++i) {
    const double t = static_cast<double>(i) * step;
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(t - half_width)));
    const auto hi = std::min<std::ptrdiff_t>(n_in - 1, static_cast<std::ptrdiff_t>(std::floor(t + half_width)));
    double acc = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) {
      const double d = t - static_cast<double>(k);
      const double arg = 2.0 * cutoff * d;
      const double sinc = std::abs(arg) < 1e-12 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
      const double window = 0.5 + 0.5 * std::cos(std::numbers::pi * d / half_width);
      acc += x[static_cast<std::size_t>(k)] * 2.0 * cutoff * sinc * window;
    }
    y[i] = static_cast<float>(acc);
  }
  return y;
}

inline constexpr const char* kResamplerName = "windowed-sinc-hann-16";

/// Decoder hook for non-WAV sources, keyed by lower-case file extension
/// (".mp3"). A decoder returns nullopt when it cannot handle the file.
using AudioDecoder = std::function<std::optional<PcmAudio>(const std::filesystem::path&)>;

class DecoderRegistry {
 public:
  void add(const std::string& extension, AudioDecoder decoder) {
    decoders_[extension] = std::move(decoder);
  }

  const AudioDecoder* find(const std::filesystem::path& path) const {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    auto it = decoders_.find(ext);
    return it == decoders_.end() ? nullptr : &it->second;
  }

 private:
  std::map<std::string, AudioDecoder> decoders_;
};

inline bool is_wav_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[12] = {};
  return in.read(magic, 12) && std::memcmp(magic, "RIFF", 4) == 0 &&
         std::memcmp(magic + 8, "WAVE", 4) == 0;
}

inline PcmAudio decode_any(const std::filesystem::path& src, const DecoderRegistry* decoders) {
  if (!std::filesystem::exists(src)) fail(ErrorKind::kMissing, "no such audio file " + src.string());
  if (is_wav_file(src)) return read(src);
  if (decoders) {
    if (const AudioDecoder* decoder = decoders->find(src)) {
      if (auto audio = (*decoder)(src)) return std::move(*audio);
    }
  }
  fail(ErrorKind::kFormat, "cannot decode " + src.string());
}

/// Duration from headers alone; nullopt for formats without a probe.
inline std::optional<double> probe_duration(const std::filesystem::path& path) {
  if (!is_wav_file(path)) return std::nullopt;
  return probe(path).duration();
}

/// Writes `dst` as mono 16 kHz PCM-16 and returns its duration in seconds.
/// Channels are averaged; other rates go through resample(). Files already in
/// the target format keep their samples byte for byte.
inline double convert_audio(const std::filesystem::path& src, const std::filesystem::path& dst,
                            const DecoderRegistry* decoders = nullptr) {
  if (is_wav_file(src)) {
    const WavInfo info = probe(src);
    if (info.is_target_format()) {
      write_pcm16(dst, read_pcm16(src));
      return info.duration();
    }
  }
  const PcmAudio audio = decode_any(src, decoders);
  if (audio.channels <= 0 || audio.sample_rate <= 0) {
    fail(ErrorKind::kFormat, src.string() + ": decoder returned no channel layout");
  }
  const std::vector<float> mono = resample(downmix(audio), audio.sample_rate, kTargetRate);
  write_pcm16(dst, mono);
  return static_cast<double>(mono.size()) / kTargetRate;
}

}  // namespace scribo::wav
