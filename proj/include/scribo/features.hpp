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

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include <fftw3.h>

#include "json.hpp"
#include "scribo/error.hpp"
#include "scribo/matrix.hpp"
#include "scribo/wav.hpp"

namespace scribo::features {

inline constexpr int kSampleRate = 16000;

/// Mono 16 kHz audio scaled to [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

using FeatureMatrix = Matrix<float>;

struct FeatureConfig {
  double window_length = 0.020;  // seconds
  double hop_length = 0.010;     // seconds
  int fft_size = 512;
  int mel_bins = 64;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_epsilon = 5.9604644775390625e-08;  // 2^-24

  int window_samples(int rate = kSampleRate) const {
    return static_cast<int>(std::lround(window_length * rate));
  }
  int hop_samples(int rate = kSampleRate) const {
    return static_cast<int>(std::lround(hop_length * rate));
  }

  void validate(int rate = kSampleRate) const {
    if (window_samples(rate) < 1 || hop_samples(rate) < 1) {
      fail(ErrorKind::kDomain, "window and hop must cover at least one sample");
    }
    if (fft_size < window_samples(rate)) fail(ErrorKind::kDomain, "fft_size smaller than the window");
    if (mel_bins < 1) fail(ErrorKind::kDomain, "mel_bins must be >= 1");
    if (fmin < 0 || fmax <= fmin || fmax > rate / 2.0) {
      fail(ErrorKind::kDomain, "mel range must satisfy 0 <= fmin < fmax <= rate/2");
    }
    if (!(log_epsilon > 0)) fail(ErrorKind::kDomain, "log_epsilon must be positive");
  }

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

inline void to_json(nlohmann::json& j, const FeatureConfig& c) {
  j = {{"window_length", c.window_length}, {"hop_length", c.hop_length},
       {"fft_size", c.fft_size},           {"mel_bins", c.mel_bins},
       {"fmin", c.fmin},                   {"fmax", c.fmax},
       {"log_epsilon", c.log_epsilon}};
}

inline void from_json(const nlohmann::json& j, FeatureConfig& c) {
  c.window_length = j.value("window_length", c.window_length);
  c.hop_length = j.value("hop_length", c.hop_length);
  c.fft_size = j.value("fft_size", c.fft_size);
  c.mel_bins = j.value("mel_bins", c.mel_bins);
  c.fmin = j.value("fmin", c.fmin);
  c.fmax = j.value("fmax", c.fmax);
  c.log_epsilon = j.value("log_epsilon", c.log_epsilon);
}

/// Strict loader: the file must already be mono 16 kHz PCM-16. Conversion is
/// the corpus tooling's job.
inline AudioClip load_wav(const std::filesystem::path& path) {
  const wav::WavInfo info = wav::probe(path);
  if (info.format != 1 || info.bits_per_sample != 16) {
    fail(ErrorKind::kFormat, path.string() + ": expected 16-bit PCM, got format " +
                                 std::to_string(info.format) + " with " +
                                 std::to_string(info.bits_per_sample) + " bit");
  }
  if (info.channels != 1) {
    fail(ErrorKind::kFormat, path.string() + ": expected 1 channel, got " +
                                 std::to_string(info.channels));
  }
  if (info.sample_rate != kSampleRate) {
    fail(ErrorKind::kFormat, path.string() + ": expected 16000 Hz, got " +
                                 std::to_string(info.sample_rate));
  }
  const auto pcm = wav::read_pcm16(path);
  AudioClip clip;
  clip.samples.resize(pcm.size());
  for (std::size_t i = 0; i < pcm.size(); ++i) clip.samples[i] = pcm[i] / 32768.0f;
  return clip;
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Frames fully contained in `num_samples`; no padding or centering.
inline std::size_t frame_count(std::size_t num_samples, const FeatureConfig& cfg) {
  const auto win = static_cast<std::size_t>(cfg.window_samples());
  const auto hop = static_cast<std::size_t>(cfg.hop_samples());
  return num_samples < win ? 0 : 1 + (num_samples - win) / hop;
}

/// Triangular HTK-mel filters with unit peak, `mel_bins` x (fft_size/2 + 1).
inline Matrix<float> mel_filterbank(const FeatureConfig& cfg, int rate = kSampleRate) {
  const int bins = cfg.fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(cfg.fmax);
  std::vector<double> edges(cfg.mel_bins + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (cfg.mel_bins + 1));
  }
  Matrix<float> fb(cfg.mel_bins, bins);
  for (int m = 0; m < cfg.mel_bins; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * rate / cfg.fft_size;
      const double up = (f - left) / (center - left);
      const double down = (right - f) / (right - center);
      fb(m, k) = static_cast<float>(std::max(0.0, std::min(up, down)));
    }
  }
  return fb;
}

namespace detail {

// fftw planning is not thread-safe; executing an existing plan on new arrays is.
class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = fftwf_alloc_real(static_cast<std::size_t>(n));
    out_ = fftwf_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    std::lock_guard lock(planner_mutex());
    plan_ = fftwf_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(planner_mutex());
      fftwf_destroy_plan(plan_);
    }
    fftwf_free(in_);
    fftwf_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  float* input() { return in_; }

  /// |X_k|^2 for k = 0..n/2.
  void power(std::vector<float>& out) {
    fftwf_execute(plan_);
    out.resize(static_cast<std::size_t>(n_ / 2 + 1));
    for (int k = 0; k <= n_ / 2; ++k) out[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
  }

 private:
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }

  int n_;
  float* in_ = nullptr;
  fftwf_complex* out_ = nullptr;
  fftwf_plan plan_ = nullptr;
};

inline std::vector<float> hann(int n) {
  std::vector<float> w(n);
  if (n == 1) {
    w[0] = 1.0f;
    return w;
  }
  for (int i = 0; i < n; ++i) {
    w[i] = static_cast<float>(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (n - 1)));
  }
  return w;
}

}  // namespace detail

/// Mel filterbank energies before the log, T x mel_bins.
inline FeatureMatrix mel_power(const AudioClip& clip, const FeatureConfig& cfg) {
  if (clip.sample_rate != kSampleRate) {
    fail(ErrorKind::kFormat, "audio clip must be 16000 Hz, got " + std::to_string(clip.sample_rate));
  }
  cfg.validate();
  const std::size_t frames = frame_count(clip.samples.size(), cfg);
  FeatureMatrix out(frames, static_cast<std::size_t>(cfg.mel_bins));
  if (frames == 0) return out;
  const int win = cfg.window_samples();
  const int hop = cfg.hop_samples();
  const auto window = detail::hann(win);
  const auto fb = mel_filterbank(cfg);
  detail::RealFft fft(cfg.fft_size);
  std::vector<float> power;
  for (std::size_t t = 0; t < frames; ++t) {
    float* buf = fft.input();
    const float* src = clip.samples.data() + t * hop;
    for (int i = 0; i < win; ++i) buf[i] = src[i] * window[i];
    std::fill(buf + win, buf + cfg.fft_size, 0.0f);
    fft.power(power);
    auto row = out.row(t);
    for (int m = 0; m < cfg.mel_bins; ++m) {
      const auto filter = fb.row(m);
      double acc = 0.0;
      for (std::size_t k = 0; k < power.size(); ++k) acc += static_cast<double>(filter[k]) * power[k];
      row[m] = static_cast<float>(acc);
    }
  }
  return out;
}

/// Hann window, power spectrum, mel filterbank, natural log of power + epsilon.
inline FeatureMatrix logmel(const AudioClip& clip, const FeatureConfig& cfg = {}) {
  FeatureMatrix m = mel_power(clip, cfg);
  const double eps = cfg.log_epsilon;
  for (std::size_t t = 0; t < m.rows(); ++t) {
    for (float& v : m.row(t)) v = static_cast<float>(std::log(static_cast<double>(v) + eps));
  }
  return m;
}

/// Per-column standardization to zero mean and unit population deviation.
/// Columns whose deviation is below 1e-10 become zero.
inline FeatureMatrix normalize_features(const FeatureMatrix& m) {
  if (m.rows() < 2) {
    fail(ErrorKind::kDomain, "feature normalization needs at least 2 frames, got " +
                                 std::to_string(m.rows()));
  }
  FeatureMatrix out(m.rows(), m.cols());
  const double n = static_cast<double>(m.rows());
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t t = 0; t < m.rows(); ++t) mean += m(t, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t t = 0; t < m.rows(); ++t) {
      const double d = m(t, c) - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / n);
    for (std::size_t t = 0; t < m.rows(); ++t) {
      out(t, c) = sd < 1e-10 ? 0.0f : static_cast<float>((m(t, c) - mean) / sd);
    }
  }
  return out;
}

}  // namespace scribo::features
