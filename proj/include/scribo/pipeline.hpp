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
#include <chrono>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "scribo/corpus.hpp"
#include "scribo/ctc.hpp"
#include "scribo/features.hpp"
#include "scribo/lm.hpp"
#include "scribo/net.hpp"

namespace scribo::pipeline {

struct RtfReport {
  double clip_duration = 0.0;  // seconds of audio
  double wall_time = 0.0;      // seconds of processing
  double rtf = 0.0;            // wall_time / clip_duration
  std::map<std::string, double> stage_breakdown;  // features, forward, decode

  double stage_total() const {
    return std::accumulate(stage_breakdown.begin(), stage_breakdown.end(), 0.0,
                           [](double acc, const auto& kv) { return acc + kv.second; });
  }
};

inline double real_time_factor(double wall_time, double clip_duration) {
  if (!(clip_duration > 0)) fail(ErrorKind::kDomain, "real-time factor is undefined for zero-length audio");
  return wall_time / clip_duration;
}

struct DecodeOptions {
  bool beam = false;  // greedy when false
  ctc::DecodeParams params;
  std::optional<double> chunk_seconds;  // streaming when set
  std::optional<double> context_seconds;
};

struct Transcript {
  std::string text;
  RtfReport report;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Runs fn and prefixes any library error with the stage name.
template <typename Fn>
auto in_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(stage) + ": " + e.what());
  }
}

}  // namespace detail

/// Features, network and decoder over one clip. `started` marks the start of
/// the wall-clock measurement so callers can include loading.
inline Transcript transcribe(const net::LoadedModel& model, const features::AudioClip& clip,
                             const DecodeOptions& options = {},
                             std::optional<detail::Clock::time_point> started = std::nullopt) {
  const auto t0 = started.value_or(detail::Clock::now());
  if (clip.samples.empty()) fail(ErrorKind::kDomain, "zero-length audio has no transcript");
  Transcript out;
  out.report.clip_duration = clip.duration();

  auto t = detail::Clock::now();
  const auto x = detail::in_stage("features", [&] {
    return features::normalize_features(features::logmel(clip, model.features));
  });
  out.report.stage_breakdown["features"] = detail::seconds_since(t);

  t = detail::Clock::now();
  const auto logits = detail::in_stage("forward", [&] {
    if (!options.chunk_seconds) return net::forward(model.config, model.weights, x);
    const auto plan = net::plan_streaming(model.config, model.features, *options.chunk_seconds,
                                          options.context_seconds);
    return ctc::log_softmax(net::forward_logits_chunked(model.config, model.weights, x, plan));
  });
  out.report.stage_breakdown["forward"] = detail::seconds_since(t);

  t = detail::Clock::now();
  out.text = detail::in_stage("decode", [&] {
    if (!options.beam) return ctc::greedy_decode(logits, model.alphabet);
    return ctc::beam_decode(logits, model.alphabet, options.params).front().text;
  });
  out.report.stage_breakdown["decode"] = detail::seconds_since(t);

  out.report.wall_time = detail::seconds_since(t0);
  out.report.rtf = real_time_factor(out.report.wall_time, out.report.clip_duration);
  return out;
}

/// Loads the WAV inside the measured wall time.
inline Transcript transcribe(const net::LoadedModel& model, const std::filesystem::path& wav_path,
                             const DecodeOptions& options = {}) {
  const auto t0 = detail::Clock::now();
  const auto clip = detail::in_stage("load", [&] { return features::load_wav(wav_path); });
  return transcribe(model, clip, options, t0);
}

struct Measurement {
  std::string filepath;
  int repetition = 0;
  RtfReport report;
};

struct BenchReport {
  std::vector<Measurement> measurements;
  double mean_rtf = 0.0;
  double median_rtf = 0.0;
  RtfReport aggregate;  // summed durations, wall times and stages
};

inline double median(std::vector<double> values) {
  if (values.empty()) fail(ErrorKind::kDomain, "median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

inline BenchReport summarize(std::vector<Measurement> measurements) {
  if (measurements.empty()) fail(ErrorKind::kDomain, "no measurements to summarize");
  BenchReport out;
  std::vector<double> rtfs;
  for (const auto& m : measurements) {
    rtfs.push_back(m.report.rtf);
    out.aggregate.clip_duration += m.report.clip_duration;
    out.aggregate.wall_time += m.report.wall_time;
    for (const auto& [stage, s] : m.report.stage_breakdown) out.aggregate.stage_breakdown[stage] += s;
  }
  out.mean_rtf = std::accumulate(rtfs.begin(), rtfs.end(), 0.0) / static_cast<double>(rtfs.size());
  out.median_rtf = median(rtfs);
  out.aggregate.rtf = real_time_factor(out.aggregate.wall_time, out.aggregate.clip_duration);
  out.measurements = std::move(measurements);
  return out;
}

/// Transcribes every manifest item `repetitions` times after one excluded
/// warm-up run on the first item. Measurements are ordered by item, then
/// repetition.
inline BenchReport bench(const net::LoadedModel& model, const std::vector<corpus::DatasetItem>& items,
                         const std::filesystem::path& root, int repetitions, const DecodeOptions& options = {},
                         int workers = 1) {
  if (items.empty()) fail(ErrorKind::kDomain, "benchmark manifest is empty");
  if (repetitions < 1) fail(ErrorKind::kDomain, "repetitions must be >= 1");
  auto path_of = [&](const corpus::DatasetItem& item) {
    const std::filesystem::path p(item.filepath);
    return p.is_absolute() ? p : root / p;
  };
  transcribe(model, path_of(items.front()), options);
  const auto reps = static_cast<std::size_t>(repetitions);
  std::vector<Measurement> measurements(items.size() * reps);
  corpus::parallel_for(measurements.size(), workers, [&](std::size_t i) {
    const auto& item = items[i / reps];
    measurements[i] = {item.filepath, static_cast<int>(i % reps), transcribe(model, path_of(item), options).report};
  });
  return summarize(std::move(measurements));
}

}  // namespace scribo::pipeline
