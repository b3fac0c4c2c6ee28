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
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "scribo/archive.hpp"
#include "scribo/error.hpp"
#include "scribo/utf8.hpp"
#include "scribo/wav.hpp"

namespace scribo::corpus {

namespace fs = std::filesystem;

struct DatasetItem {
  std::string filepath;  // relative to the dataset root
  std::string text;
  double duration = 0.0;  // seconds
  std::optional<std::string> speaker;

  friend bool operator==(const DatasetItem&, const DatasetItem&) = default;
};

/// A reader's output: items with paths relative to `root`.
struct Dataset {
  fs::path root;
  std::vector<DatasetItem> items;
  std::size_t skipped_rows = 0;
  std::vector<std::string> warnings;
};

inline constexpr const char* kManifestHeader = "duration\tfilepath\ttext";
inline constexpr const char* kManifestName = "data.tsv";

inline std::size_t char_count(const std::string& text) { return utf8::decode(text).size(); }

// ---------------------------------------------------------------------------
// Reading

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

inline std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

inline std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const std::string t = trim(s);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline bool getline_lf(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

inline fs::path find_metadata(const fs::path& path, const std::vector<std::string>& preferred) {
  if (fs::is_regular_file(path)) return path;
  if (!fs::is_directory(path)) fail(ErrorKind::kMissing, "no such dataset path " + path.string());
  for (const auto& name : preferred) {
    if (fs::is_regular_file(path / name)) return path / name;
  }
  std::vector<fs::path> tsvs;
  for (const auto& e : fs::directory_iterator(path)) {
    if (e.is_regular_file() && e.path().extension() == ".tsv") tsvs.push_back(e.path());
  }
  if (tsvs.size() == 1) return tsvs.front();
  fail(ErrorKind::kMissing, "no unambiguous metadata .tsv file in " + path.string());
}

inline void fill_duration(Dataset& ds, DatasetItem& item) {
  const fs::path audio = ds.root / item.filepath;
  std::optional<double> d;
  if (fs::exists(audio)) d = wav::probe_duration(audio);
  if (d) {
    item.duration = *d;
  } else {
    ds.warnings.push_back("duration unknown for " + item.filepath);
  }
}

inline Dataset read_commonvoice(const fs::path& path) {
  const fs::path meta = find_metadata(path, {"validated.tsv"});
  std::ifstream in(meta);
  if (!in) fail(ErrorKind::kIo, "cannot open " + meta.string());
  Dataset ds;
  ds.root = meta.parent_path();
  std::string line;
  if (!getline_lf(in, line)) fail(ErrorKind::kParse, meta.string() + ": missing header line");
  const auto header = split_tabs(line);
  auto column = [&](std::initializer_list<const char*> names) -> std::optional<std::size_t> {
    for (const char* n : names) {
      auto it = std::find(header.begin(), header.end(), n);
      if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
    }
    return std::nullopt;
  };
  const auto path_col = column({"path", "filepath"});
  const auto text_col = column({"sentence", "text"});
  const auto speaker_col = column({"client_id", "speaker"});
  const auto duration_col = column({"duration"});
  if (!path_col || !text_col) {
    fail(ErrorKind::kSchema, meta.string() + ": header needs 'path' and 'sentence' columns");
  }
  const bool has_clips = fs::is_directory(ds.root / "clips");
  std::size_t row = 1;
  while (getline_lf(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() <= std::max(*path_col, *text_col) || fields[*path_col].empty()) {
      ++ds.skipped_rows;
      ds.warnings.push_back(meta.filename().string() + ":" + std::to_string(row) +
                            ": missing mandatory column, row skipped");
      continue;
    }
    DatasetItem item;
    item.filepath = fields[*path_col];
    if (has_clips && fs::exists(ds.root / "clips" / item.filepath)) {
      item.filepath = "clips/" + item.filepath;
    }
    item.text = fields[*text_col];
    if (speaker_col && *speaker_col < fields.size() && !fields[*speaker_col].empty()) {
      item.speaker = fields[*speaker_col];
    }
    std::optional<double> d;
    if (duration_col && *duration_col < fields.size()) d = parse_double(fields[*duration_col]);
    if (d && *d >= 0) {
      item.duration = *d;
    } else {
      fill_duration(ds, item);
    }
    ds.items.push_back(std::move(item));
  }
  return ds;
}

inline bool is_audio_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".wav" || ext == ".mp3" || ext == ".flac" || ext == ".ogg" || ext == ".opus";
}

inline Dataset read_folder_txt(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorKind::kMissing, "no such dataset directory " + dir.string());
  Dataset ds;
  ds.root = dir;
  std::vector<fs::path> audio;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && is_audio_extension(e.path())) audio.push_back(e.path());
  }
  std::sort(audio.begin(), audio.end());
  for (const auto& a : audio) {
    fs::path txt = a;
    txt.replace_extension(".txt");
    const std::string rel = a.lexically_relative(dir).generic_string();
    if (!fs::exists(txt)) {
      ++ds.skipped_rows;
      ds.warnings.push_back(rel + ": no transcript file, skipped");
      continue;
    }
    std::ifstream in(txt);
    std::stringstream ss;
    ss << in.rdbuf();
    DatasetItem item;
    item.filepath = rel;
    item.text = trim(ss.str());
    fill_duration(ds, item);
    ds.items.push_back(std::move(item));
  }
  return ds;
}

}  // namespace detail

/// Parses a manifest written by write_manifest().
inline Dataset read_manifest(const fs::path& path) {
  const fs::path meta = detail::find_metadata(path, {kManifestName});
  std::ifstream in(meta);
  if (!in) fail(ErrorKind::kIo, "cannot open " + meta.string());
  Dataset ds;
  ds.root = meta.parent_path();
  std::string line;
  if (!detail::getline_lf(in, line)) fail(ErrorKind::kParse, meta.string() + ": missing header line");
  const auto header = detail::split_tabs(line);
  if (header.size() < 3 || header[0] != "duration" || header[1] != "filepath" || header[2] != "text" ||
      (header.size() == 4 && header[3] != "speaker") || header.size() > 4) {
    fail(ErrorKind::kSchema, meta.string() + ": header must be duration, filepath, text[, speaker]");
  }
  const bool with_speaker = header.size() == 4;
  std::size_t row = 1;
  while (detail::getline_lf(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = detail::split_tabs(line);
    const auto duration = fields.size() >= 3 ? detail::parse_double(fields[0]) : std::nullopt;
    if (fields.size() < 3 || !duration || *duration < 0 || fields[1].empty()) {
      ++ds.skipped_rows;
      ds.warnings.push_back(meta.filename().string() + ":" + std::to_string(row) +
                            ": malformed row skipped");
      continue;
    }
    DatasetItem item{fields[1], fields[2], *duration, std::nullopt};
    if (with_speaker && fields.size() >= 4 && !fields[3].empty()) item.speaker = fields[3];
    ds.items.push_back(std::move(item));
  }
  return ds;
}

inline const std::vector<std::string>& reader_formats() {
  static const std::vector<std::string> kFormats = {"commonvoice-tsv", "folder-txt", "manifest-csv"};
  return kFormats;
}

/// Loads a dataset. `path` is the metadata file or the directory holding it.
inline Dataset read_dataset(const std::string& format, const fs::path& path) {
  if (format == "commonvoice-tsv") return detail::read_commonvoice(path);
  if (format == "folder-txt") return detail::read_folder_txt(path);
  if (format == "manifest-csv") return read_manifest(path);
  fail(ErrorKind::kFormat, "unknown dataset format '" + format + "'");
}

// ---------------------------------------------------------------------------
// Writing

inline std::string format_duration(double seconds) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", seconds);
  return buf;
}

inline std::string sanitize_field(std::string s) {
  for (char& c : s) {
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

/// Writes a manifest for items whose paths are already relative to the
/// manifest's directory.
inline void write_manifest(const std::vector<DatasetItem>& items, const fs::path& path) {
  const bool with_speaker = std::any_of(items.begin(), items.end(),
                                        [](const DatasetItem& i) { return i.speaker.has_value(); });
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << kManifestHeader << (with_speaker ? "\tspeaker" : "") << '\n';
  for (const auto& item : items) {
    out << format_duration(item.duration) << '\t' << sanitize_field(item.filepath) << '\t'
        << sanitize_field(item.text);
    if (with_speaker) out << '\t' << sanitize_field(item.speaker.value_or(""));
    out << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

struct WriteOptions {
  int workers = 1;
  const wav::DecoderRegistry* decoders = nullptr;
  std::string manifest_name = kManifestName;
};

/// Runs fn(i) for i in [0, n) on up to `workers` threads; rethrows the first
/// failure after all threads join.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const auto threads = static_cast<std::size_t>(std::clamp<int>(workers, 1, 256));
  if (threads == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, n); ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Converts every item's audio into `out_dir/audio/` as mono 16 kHz PCM-16
/// and writes a manifest (rows in input order). Returns the manifest path.
inline fs::path write_dataset(const std::vector<DatasetItem>& items, const fs::path& source_root,
                              const std::string& format, const fs::path& out_dir,
                              const WriteOptions& options = {}) {
  if (format != "manifest-csv") fail(ErrorKind::kFormat, "unknown output format '" + format + "'");
  for (const auto& item : items) {
    if (!fs::exists(source_root / item.filepath)) {
      fail(ErrorKind::kMissing, "missing audio " + (source_root / item.filepath).string());
    }
  }
  std::error_code ec;
  fs::create_directories(out_dir / "audio", ec);
  if (ec) fail(ErrorKind::kIo, "destination not writable: " + out_dir.string() + ": " + ec.message());

  std::vector<DatasetItem> out(items);
  std::set<std::string> used;
  for (auto& item : out) {
    std::string stem = fs::path(item.filepath).replace_extension().generic_string();
    std::replace(stem.begin(), stem.end(), '/', '_');
    std::string name = "audio/" + stem + ".wav";
    for (int k = 1; used.count(name); ++k) name = "audio/" + stem + "_" + std::to_string(k) + ".wav";
    used.insert(name);
    item.filepath = name;
    item.text = sanitize_field(item.text);
  }
  parallel_for(items.size(), options.workers, [&](std::size_t i) {
    out[i].duration =
        wav::convert_audio(source_root / items[i].filepath, out_dir / out[i].filepath, options.decoders);
  });
  const fs::path manifest = out_dir / options.manifest_name;
  write_manifest(out, manifest);
  nlohmann::json info = {{"sample_rate", wav::kTargetRate},
                         {"channels", 1},
                         {"encoding", "pcm_s16le"},
                         {"resampler", wav::kResamplerName},
                         {"downmix", "mean"}};
  std::ofstream(out_dir / "conversion.json") << info.dump(2) << '\n';
  return manifest;
}

// ---------------------------------------------------------------------------
// Cleaning

/// Exclusion rules, numbered as reported in CleaningReport.
enum class Metric : int {
  kTooShort = 1,       // duration < 0.5 s
  kTooLong = 2,        // duration > 30 s
  kTooManyChars = 3,   // more than 512 characters
  kTooFast = 4,        // chars/second > 2 x average
  kTooSlow = 5,        // chars/second < 1/3
  kSlowAndLong = 6,    // chars/second < average / 3 and duration > average duration / 5
};

struct CleaningThresholds {
  double min_duration = 0.5;
  double max_duration = 30.0;
  std::size_t max_chars = 512;
  double fast_factor = 2.0;
  double min_cps = 1.0 / 3.0;
  double slow_cps_divisor = 3.0;
  double slow_duration_divisor = 5.0;
};

struct Exclusion {
  DatasetItem item;
  int metric = 0;
};

struct CleaningReport {
  std::vector<DatasetItem> kept;
  std::vector<Exclusion> excluded;
  double average_cps = 0.0;
  double average_duration = 0.0;
};

/// Applies the six exclusion metrics. Both averages are taken once over the
/// whole input (chars/second over items with positive duration) before any
/// item is dropped. Each excluded item carries the lowest metric that fired.
inline CleaningReport clean_corpus(const std::vector<DatasetItem>& items,
                                   const CleaningThresholds& th = {}) {
  CleaningReport report;
  std::vector<std::size_t> chars(items.size());
  double cps_sum = 0.0, dur_sum = 0.0;
  std::size_t cps_n = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    chars[i] = char_count(items[i].text);
    dur_sum += items[i].duration;
    if (items[i].duration > 0) {
      cps_sum += static_cast<double>(chars[i]) / items[i].duration;
      ++cps_n;
    }
  }
  report.average_cps = cps_n ? cps_sum / static_cast<double>(cps_n) : 0.0;
  report.average_duration = items.empty() ? 0.0 : dur_sum / static_cast<double>(items.size());

  for (std::size_t i = 0; i < items.size(); ++i) {
    const double d = items[i].duration;
    int metric = 0;
    if (d < th.min_duration) {
      metric = 1;
    } else if (d > th.max_duration) {
      metric = 2;
    } else if (chars[i] > th.max_chars) {
      metric = 3;
    } else {
      const double cps = static_cast<double>(chars[i]) / d;
      if (cps > th.fast_factor * report.average_cps) {
        metric = 4;
      } else if (cps < th.min_cps) {
        metric = 5;
      } else if (cps < report.average_cps / th.slow_cps_divisor &&
                 d > report.average_duration / th.slow_duration_divisor) {
        metric = 6;
      }
    }
    if (metric) {
      report.excluded.push_back({items[i], metric});
    } else {
      report.kept.push_back(items[i]);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Statistics

struct CorpusStats {
  std::size_t item_count = 0;
  double total_duration = 0.0;
  double mean_chars_per_second = 0.0;
  double mean_duration = 0.0;
  std::vector<std::pair<std::string, std::size_t>> top_speakers;
};

inline CorpusStats compute_stats(const std::vector<DatasetItem>& items) {
  CorpusStats s;
  s.item_count = items.size();
  double cps_sum = 0.0, positive_dur = 0.0;
  std::size_t positive = 0;
  std::map<std::string, std::size_t> speakers;
  for (const auto& item : items) {
    s.total_duration += item.duration;
    if (item.duration > 0) {
      ++positive;
      positive_dur += item.duration;
      cps_sum += static_cast<double>(char_count(item.text)) / item.duration;
    }
    if (item.speaker) ++speakers[*item.speaker];
  }
  if (positive) {
    s.mean_chars_per_second = cps_sum / static_cast<double>(positive);
    s.mean_duration = positive_dur / static_cast<double>(positive);
  }
  s.top_speakers.assign(speakers.begin(), speakers.end());
  std::stable_sort(s.top_speakers.begin(), s.top_speakers.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return s;
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitPolicy {
  std::vector<std::pair<std::string, double>> fractions;  // partition name -> share
  std::uint64_t seed = 0;
  std::optional<std::string> key;  // "speaker" keeps each key value in one partition
};

struct Partition {
  std::string name;
  std::vector<DatasetItem> items;
};

namespace detail {

/// Largest-remainder apportionment of n units; ties go to the earlier share.
inline std::vector<std::size_t> apportion(std::size_t n, const std::vector<double>& shares) {
  std::vector<std::size_t> counts(shares.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    const double exact = shares[i] * static_cast<double>(n);
    // Shares like 0.1 * 10 land a hair off the integer; snap those.
    double whole = std::floor(exact + 1e-9);
    counts[i] = static_cast<std::size_t>(whole);
    assigned += counts[i];
    remainders.emplace_back(exact - whole, i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n && k < remainders.size(); ++k, ++assigned) {
    ++counts[remainders[k].second];
  }
  while (assigned > n) {  // only reachable through the snapping above
    for (std::size_t i = counts.size(); i-- > 0 && assigned > n;) {
      if (counts[i]) {
        --counts[i];
        --assigned;
      }
    }
  }
  return counts;
}

/// Fisher-Yates with raw mt19937_64 draws; the standard distributions are
/// implementation-defined, which would make splits differ across toolchains.
template <typename T>
void seeded_shuffle(std::vector<T>& v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

inline std::optional<std::string> key_of(const DatasetItem& item, const std::string& key) {
  if (key == "speaker") return item.speaker;
  fail(ErrorKind::kDomain, "unsupported split key '" + key + "' (supported: speaker)");
}

}  // namespace detail

/// Random or key-grouped split. Items keep their input order inside each
/// partition; the same seed always yields the same partitions.
inline std::vector<Partition> split_dataset(const std::vector<DatasetItem>& items,
                                            const SplitPolicy& policy) {
  if (policy.fractions.empty()) fail(ErrorKind::kDomain, "split needs at least one partition");
  double total = 0.0;
  std::vector<double> shares;
  std::set<std::string> names;
  for (const auto& [name, f] : policy.fractions) {
    if (f < 0) fail(ErrorKind::kDomain, "negative fraction for partition '" + name + "'");
    if (!names.insert(name).second) fail(ErrorKind::kDomain, "duplicate partition '" + name + "'");
    total += f;
    shares.push_back(f);
  }
  if (std::abs(total - 1.0) > 1e-9) {
    fail(ErrorKind::kDomain, "fractions must sum to 1, got " + std::to_string(total));
  }
  std::vector<std::size_t> assignment(items.size());
  const std::size_t parts = shares.size();

  if (!policy.key) {
    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    detail::seeded_shuffle(order, policy.seed);
    const auto counts = detail::apportion(items.size(), shares);
    std::size_t pos = 0;
    for (std::size_t p = 0; p < parts; ++p) {
      for (std::size_t k = 0; k < counts[p]; ++k) assignment[order[pos++]] = p;
    }
  } else {
    std::map<std::string, std::vector<std::size_t>> groups;
    std::vector<std::string> missing;
    for (std::size_t i = 0; i < items.size(); ++i) {
      auto value = detail::key_of(items[i], *policy.key);
      if (!value) {
        missing.push_back(items[i].filepath);
        continue;
      }
      groups[*value].push_back(i);
    }
    if (!missing.empty()) {
      std::string list;
      for (std::size_t k = 0; k < missing.size() && k < 20; ++k) list += (k ? ", " : "") + missing[k];
      if (missing.size() > 20) list += ", ...";
      fail(ErrorKind::kMissing, std::to_string(missing.size()) + " item(s) lack key '" +
                                    *policy.key + "': " + list);
    }
    std::vector<const std::vector<std::size_t>*> order;
    for (const auto& [k, members] : groups) order.push_back(&members);
    detail::seeded_shuffle(order, policy.seed);
    const auto targets = detail::apportion(items.size(), shares);
    std::vector<std::size_t> filled(parts, 0);
    for (const auto* members : order) {
      std::size_t best = 0;
      double best_deficit = -1e300;
      for (std::size_t p = 0; p < parts; ++p) {
        const double deficit = static_cast<double>(targets[p]) - static_cast<double>(filled[p]);
        if (deficit > best_deficit) {
          best_deficit = deficit;
          best = p;
        }
      }
      for (std::size_t i : *members) assignment[i] = best;
      filled[best] += members->size();
    }
  }

  std::vector<Partition> out(parts);
  for (std::size_t p = 0; p < parts; ++p) out[p].name = policy.fractions[p].first;
  for (std::size_t i = 0; i < items.size(); ++i) out[assignment[i]].items.push_back(items[i]);
  return out;
}

}  // namespace scribo::corpus
