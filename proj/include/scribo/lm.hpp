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
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "scribo/error.hpp"

namespace scribo::lm {

using TokenId = std::uint32_t;
inline constexpr TokenId kNoToken = std::numeric_limits<TokenId>::max();
inline constexpr double kDefaultOovFloor = -8.0;

inline constexpr std::string_view kBos = "<s>";
inline constexpr std::string_view kEos = "</s>";
inline constexpr std::string_view kUnk = "<unk>";

struct NgramEntry {
  double log10_prob = 0.0;
  std::optional<double> backoff;

  friend bool operator==(const NgramEntry&, const NgramEntry&) = default;
};

struct LmScore {
  double log10_total = 0.0;
  std::size_t oov_count = 0;
};

struct WordScore {
  double log10_prob = 0.0;
  bool oov = false;
};

namespace detail {

struct KeyHash {
  std::size_t operator()(const std::vector<TokenId>& key) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (TokenId t : key) {
      h ^= t;
      h *= 1099511628211ull;
      h ^= h >> 29;
    }
    return static_cast<std::size_t>(h);
  }
};

inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace detail

/// Backoff n-gram model. Immutable once built; all queries are const and
/// thread-safe.
class NgramModel {
 public:
  using Key = std::vector<TokenId>;
  using Table = std::unordered_map<Key, NgramEntry, detail::KeyHash>;

  NgramModel() = default;
  explicit NgramModel(int order) : tables_(static_cast<std::size_t>(order)) {
    if (order < 1) fail(ErrorKind::kDomain, "n-gram order must be at least 1");
  }

  int order() const { return static_cast<int>(tables_.size()); }
  double oov_floor() const { return oov_floor_; }
  void set_oov_floor(double floor) { oov_floor_ = floor; }

  const std::vector<std::string>& vocab() const { return vocab_; }
  std::size_t size(int k) const { return tables_.at(static_cast<std::size_t>(k - 1)).size(); }
  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& t : tables_) n += t.size();
    return n;
  }
  const Table& table(int k) const { return tables_.at(static_cast<std::size_t>(k - 1)); }

  /// Id of a known token, else kNoToken.
  TokenId find_token(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    return it == ids_.end() ? kNoToken : it->second;
  }
  /// Id used for scoring: unknown tokens route to <unk> when the model has it.
  TokenId lookup(std::string_view token) const {
    const TokenId id = find_token(token);
    return id == kNoToken ? unk_ : id;
  }
  bool has_unk() const { return unk_ != kNoToken; }
  const std::string& token(TokenId id) const { return vocab_.at(id); }

  TokenId intern(std::string_view token) {
    auto [it, inserted] = ids_.emplace(std::string(token), static_cast<TokenId>(vocab_.size()));
    if (inserted) {
      vocab_.emplace_back(token);
      if (token == kUnk) unk_ = it->second;
    }
    return it->second;
  }

  /// Adds an entry; returns false if it already existed.
  bool insert(Key key, NgramEntry entry) {
    if (key.empty() || key.size() > tables_.size()) {
      fail(ErrorKind::kDomain, "n-gram length outside model order");
    }
    auto& t = tables_[key.size() - 1];
    return t.emplace(std::move(key), entry).second;
  }
  void erase(const Key& key) { tables_.at(key.size() - 1).erase(key); }

  const NgramEntry* find(const Key& key) const {
    if (key.empty() || key.size() > tables_.size()) return nullptr;
    const auto& t = tables_[key.size() - 1];
    auto it = t.find(key);
    return it == t.end() ? nullptr : &it->second;
  }

  /// log10 P(word | history) with Katz backoff; only the last order-1
  /// history tokens matter. kNoToken entries never match a stored n-gram.
  double score_ids(std::span<const TokenId> history, TokenId word) const {
    if (word == kNoToken || !find(Key{word})) return oov_floor_;
    const std::size_t max_ctx = std::min(history.size(), tables_.size() - 1);
    double acc = 0.0;
    Key key;
    for (std::size_t len = max_ctx; len > 0; --len) {
      key.assign(history.end() - static_cast<std::ptrdiff_t>(len), history.end());
      key.push_back(word);
      if (const NgramEntry* e = find(key)) return acc + e->log10_prob;
      key.pop_back();
      if (const NgramEntry* ctx = find(key); ctx && ctx->backoff) acc += *ctx->backoff;
    }
    return acc + find(Key{word})->log10_prob;
  }

  WordScore score_word(std::span<const std::string> history, std::string_view word) const {
    std::vector<TokenId> ids;
    const std::size_t keep = std::min(history.size(), tables_.size() - 1);
    for (std::size_t i = history.size() - keep; i < history.size(); ++i) ids.push_back(lookup(history[i]));
    const bool oov = find_token(word) == kNoToken;
    return {score_ids(ids, lookup(word)), oov};
  }

  /// Sum of word scores. Markers put <s> in the initial history (never
  /// scored) and score a closing </s>.
  LmScore score_sequence(std::span<const std::string> words, bool with_markers) const {
    LmScore s;
    std::vector<TokenId> history;
    if (with_markers) history.push_back(lookup(kBos));
    auto step = [&](std::string_view w) {
      const TokenId id = lookup(w);
      if (find_token(w) == kNoToken) ++s.oov_count;
      s.log10_total += score_ids(history, id);
      history.push_back(id);
    };
    for (const auto& w : words) step(w);
    if (with_markers) step(kEos);
    return s;
  }

  /// 10^(-total / tokens); the closing </s> counts as a token with markers.
  double perplexity(std::span<const std::string> words, bool with_markers) const {
    if (words.empty()) fail(ErrorKind::kDomain, "perplexity of an empty sequence");
    const LmScore s = score_sequence(words, with_markers);
    const double tokens = static_cast<double>(words.size() + (with_markers ? 1 : 0));
    return std::pow(10.0, -s.log10_total / tokens);
  }

  /// Entries of order k as token strings, sorted lexicographically.
  std::vector<std::pair<std::vector<std::string>, NgramEntry>> sorted_entries(int k) const {
    std::vector<std::pair<std::vector<std::string>, NgramEntry>> out;
    for (const auto& [key, e] : table(k)) {
      std::vector<std::string> words;
      for (TokenId t : key) words.push_back(vocab_[t]);
      out.emplace_back(std::move(words), e);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
  }

  /// Same order and identical entries, independent of token id assignment.
  bool same_entries(const NgramModel& other) const {
    if (order() != other.order()) return false;
    for (int k = 1; k <= order(); ++k) {
      if (sorted_entries(k) != other.sorted_entries(k)) return false;
    }
    return true;
  }

  /// Reports the first entries whose tokens or (k-1)-prefix are missing.
  std::vector<std::string> consistency_violations(std::size_t limit = 10) const {
    std::vector<std::string> problems;
    for (int k = 2; k <= order() && problems.size() < limit; ++k) {
      for (const auto& [key, e] : table(k)) {
        Key prefix(key.begin(), key.end() - 1);
        if (!find(prefix)) {
          std::string text;
          for (TokenId t : key) text += (text.empty() ? "" : " ") + vocab_[t];
          problems.push_back(std::to_string(k) + "-gram '" + text + "' lacks its prefix");
          if (problems.size() >= limit) break;
        }
      }
    }
    return problems;
  }

 private:
  std::vector<Table> tables_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, TokenId> ids_;
  TokenId unk_ = kNoToken;
  double oov_floor_ = kDefaultOovFloor;
};

// ---------------------------------------------------------------------------
// ARPA text format

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline std::optional<double> parse_number(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || std::isnan(v)) return std::nullopt;
  return v;
}

inline std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

}  // namespace detail

inline NgramModel parse_arpa(std::istream& in, const std::string& name = "<arpa>") {
  std::string raw;
  std::size_t line_no = 0;
  auto where = [&] { return name + ":" + std::to_string(line_no) + ": "; };
  auto next = [&](std::string_view& line) {
    if (!std::getline(in, raw)) return false;
    ++line_no;
    line = detail::strip(raw);
    return true;
  };

  std::string_view line;
  bool found_data = false;
  while (next(line)) {
    if (line == "\\data\\") {
      found_data = true;
      break;
    }
  }
  if (!found_data) fail(ErrorKind::kParse, name + ": missing \\data\\ header");

  std::vector<std::size_t> declared;
  while (next(line)) {
    if (line.empty()) {
      if (declared.empty()) continue;
      break;
    }
    if (line.rfind("ngram ", 0) != 0) fail(ErrorKind::kParse, where() + "expected 'ngram k=count'");
    const auto eq = line.find('=');
    const auto k = eq == std::string_view::npos ? std::nullopt : detail::parse_number(detail::strip(line.substr(6, eq - 6)));
    const auto count = eq == std::string_view::npos ? std::nullopt : detail::parse_number(detail::strip(line.substr(eq + 1)));
    if (!k || !count || *k != static_cast<double>(declared.size() + 1) || *count < 0) {
      fail(ErrorKind::kParse, where() + "malformed or out-of-order ngram count line");
    }
    declared.push_back(static_cast<std::size_t>(*count));
  }
  if (declared.empty()) fail(ErrorKind::kParse, name + ": no ngram counts in \\data\\ section");

  NgramModel model(static_cast<int>(declared.size()));
  const int order = model.order();
  int section = 0;
  bool ended = false;
  std::vector<std::size_t> parsed(declared.size(), 0);
  while (next(line)) {
    if (line.empty()) continue;
    if (line == "\\end\\") {
      ended = true;
      break;
    }
    if (line.front() == '\\') {
      const std::string expected = "\\" + std::to_string(section + 1) + "-grams:";
      if (line != expected) fail(ErrorKind::kParse, where() + "expected section " + expected);
      ++section;
      if (section > order) fail(ErrorKind::kParse, where() + "section beyond declared order");
      continue;
    }
    if (section == 0) fail(ErrorKind::kParse, where() + "entry outside any n-gram section");
    const auto fields = detail::split_ws(line);
    const auto k = static_cast<std::size_t>(section);
    if (fields.size() != k + 1 && fields.size() != k + 2) {
      fail(ErrorKind::kParse, where() + "expected " + std::to_string(k) + " tokens");
    }
    const auto prob = detail::parse_number(fields[0]);
    if (!prob) fail(ErrorKind::kParse, where() + "non-numeric probability '" + std::string(fields[0]) + "'");
    if (*prob > 0) fail(ErrorKind::kParse, where() + "positive log10 probability");
    NgramEntry entry{*prob, std::nullopt};
    if (fields.size() == k + 2) {
      if (section == order) fail(ErrorKind::kParse, where() + "backoff weight on highest order");
      const auto bo = detail::parse_number(fields[k + 1]);
      if (!bo) fail(ErrorKind::kParse, where() + "non-numeric backoff '" + std::string(fields[k + 1]) + "'");
      entry.backoff = *bo;
    }
    NgramModel::Key key;
    for (std::size_t i = 1; i <= k; ++i) {
      if (section == 1) {
        key.push_back(model.intern(fields[i]));
      } else {
        const TokenId id = model.find_token(fields[i]);
        if (id == kNoToken) {
          fail(ErrorKind::kSchema, where() + "token '" + std::string(fields[i]) + "' has no unigram");
        }
        key.push_back(id);
      }
    }
    if (!model.insert(std::move(key), entry)) fail(ErrorKind::kParse, where() + "duplicate n-gram");
    ++parsed[k - 1];
  }
  if (!ended) fail(ErrorKind::kParse, name + ": missing \\end\\ marker");
  if (section != order) {
    fail(ErrorKind::kParse, name + ": missing \\" + std::to_string(section + 1) + "-grams: section");
  }
  for (std::size_t k = 0; k < declared.size(); ++k) {
    if (parsed[k] != declared[k]) {
      fail(ErrorKind::kParse, name + ": header declares " + std::to_string(declared[k]) + " " +
                                  std::to_string(k + 1) + "-grams, found " + std::to_string(parsed[k]));
    }
  }
  if (auto problems = model.consistency_violations(); !problems.empty()) {
    std::string msg = name + ": inconsistent model:";
    for (const auto& p : problems) msg += " " + p + ";";
    fail(ErrorKind::kSchema, msg);
  }
  return model;
}

inline NgramModel parse_arpa(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kMissing, "cannot open language model " + path.string());
  return parse_arpa(in, path.string());
}

inline NgramModel parse_arpa_string(const std::string& text) {
  std::istringstream in(text);
  return parse_arpa(in);
}

/// Writes ARPA text, sections ordered 1..N, entries sorted lexicographically,
/// numbers in shortest round-trip form.
inline void write_arpa(const NgramModel& model, std::ostream& out) {
  out << "\\data\\\n";
  for (int k = 1; k <= model.order(); ++k) out << "ngram " << k << "=" << model.size(k) << "\n";
  for (int k = 1; k <= model.order(); ++k) {
    out << "\n\\" << k << "-grams:\n";
    for (const auto& [words, e] : model.sorted_entries(k)) {
      out << detail::format_double(e.log10_prob) << '\t';
      for (std::size_t i = 0; i < words.size(); ++i) out << (i ? " " : "") << words[i];
      if (e.backoff) out << '\t' << detail::format_double(*e.backoff);
      out << '\n';
    }
  }
  out << "\n\\end\\\n";
}

inline std::string to_arpa_string(const NgramModel& model) {
  std::ostringstream out;
  write_arpa(model, out);
  return out.str();
}

inline void write_arpa(const NgramModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  write_arpa(model, out);
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Pruning

/// Drops higher-order entries until at most `max_ngrams` remain. Candidates
/// go lowest log10 probability first, ties to the higher order, then to the
/// lexicographically smaller token sequence. Dropping an n-gram drops every
/// stored extension of it. Unigrams always stay; backoff weights are kept
/// as stored.
inline NgramModel prune_model(const NgramModel& model, std::size_t max_ngrams) {
  if (max_ngrams < model.size(1)) {
    fail(ErrorKind::kDomain, "cannot prune to " + std::to_string(max_ngrams) + " entries: model has " +
                                 std::to_string(model.size(1)) + " unigrams");
  }
  NgramModel out = model;
  std::size_t total = out.total_size();
  if (total <= max_ngrams) return out;

  struct Candidate {
    double prob;
    int order;
    std::vector<std::string> words;
    NgramModel::Key key;
  };
  std::vector<Candidate> candidates;
  std::unordered_map<NgramModel::Key, std::vector<NgramModel::Key>, detail::KeyHash> extensions;
  for (int k = 2; k <= model.order(); ++k) {
    for (const auto& [key, e] : model.table(k)) {
      std::vector<std::string> words;
      for (TokenId t : key) words.push_back(model.token(t));
      candidates.push_back({e.log10_prob, k, std::move(words), key});
      extensions[NgramModel::Key(key.begin(), key.end() - 1)].push_back(key);
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.prob != b.prob) return a.prob < b.prob;
    if (a.order != b.order) return a.order > b.order;
    return a.words < b.words;
  });
  std::unordered_set<NgramModel::Key, detail::KeyHash> removed;
  std::vector<NgramModel::Key> stack;
  for (const auto& c : candidates) {
    if (total <= max_ngrams) break;
    if (removed.count(c.key)) continue;
    stack.push_back(c.key);
    while (!stack.empty()) {
      NgramModel::Key key = std::move(stack.back());
      stack.pop_back();
      if (!removed.insert(key).second) continue;
      out.erase(key);
      --total;
      if (auto it = extensions.find(key); it != extensions.end()) {
        for (const auto& ext : it->second) stack.push_back(ext);
      }
    }
  }
  return out;
}

}  // namespace scribo::lm
