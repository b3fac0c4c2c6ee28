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
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "scribo/error.hpp"
#include "scribo/lm.hpp"
#include "scribo/matrix.hpp"
#include "scribo/textnorm.hpp"

namespace scribo::ctc {

/// Per-frame natural-log probabilities; rows are frames, the last column is
/// the blank.
using LogitMatrix = Matrix<float>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

/// Row-wise log-softmax.
inline LogitMatrix log_softmax(const Matrix<float>& raw) {
  LogitMatrix out(raw.rows(), raw.cols());
  for (std::size_t t = 0; t < raw.rows(); ++t) {
    const auto in = raw.row(t);
    if (in.empty()) continue;
    const float peak = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (float v : in) sum += std::exp(static_cast<double>(v) - peak);
    const double log_z = peak + std::log(sum);
    auto o = out.row(t);
    for (std::size_t c = 0; c < in.size(); ++c) o[c] = static_cast<float>(in[c] - log_z);
  }
  return out;
}

/// Largest |sum(exp(row)) - 1| over all rows.
inline double max_normalization_error(const LogitMatrix& logits) {
  double worst = 0.0;
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    double sum = 0.0;
    for (float v : logits.row(t)) sum += std::exp(static_cast<double>(v));
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

/// Merges adjacent repeats, then drops blanks.
inline std::vector<int> collapse(std::span<const int> path, int blank) {
  std::vector<int> out;
  int prev = -1;
  for (int label : path) {
    if (label != prev && label != blank) out.push_back(label);
    prev = label;
  }
  return out;
}

inline std::string labels_to_text(std::span<const int> labels, const textnorm::AlphabetSpec& alphabet) {
  std::string text;
  for (int l : labels) text += alphabet.symbol(static_cast<std::size_t>(l));
  return text;
}

inline void check_width(const LogitMatrix& logits, const textnorm::AlphabetSpec& alphabet) {
  if (logits.cols() != alphabet.size() + 1) {
    fail(ErrorKind::kShape, "logit width " + std::to_string(logits.cols()) + " does not match alphabet size " +
                                std::to_string(alphabet.size()) + " + blank");
  }
}

/// Per-frame argmax path; the lower index wins ties.
inline std::vector<int> greedy_path(const LogitMatrix& logits) {
  std::vector<int> path(logits.rows());
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    const auto row = logits.row(t);
    path[t] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return path;
}

inline std::string greedy_decode(const LogitMatrix& logits, const textnorm::AlphabetSpec& alphabet) {
  check_width(logits, alphabet);
  return labels_to_text(collapse(greedy_path(logits), alphabet.blank_index()), alphabet);
}

struct DecodeParams {
  int beam_width = 256;
  double alpha = 0.8;
  double beta = 1.0;
  const lm::NgramModel* lm = nullptr;
};

struct Hypothesis {
  std::string text;
  std::vector<int> labels;
  double acoustic_log = 0.0;
  double lm_log10 = 0.0;
  int word_count = 0;
  double combined = 0.0;
};

namespace detail {

class PrefixSearch {
 public:
  PrefixSearch(const LogitMatrix& logits, const textnorm::AlphabetSpec& alphabet, const DecodeParams& params)
      : logits_(logits), alphabet_(alphabet), params_(params) {
    if (params.beam_width < 1) fail(ErrorKind::kDomain, "beam width must be at least 1");
    check_width(logits, alphabet);
    const auto space = alphabet.index_of(U' ');
    if (params.lm && !space) fail(ErrorKind::kDomain, "LM fusion needs a space symbol in the alphabet");
    space_ = space.value_or(-1);
    blank_ = alphabet.blank_index();
    fuse_ = params.lm && (params.alpha != 0.0 || params.beta != 0.0);
    Node root;
    if (fuse_) root.history.push_back(params.lm->lookup(lm::kBos));
    nodes_.push_back(std::move(root));
  }

  std::vector<Hypothesis> run() {
    std::vector<Beam> beams = {{0, 0.0, kNegInf}};
    const int vocab = blank_;
    for (std::size_t t = 0; t < logits_.rows(); ++t) {
      const auto lp = logits_.row(t);
      cands_.clear();
      index_.clear();
      for (const Beam& b : beams) {
        const double total = log_add(b.pb, b.pnb);
        const Node& x = nodes_[static_cast<std::size_t>(b.node)];
        cand_for_node(b.node).pb_add(total + lp[static_cast<std::size_t>(blank_)]);
        for (int c = 0; c < vocab; ++c) {
          const double l = lp[static_cast<std::size_t>(c)];
          if (b.node != 0 && c == x.label) {
            cand_for_node(b.node).pnb_add(b.pnb + l);
            cand_for_extension(b.node, c).pnb_add(b.pb + l);
          } else {
            cand_for_extension(b.node, c).pnb_add(total + l);
          }
        }
      }
      beams = select();
    }
    return finish(beams);
  }

 private:
  struct Node {
    int parent = -1;
    int label = -1;
    int depth = 0;
    double lm = 0.0;
    int words = 0;
    std::string partial;
    std::vector<lm::TokenId> history;
    std::optional<double> word_end_lm;  // lm after closing `partial`
  };
  struct Beam {
    int node;
    double pb, pnb;
  };
  struct Cand {
    int node = -1;  // materialized node, or -1 for a pending (parent, label)
    int parent = -1;
    int label = -1;
    double pb = kNegInf, pnb = kNegInf;
    double score = 0.0;
    void pb_add(double v) { pb = log_add(pb, v); }
    void pnb_add(double v) { pnb = log_add(pnb, v); }
  };

  static std::uint64_t child_key(int parent, int label) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(parent)) << 16) |
           static_cast<std::uint16_t>(label);
  }

  Cand& cand_for_node(int node) {
    auto [it, inserted] = index_.emplace(static_cast<std::uint64_t>(node), cands_.size());
    if (inserted) cands_.push_back(Cand{node, -1, -1});
    return cands_[it->second];
  }

  Cand& cand_for_extension(int parent, int label) {
    if (auto it = children_.find(child_key(parent, label)); it != children_.end()) {
      return cand_for_node(it->second);
    }
    const std::uint64_t key = (1ull << 63) | child_key(parent, label);
    auto [it, inserted] = index_.emplace(key, cands_.size());
    if (inserted) cands_.push_back(Cand{-1, parent, label});
    return cands_[it->second];
  }

  double word_end_lm(Node& n) {
    if (!n.word_end_lm) {
      const auto& model = *params_.lm;
      const std::size_t keep = std::min<std::size_t>(n.history.size(), static_cast<std::size_t>(model.order() - 1));
      n.word_end_lm = n.lm + model.score_ids(std::span(n.history).last(keep), model.lookup(n.partial));
    }
    return *n.word_end_lm;
  }

  /// (lm_log10, words) of the prefix a candidate stands for.
  std::pair<double, int> fusion_state(const Cand& c) {
    if (c.node >= 0) {
      const Node& n = nodes_[static_cast<std::size_t>(c.node)];
      return {n.lm, n.words};
    }
    Node& p = nodes_[static_cast<std::size_t>(c.parent)];
    if (fuse_ && c.label == space_ && !p.partial.empty()) return {word_end_lm(p), p.words + 1};
    return {p.lm, p.words};
  }

  double fused(double acoustic, double lm_log10, int words) const {
    if (!fuse_) return acoustic;
    return acoustic + params_.alpha * std::log(10.0) * lm_log10 + params_.beta * words;
  }

  int depth_of(const Cand& c) const {
    return c.node >= 0 ? nodes_[static_cast<std::size_t>(c.node)].depth
                       : nodes_[static_cast<std::size_t>(c.parent)].depth + 1;
  }

  std::vector<int> labels_of(int node) const {
    std::vector<int> out;
    for (int n = node; n > 0; n = nodes_[static_cast<std::size_t>(n)].parent) {
      out.push_back(nodes_[static_cast<std::size_t>(n)].label);
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  std::vector<int> labels_of(const Cand& c) const {
    if (c.node >= 0) return labels_of(c.node);
    auto out = labels_of(c.parent);
    out.push_back(c.label);
    return out;
  }

  /// Higher score first; exact ties go to the shorter, then the
  /// lexicographically smaller label sequence.
  bool better(const Cand& a, const Cand& b) const {
    if (a.score != b.score) return a.score > b.score;
    const int da = depth_of(a), db = depth_of(b);
    if (da != db) return da < db;
    return labels_of(a) < labels_of(b);
  }

  int materialize(const Cand& c) {
    if (c.node >= 0) return c.node;
    Node n;
    Node& p = nodes_[static_cast<std::size_t>(c.parent)];
    n.parent = c.parent;
    n.label = c.label;
    n.depth = p.depth + 1;
    if (c.label == space_) {
      if (!p.partial.empty() && fuse_) {
        n.lm = word_end_lm(p);
        n.history = p.history;
        n.history.push_back(params_.lm->lookup(p.partial));
        const auto keep = static_cast<std::size_t>(std::max(params_.lm->order() - 1, 0));
        if (n.history.size() > keep) n.history.erase(n.history.begin(), n.history.end() - static_cast<std::ptrdiff_t>(keep));
      } else {
        n.lm = p.lm;
        n.history = p.history;
      }
      n.words = p.words + (p.partial.empty() ? 0 : 1);
    } else {
      n.lm = p.lm;
      n.words = p.words;
      n.history = p.history;
      n.partial = p.partial + alphabet_.symbol(static_cast<std::size_t>(c.label));
    }
    nodes_.push_back(std::move(n));
    const int id = static_cast<int>(nodes_.size() - 1);
    children_.emplace(child_key(c.parent, c.label), id);
    return id;
  }

  std::vector<Beam> select() {
    for (auto& c : cands_) {
      const auto [lm_log10, words] = fusion_state(c);
      c.score = fused(log_add(c.pb, c.pnb), lm_log10, words);
    }
    std::vector<std::size_t> order(cands_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t keep = std::min(order.size(), static_cast<std::size_t>(params_.beam_width));
    auto cmp = [&](std::size_t a, std::size_t b) { return better(cands_[a], cands_[b]); };
    if (keep < order.size()) {
      std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), cmp);
      order.resize(keep);
    }
    std::sort(order.begin(), order.end(), cmp);
    std::vector<Beam> beams;
    beams.reserve(keep);
    for (std::size_t i : order) {
      const Cand& c = cands_[i];
      if (c.pb == kNegInf && c.pnb == kNegInf) continue;
      beams.push_back({materialize(c), c.pb, c.pnb});
    }
    return beams;
  }

  std::vector<Hypothesis> finish(const std::vector<Beam>& beams) {
    std::vector<Hypothesis> out;
    for (const Beam& b : beams) {
      Node& n = nodes_[static_cast<std::size_t>(b.node)];
      Hypothesis h;
      h.labels = labels_of(b.node);
      h.text = labels_to_text(h.labels, alphabet_);
      h.acoustic_log = log_add(b.pb, b.pnb);
      h.word_count = n.words + (n.partial.empty() ? 0 : 1);
      if (fuse_) h.lm_log10 = n.partial.empty() ? n.lm : word_end_lm(n);
      h.combined = fused(h.acoustic_log, h.lm_log10, h.word_count);
      out.push_back(std::move(h));
    }
    std::stable_sort(out.begin(), out.end(), [](const Hypothesis& a, const Hypothesis& b) {
      if (a.combined != b.combined) return a.combined > b.combined;
      if (a.labels.size() != b.labels.size()) return a.labels.size() < b.labels.size();
      return a.labels < b.labels;
    });
    return out;
  }

  const LogitMatrix& logits_;
  const textnorm::AlphabetSpec& alphabet_;
  const DecodeParams& params_;
  int space_ = -1;
  int blank_ = 0;
  bool fuse_ = false;
  std::vector<Node> nodes_;
  std::unordered_map<std::uint64_t, int> children_;
  std::vector<Cand> cands_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

}  // namespace detail

/// CTC prefix beam search with optional word-level n-gram fusion:
/// combined = acoustic + alpha * ln(10) * lm_log10 + beta * words. Fusion is
/// off without an LM or when alpha and beta are both zero. Words are scored
/// when a space closes them and once more for the trailing word; the LM
/// history starts at <s>.
inline std::vector<Hypothesis> beam_decode(const LogitMatrix& logits, const textnorm::AlphabetSpec& alphabet,
                                           const DecodeParams& params = {}) {
  return detail::PrefixSearch(logits, alphabet, params).run();
}

/// Row-wise concatenation in arrival order.
inline LogitMatrix accumulate_logits(std::span<const LogitMatrix> chunks) {
  LogitMatrix out;
  for (const auto& c : chunks) {
    if (!out.empty() && c.cols() != out.cols()) {
      fail(ErrorKind::kShape, "chunk width " + std::to_string(c.cols()) + " differs from " +
                                  std::to_string(out.cols()));
    }
    out.append_rows(c);
  }
  return out;
}

inline std::vector<std::string> split_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

/// Word-level Levenshtein distance.
inline std::size_t word_edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  std::vector<std::size_t> prev(hyp.size() + 1), cur(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[hyp.size()];
}

inline double word_error_rate(const std::string& reference, const std::string& hypothesis) {
  const auto ref = split_words(reference);
  if (ref.empty()) fail(ErrorKind::kDomain, "word error rate needs a non-empty reference");
  return static_cast<double>(word_edit_distance(ref, split_words(hypothesis))) / static_cast<double>(ref.size());
}

}  // namespace scribo::ctc
