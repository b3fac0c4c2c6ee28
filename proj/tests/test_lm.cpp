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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "scribo/lm.hpp"

namespace {

using scribo::Error;
using scribo::ErrorKind;
using scribo::lm::NgramModel;
using Words = std::vector<std::string>;

const std::string kData = SCRIBO_TEST_DATA;

NgramModel toy() { return scribo::lm::parse_arpa(std::filesystem::path(kData + "/toy.arpa")); }
NgramModel five() { return scribo::lm::parse_arpa(std::filesystem::path(kData + "/five.arpa")); }

ErrorKind parse_error(const std::string& text) {
  try {
    scribo::lm::parse_arpa_string(text);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "parsed without error";
  return ErrorKind::kState;
}

TEST(Arpa, ToyHeaderConsistency) {
  const auto m = scribo::lm::parse_arpa_string(
      "\\data\\\nngram 1=3\n\n\\1-grams:\n-0.5 a\n-0.5 b\n-1 c\n\n\\end\\\n");
  EXPECT_EQ(m.order(), 1);
  EXPECT_EQ(m.size(1), 3u);
}

TEST(Arpa, FiveGramOrder) {
  const auto m = five();
  EXPECT_EQ(m.order(), 5);
  EXPECT_EQ(m.size(1), 16u);
  EXPECT_EQ(m.size(5), 30u);
}

TEST(Arpa, Errors) {
  EXPECT_EQ(parse_error("\\data\\\nngram 1=1\n\n\\1-grams:\n-1 a\n"), ErrorKind::kParse);
  EXPECT_EQ(parse_error("\\data\\\nngram 1=2\n\n\\1-grams:\n-1 a\n\n\\end\\\n"), ErrorKind::kParse);
  EXPECT_EQ(parse_error("\\data\\\nngram 1=1\n\n\\1-grams:\nabc a\n\n\\end\\\n"), ErrorKind::kParse);
  EXPECT_EQ(parse_error("\\data\\\nngram 1=1\nngram 2=1\n\n\\1-grams:\n-1 a\n\n\\end\\\n"),
            ErrorKind::kParse);
  EXPECT_EQ(parse_error("ngram 1=1\n\\1-grams:\n-1 a\n\\end\\\n"), ErrorKind::kParse);
  EXPECT_EQ(parse_error("\\data\\\nngram 1=1\n\n\\1-grams:\n0.5 a\n\n\\end\\\n"), ErrorKind::kParse);
  EXPECT_EQ(parse_error("\\data\\\nngram 1=1\n\n\\1-grams:\n-1 a\n-1 a\n\n\\end\\\n"), ErrorKind::kParse);
  // Bigram (b a) has no unigram b; trigram lacks its bigram prefix.
  EXPECT_EQ(parse_error("\\data\\\nngram 1=1\nngram 2=1\n\n\\1-grams:\n-1 a\n\n\\2-grams:\n-1 b a\n\n\\end\\\n"),
            ErrorKind::kSchema);
  EXPECT_EQ(parse_error("\\data\\\nngram 1=2\nngram 2=1\nngram 3=1\n\n\\1-grams:\n-1 a\n-1 b\n\n"
                        "\\2-grams:\n-1 a b\n\n\\3-grams:\n-1 b a b\n\n\\end\\\n"),
            ErrorKind::kSchema);
  EXPECT_THROW(scribo::lm::parse_arpa(std::filesystem::path("/nonexistent.arpa")), Error);
}

TEST(Arpa, RoundTripIsEntryForEntryIdentical) {
  for (const auto& m : {toy(), five()}) {
    const std::string text = scribo::lm::to_arpa_string(m);
    const auto back = scribo::lm::parse_arpa_string(text);
    EXPECT_TRUE(back.same_entries(m));
    EXPECT_EQ(scribo::lm::to_arpa_string(back), text);
  }
}

TEST(Score, SeenBigram) {
  const auto m = toy();
  EXPECT_DOUBLE_EQ(m.score_word(Words{"the"}, "cat").log10_prob, -0.301);
}

TEST(Score, BackoffArithmetic) {
  const auto m = toy();
  EXPECT_NEAR(m.score_word(Words{"the"}, "dog").log10_prob, -0.2 + -1.0, 1e-12);
  // A history without a backoff weight contributes 0.
  EXPECT_NEAR(m.score_word(Words{"cat"}, "dog").log10_prob, -1.0, 1e-12);
  // Only the last order-1 tokens are used.
  EXPECT_NEAR(m.score_word(Words{"dog", "cat", "the"}, "cat").log10_prob, -0.301, 1e-12);
}

TEST(Score, OovRoutesToUnk) {
  const auto m = scribo::lm::parse_arpa_string(
      "\\data\\\nngram 1=2\n\n\\1-grams:\n-2.5 <unk>\n-0.1 a\n\n\\end\\\n");
  const auto s = m.score_word({}, "zebra");
  EXPECT_DOUBLE_EQ(s.log10_prob, -2.5);
  EXPECT_TRUE(s.oov);
  EXPECT_EQ(m.score_sequence(Words{"a", "zebra", "zebra"}, false).oov_count, 2u);
}

TEST(Score, OovFloorWithoutUnk) {
  auto m = scribo::lm::parse_arpa_string("\\data\\\nngram 1=1\n\n\\1-grams:\n-0.1 a\n\n\\end\\\n");
  EXPECT_DOUBLE_EQ(m.score_word({}, "zebra").log10_prob, -8.0);
  m.set_oov_floor(-12.5);
  EXPECT_DOUBLE_EQ(m.score_word(Words{"a"}, "zebra").log10_prob, -12.5);
}

TEST(Score, Sequences) {
  const auto m = toy();
  EXPECT_EQ(m.score_sequence(Words{}, false).log10_total, 0.0);
  const double expected = std::log10(0.4) + -0.301 + std::log10(0.1);
  EXPECT_NEAR(m.score_sequence(Words{"the", "cat", "dog"}, false).log10_total, expected, 1e-6);
  EXPECT_NEAR(m.perplexity(Words{"the", "cat", "dog"}, false), std::pow(10.0, -expected / 3), 1e-4);
  const auto f = five();
  EXPECT_LE(f.score_sequence(Words{"the", "cat", "sat", "on", "the", "mat"}, true).log10_total, 0.0);
  EXPECT_THROW(m.perplexity(Words{}, true), Error);
}

TEST(Score, MarkersCountInPerplexity) {
  const auto f = five();
  const Words w{"the", "dog", "sat"};
  const double total = f.score_sequence(w, true).log10_total;
  EXPECT_NEAR(f.perplexity(w, true), std::pow(10.0, -total / 4), 1e-9);
  // <s> is context only; </s> is scored after the last word.
  const double manual = f.score_word(Words{"<s>"}, "the").log10_prob +
                        f.score_word(Words{"<s>", "the"}, "dog").log10_prob +
                        f.score_word(Words{"<s>", "the", "dog"}, "sat").log10_prob +
                        f.score_word(Words{"<s>", "the", "dog", "sat"}, "</s>").log10_prob;
  EXPECT_NEAR(total, manual, 1e-12);
}

TEST(Perplexity, UniformAndCertain) {
  const auto uniform = scribo::lm::parse_arpa_string(
      "\\data\\\nngram 1=4\n\n\\1-grams:\n" + std::to_string(std::log10(0.25)) +
      " a\n" + std::to_string(std::log10(0.25)) + " b\n" + std::to_string(std::log10(0.25)) + " c\n" +
      std::to_string(std::log10(0.25)) + " d\n\n\\end\\\n");
  std::mt19937 rng(4);
  Words w;
  for (int i = 0; i < 10; ++i) w.push_back(std::string(1, static_cast<char>('a' + rng() % 4)));
  EXPECT_NEAR(uniform.perplexity(w, false), 4.0, 1e-5);
  const auto certain = scribo::lm::parse_arpa_string("\\data\\\nngram 1=1\n\n\\1-grams:\n0 a\n\n\\end\\\n");
  EXPECT_DOUBLE_EQ(certain.perplexity(Words{"a"}, false), 1.0);
}

void expect_normalized(const NgramModel& m) {
  std::vector<Words> histories = {{}};
  for (int k = 1; k < m.order(); ++k) {
    for (const auto& [words, e] : m.sorted_entries(k)) histories.push_back(words);
  }
  for (const auto& h : histories) {
    if (!h.empty() && h.back() == "</s>") continue;
    double sum = 0;
    for (const auto& w : m.vocab()) {
      if (w != "<s>") sum += std::pow(10.0, m.score_word(h, w).log10_prob);
    }
    std::string name;
    for (const auto& t : h) name += t + " ";
    EXPECT_NEAR(sum, 1.0, 1e-6) << "history: " << name;
  }
}

TEST(Score, ProperModelsNormalize) {
  expect_normalized(toy());
  expect_normalized(five());
}

TEST(Score, AdditiveOverConcatenation) {
  const auto m = five();
  std::mt19937 rng(8);
  const auto& vocab = m.vocab();
  for (int round = 0; round < 200; ++round) {
    Words a, b;
    for (auto n = rng() % 6; n > 0; --n) a.push_back(vocab[rng() % vocab.size()]);
    for (auto n = rng() % 6; n > 0; --n) b.push_back(vocab[rng() % vocab.size()]);
    Words ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    double tail = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
      tail += m.score_word(std::span(ab).first(a.size() + i), b[i]).log10_prob;
    }
    EXPECT_NEAR(m.score_sequence(ab, false).log10_total, m.score_sequence(a, false).log10_total + tail,
                1e-9);
  }
}

TEST(Prune, NoOpAndBoundary) {
  const auto m = toy();
  EXPECT_TRUE(scribo::lm::prune_model(m, 6).same_entries(m));
  EXPECT_TRUE(scribo::lm::prune_model(m, 10).same_entries(m));
  const auto uni = scribo::lm::prune_model(m, 4);
  EXPECT_EQ(uni.total_size(), 4u);
  EXPECT_EQ(uni.size(2), 0u);
  EXPECT_THROW(scribo::lm::prune_model(m, 3), Error);
  // One slot less drops the least likely bigram, (the the).
  const auto five_left = scribo::lm::prune_model(m, 5);
  EXPECT_NE(five_left.find({five_left.find_token("the"), five_left.find_token("cat")}), nullptr);
  EXPECT_EQ(five_left.find({five_left.find_token("the"), five_left.find_token("the")}), nullptr);
}

/// Naive pruning: repeatedly remove the minimum remaining entry by the
/// stated order, together with every entry that extends it.
std::set<Words> naive_prune(const NgramModel& m, std::size_t max) {
  std::map<Words, double> live;
  for (int k = 1; k <= m.order(); ++k) {
    for (const auto& [w, e] : m.sorted_entries(k)) live[w] = e.log10_prob;
  }
  while (live.size() > max) {
    const Words* best = nullptr;
    for (const auto& [w, p] : live) {
      if (w.size() < 2) continue;
      if (!best) {
        best = &w;
        continue;
      }
      const double bp = live[*best];
      if (p < bp || (p == bp && (w.size() > best->size() || (w.size() == best->size() && w < *best)))) {
        best = &w;
      }
    }
    const Words victim = *best;
    for (auto it = live.begin(); it != live.end();) {
      const bool extends = it->first.size() >= victim.size() &&
                           std::equal(victim.begin(), victim.end(), it->first.begin());
      it = extends ? live.erase(it) : std::next(it);
    }
  }
  std::set<Words> out;
  for (const auto& [w, p] : live) out.insert(w);
  return out;
}

TEST(Prune, MatchesNaiveOrderingAndStaysConsistent) {
  for (const auto& m : {toy(), five()}) {
    for (std::size_t max = m.size(1); max <= m.total_size(); ++max) {
      const auto pruned = scribo::lm::prune_model(m, max);
      EXPECT_LE(pruned.total_size(), max);
      EXPECT_EQ(pruned.size(1), m.size(1));
      EXPECT_TRUE(pruned.consistency_violations().empty());
      std::set<Words> got;
      for (int k = 1; k <= pruned.order(); ++k) {
        for (const auto& [w, e] : pruned.sorted_entries(k)) got.insert(w);
      }
      EXPECT_EQ(got, naive_prune(m, max)) << "max " << max;
      EXPECT_TRUE(scribo::lm::parse_arpa_string(scribo::lm::to_arpa_string(pruned)).same_entries(pruned));
    }
  }
}

}  // namespace
