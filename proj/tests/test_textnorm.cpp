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

#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "scribo/textnorm.hpp"
#include "test_util.hpp"

namespace tn = scribo::textnorm;
using scribo::Error;
using scribo::ErrorKind;

namespace {

tn::NormRules rules_for(const std::string& lang) {
  return tn::load_rules(std::string(SCRIBO_RULES_DIR) + "/" + lang + ".json");
}

std::string write_temp(const std::string& name, const std::string& content) {
  static const auto dir = scribo::testing::temp_dir("textnorm");
  const auto path = dir / name;
  std::ofstream(path) << content;
  return path.string();
}

}  // namespace

TEST(LoadRules, SingleReplacement) {
  auto rules = tn::load_rules(write_temp("one.json", R"({"replacements":[["ä","ae"]]})"));
  ASSERT_EQ(rules.replacements.size(), 1u);
  EXPECT_EQ(rules.replacements[0].first, "ä");
  EXPECT_EQ(rules.replacements[0].second, "ae");
  EXPECT_TRUE(rules.lowercase);
}

TEST(LoadRules, EmptyObjectOnlyLowercasesAndFilters) {
  auto rules = tn::load_rules(write_temp("empty.json", "{}"));
  EXPECT_TRUE(rules.replacements.empty());
  EXPECT_TRUE(rules.units.empty());
  EXPECT_TRUE(rules.number_language.empty());
  EXPECT_EQ(tn::normalize_text("Hello, World!", rules, tn::AlphabetSpec::english()),
            "hello world");
}

TEST(LoadRules, NonStringReplacementIsSchemaError) {
  try {
    tn::load_rules(write_temp("bad.json", R"({"replacements":[["a",42]]})"));
    FAIL() << "expected schema error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSchema);
  }
}

TEST(LoadRules, RejectsUnknownKeysAndMalformedJson) {
  try {
    tn::load_rules(write_temp("unknown.json", R"({"replacement":[]})"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSchema);
  }
  try {
    tn::load_rules(write_temp("broken.json", R"({"replacements":[["a","b"])"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
  }
  EXPECT_THROW(tn::load_rules(write_temp("lc.json", R"({"lowercase":"yes"})")), Error);
  EXPECT_THROW(tn::load_rules(write_temp("lang.json", R"({"number_language":"xx"})")), Error);
  EXPECT_THROW(tn::load_rules("/nonexistent/rules.json"), Error);
}

TEST(LoadRules, ShippedFilesLoad) {
  for (const char* lang : {"de", "en", "es", "fr"}) {
    auto rules = rules_for(lang);
    EXPECT_EQ(rules.number_language, lang);
    EXPECT_FALSE(rules.units.empty());
  }
}

TEST(NumberToWords, Examples) {
  EXPECT_EQ(tn::number_to_words(0, "en"), "zero");
  EXPECT_EQ(tn::number_to_words(21, "de"), "einundzwanzig");
  EXPECT_EQ(tn::number_to_words(105, "en"), "one hundred five");
}

// Table produced by tests/data/gen_number_words.py from num2words.
TEST(NumberToWords, MatchesReferenceTable) {
  std::ifstream in(std::string(SCRIBO_TEST_DATA) + "/number_words.tsv");
  ASSERT_TRUE(in);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string lang, number, words;
    std::getline(fields, lang, '\t');
    std::getline(fields, number, '\t');
    std::getline(fields, words);
    EXPECT_EQ(tn::number_to_words(std::stoll(number), lang), words) << lang << " " << number;
    ++rows;
  }
  EXPECT_GT(rows, 1000);
}

TEST(NumberToWords, Errors) {
  EXPECT_THROW(tn::number_to_words(5, "xx"), Error);
  EXPECT_THROW(tn::number_to_words(-1, "en"), Error);
  EXPECT_THROW(tn::number_to_words(tn::kMaxSpelledNumber + 1, "de"), Error);
  EXPECT_EQ(tn::number_to_words(tn::kMaxSpelledNumber, "en"), "one trillion");
}

TEST(Transliterate, Examples) {
  EXPECT_EQ(tn::transliterate("grün", tn::german_transliteration()), "gruen");
  EXPECT_EQ(tn::transliterate("façade", tn::crossword_transliteration()), "facade");
  EXPECT_EQ(tn::transliterate("abc", tn::german_transliteration()), "abc");
  EXPECT_EQ(tn::transliterate("abc", tn::crossword_transliteration()), "abc");
}

TEST(Transliterate, KeepListAndLongestMatch) {
  EXPECT_EQ(tn::transliterate("niño", tn::crossword_transliteration({"ñ"})), "niño");
  EXPECT_EQ(tn::transliterate("niño", tn::crossword_transliteration()), "nino");
  tn::ReplacementList map = {{"s", "z"}, {"sch", "sh"}};
  EXPECT_EQ(tn::transliterate("schas", map), "shaz");
}

TEST(Transliterate, NoSourceGraphemeRemains) {
  std::mt19937 rng(3);
  const auto map = tn::crossword_transliteration();
  for (int i = 0; i < 200; ++i) {
    const std::string out = tn::transliterate(scribo::testing::random_unicode(rng, 40), map);
    for (const auto& [from, to] : map) {
      EXPECT_EQ(out.find(from), std::string::npos) << from;
    }
  }
}

TEST(Transliterate, HomomorphicOverConcatenation) {
  std::mt19937 rng(11);
  const auto map = tn::german_transliteration();
  for (int i = 0; i < 300; ++i) {
    const auto a = scribo::testing::random_unicode(rng, 20);
    const auto b = scribo::testing::random_unicode(rng, 20);
    EXPECT_EQ(tn::transliterate(a + b, map), tn::transliterate(a, map) + tn::transliterate(b, map));
  }
}

TEST(NormalizeText, Examples) {
  const auto de = rules_for("de");
  const auto en = tn::AlphabetSpec::english();
  EXPECT_EQ(tn::normalize_text("Ich wiege 3 kg!", de, en), "ich wiege drei kilogramm");
  EXPECT_EQ(tn::normalize_text("Äpfel?", de, en), "aepfel");
  EXPECT_EQ(tn::normalize_text("", de, en), "");
  EXPECT_EQ(tn::normalize_text("", tn::NormRules{}, en), "");
}

TEST(NormalizeText, NumbersUnitsAndSeparators) {
  const auto de = rules_for("de");
  const auto en_rules = rules_for("en");
  const auto en = tn::AlphabetSpec::english();
  EXPECT_EQ(tn::normalize_text("Die Wohnung hat 80 m².", de, en),
            "die wohnung hat achtzig quadratmeter");
  EXPECT_EQ(tn::normalize_text("1.000 Euro", de, en), "eintausend euro");
  EXPECT_EQ(tn::normalize_text("It costs 12,500 dollars", en_rules, en),
            "it costs twelve thousand five hundred dollars");
  EXPECT_EQ(tn::normalize_text("50% of 3.5", en_rules, en), "fifty percent of three five");
  EXPECT_EQ(tn::normalize_text("Größe 30", de, en), "groesse dreissig");
  EXPECT_EQ(tn::normalize_text("  tabs\tand\nnewlines  ", de, en), "tabs and newlines");
}

TEST(NormalizeText, DecomposedInputIsComposedFirst) {
  const auto de = rules_for("de");
  EXPECT_EQ(tn::normalize_text("A\xCC\x88pfel", de, tn::AlphabetSpec::english()), "aepfel");
}

TEST(NormalizeText, SpanishKeepsEnye) {
  EXPECT_EQ(tn::normalize_text("El Niño tiene 21 años", rules_for("es"), tn::AlphabetSpec::spanish()),
            "el niño tiene veintiuno años");
}

TEST(NormalizeText, PropertiesOnRandomStrings) {
  std::mt19937 rng(2026);
  for (const char* lang : {"de", "en", "es", "fr"}) {
    const auto rules = rules_for(lang);
    const auto alphabet = tn::AlphabetSpec::preset(lang);
    for (int i = 0; i < 300; ++i) {
      const auto input = scribo::testing::random_unicode(rng, 60);
      const auto once = tn::normalize_text(input, rules, alphabet);
      EXPECT_EQ(tn::normalize_text(once, rules, alphabet), once) << input;
      for (char32_t cp : scribo::utf8::decode(once)) {
        EXPECT_TRUE(alphabet.contains(cp)) << input;
        EXPECT_FALSE(cp >= U'0' && cp <= U'9');
      }
      EXPECT_EQ(once.find("  "), std::string::npos);
      if (!once.empty()) {
        EXPECT_NE(once.front(), ' ');
        EXPECT_NE(once.back(), ' ');
      }
    }
  }
}

TEST(AlphabetSpec, PresetsAndValidation) {
  const auto en = tn::AlphabetSpec::english();
  EXPECT_EQ(en.size(), 28u);
  EXPECT_EQ(en.blank_index(), 28);
  EXPECT_EQ(tn::AlphabetSpec::spanish().size(), 29u);
  EXPECT_EQ(tn::AlphabetSpec::spanish().index_of("ñ"), 28);
  EXPECT_THROW(tn::AlphabetSpec({"a", "a"}), Error);
  EXPECT_THROW(tn::AlphabetSpec({"ab"}), Error);
  EXPECT_THROW(tn::AlphabetSpec::preset("xx"), Error);
  EXPECT_EQ(tn::AlphabetSpec::from_json(en.to_json()), en);
}
