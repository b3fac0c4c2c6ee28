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
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <unicode/uchar.h>

#include "json.hpp"
#include "scribo/error.hpp"
#include "scribo/numbers.hpp"
#include "scribo/utf8.hpp"

namespace scribo::textnorm {

/// Ordered grapheme inventory of an acoustic model. The CTC blank is not a
/// member; it always occupies index `size()`.
class AlphabetSpec {
 public:
  AlphabetSpec() = default;

  explicit AlphabetSpec(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
      const std::u32string cps = utf8::decode(symbols_[i]);
      if (cps.size() != 1) {
        fail(ErrorKind::kSchema, "alphabet symbol '" + symbols_[i] +
                                     "' must be exactly one code point");
      }
      if (!index_.emplace(cps[0], static_cast<int>(i)).second) {
        fail(ErrorKind::kSchema, "duplicate alphabet symbol '" + symbols_[i] + "'");
      }
    }
  }

  /// Space, a-z and apostrophe: the 28-symbol inventory of the pretrained
  /// English acoustic model.
  static AlphabetSpec english() {
    std::vector<std::string> s{" "};
    for (char c = 'a'; c <= 'z'; ++c) s.emplace_back(1, c);
    s.emplace_back("'");
    return AlphabetSpec(std::move(s));
  }

  /// English plus "ñ".
  static AlphabetSpec spanish() {
    auto s = english().symbols_;
    s.emplace_back("ñ");
    return AlphabetSpec(std::move(s));
  }

  /// Named presets. German, French and Italian share the English inventory
  /// once diacritics are transliterated.
  static AlphabetSpec preset(std::string_view name) {
    if (name == "en" || name == "de" || name == "fr" || name == "it") return english();
    if (name == "es") return spanish();
    fail(ErrorKind::kMissing, "unknown alphabet preset '" + std::string(name) + "'");
  }

  static AlphabetSpec from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("symbols") || !j["symbols"].is_array()) {
      fail(ErrorKind::kSchema, "alphabet must be an object with a 'symbols' array");
    }
    std::vector<std::string> symbols;
    for (const auto& s : j["symbols"]) {
      if (!s.is_string()) fail(ErrorKind::kSchema, "alphabet symbols must be strings");
      symbols.push_back(s.get<std::string>());
    }
    AlphabetSpec spec(std::move(symbols));
    if (j.contains("blank_index") &&
        j["blank_index"].get<std::int64_t>() != static_cast<std::int64_t>(spec.size())) {
      fail(ErrorKind::kSchema, "blank_index must equal the symbol count");
    }
    return spec;
  }

  nlohmann::json to_json() const {
    return {{"symbols", symbols_}, {"blank_index", blank_index()}};
  }

  std::size_t size() const noexcept { return symbols_.size(); }
  int blank_index() const noexcept { return static_cast<int>(symbols_.size()); }
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }
  const std::string& symbol(std::size_t i) const { return symbols_.at(i); }

  bool contains(char32_t cp) const { return index_.count(cp) != 0; }

  /// Index of a single-code-point symbol, or nullopt.
  std::optional<int> index_of(char32_t cp) const {
    auto it = index_.find(cp);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<int> index_of(std::string_view symbol) const {
    const std::u32string cps = utf8::decode(symbol);
    if (cps.size() != 1) return std::nullopt;
    return index_of(cps[0]);
  }

  friend bool operator==(const AlphabetSpec& a, const AlphabetSpec& b) {
    return a.symbols_ == b.symbols_;
  }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<char32_t, int> index_;
};

inline AlphabetSpec load_alphabet(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open alphabet file " + path);
  try {
    return AlphabetSpec::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, path + ": " + e.what());
  }
}

/// Preset name ("en", "es", ...) or path to an alphabet JSON file.
inline AlphabetSpec resolve_alphabet(const std::string& name_or_path) {
  if (name_or_path.size() <= 3 && name_or_path.find('.') == std::string::npos &&
      name_or_path.find('/') == std::string::npos) {
    return AlphabetSpec::preset(name_or_path);
  }
  return load_alphabet(name_or_path);
}

using ReplacementList = std::vector<std::pair<std::string, std::string>>;

struct NormRules {
  ReplacementList replacements;  // applied in file order
  std::vector<std::pair<std::string, std::string>> units;  // longest token first
  std::string number_language;  // empty: digits are left to the alphabet filter
  bool lowercase = true;
};

/// Validates a rule document. Unknown keys and wrongly typed values raise
/// ErrorKind::kSchema.
inline NormRules rules_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::kSchema, "rule file must hold a JSON object");
  static const std::set<std::string> kKeys = {"replacements", "units", "number_language",
                                              "lowercase"};
  for (const auto& [key, value] : j.items()) {
    if (!kKeys.count(key)) fail(ErrorKind::kSchema, "unknown rule key '" + key + "'");
  }
  NormRules rules;
  if (j.contains("lowercase")) {
    if (!j["lowercase"].is_boolean()) fail(ErrorKind::kSchema, "'lowercase' must be a boolean");
    rules.lowercase = j["lowercase"].get<bool>();
  }
  if (j.contains("number_language")) {
    const auto& lang = j["number_language"];
    if (!lang.is_string()) fail(ErrorKind::kSchema, "'number_language' must be a string");
    rules.number_language = lang.get<std::string>();
    if (!is_supported_number_language(rules.number_language)) {
      fail(ErrorKind::kSchema, "unsupported number_language '" + rules.number_language + "'");
    }
  }
  if (j.contains("replacements")) {
    const auto& reps = j["replacements"];
    if (!reps.is_array()) fail(ErrorKind::kSchema, "'replacements' must be an array");
    for (std::size_t i = 0; i < reps.size(); ++i) {
      const auto& r = reps[i];
      if (!r.is_array() || r.size() != 2 || !r[0].is_string() || !r[1].is_string()) {
        fail(ErrorKind::kSchema,
             "replacement #" + std::to_string(i) + " must be a [pattern, replacement] string pair");
      }
      auto pattern = utf8::nfc(r[0].get<std::string>());
      if (pattern.empty()) {
        fail(ErrorKind::kSchema, "replacement #" + std::to_string(i) + " has an empty pattern");
      }
      rules.replacements.emplace_back(std::move(pattern), utf8::nfc(r[1].get<std::string>()));
    }
  }
  if (j.contains("units")) {
    const auto& units = j["units"];
    if (!units.is_object()) fail(ErrorKind::kSchema, "'units' must be an object");
    for (const auto& [token, spoken] : units.items()) {
      if (!spoken.is_string()) {
        fail(ErrorKind::kSchema, "unit '" + token + "' must map to a string");
      }
      if (token.empty()) fail(ErrorKind::kSchema, "empty unit token");
      std::string key = utf8::nfc(token);
      if (rules.lowercase) key = utf8::lowercase(key);
      rules.units.emplace_back(std::move(key), utf8::nfc(spoken.get<std::string>()));
    }
    std::stable_sort(rules.units.begin(), rules.units.end(), [](const auto& a, const auto& b) {
      return utf8::decode(a.first).size() > utf8::decode(b.first).size();
    });
  }
  return rules;
}

inline NormRules load_rules(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open rule file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::kParse, path + ": " + e.what());
  }
  try {
    return rules_from_json(j);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

/// Umlauts and sharp s, both cases.
inline ReplacementList german_transliteration() {
  return {{"ä", "ae"}, {"ö", "oe"}, {"ü", "ue"}, {"ß", "ss"},
          {"Ä", "Ae"}, {"Ö", "Oe"}, {"Ü", "Ue"}, {"ẞ", "SS"}};
}

/// Crossword-puzzle flattening: letters with diacritics lose them and
/// ligatures are spelled out. Symbols listed in `keep` are left alone.
inline ReplacementList crossword_transliteration(const std::set<std::string>& keep = {}) {
  static const ReplacementList kTable = {
      {"à", "a"}, {"á", "a"}, {"â", "a"}, {"ã", "a"}, {"ä", "a"}, {"å", "a"}, {"ā", "a"},
      {"æ", "ae"}, {"ç", "c"}, {"č", "c"}, {"ć", "c"}, {"ď", "d"}, {"è", "e"}, {"é", "e"},
      {"ê", "e"}, {"ë", "e"}, {"ē", "e"}, {"ě", "e"}, {"ì", "i"}, {"í", "i"}, {"î", "i"},
      {"ï", "i"}, {"ī", "i"}, {"ł", "l"}, {"ñ", "n"}, {"ň", "n"}, {"ò", "o"}, {"ó", "o"},
      {"ô", "o"}, {"õ", "o"}, {"ö", "o"}, {"ø", "o"}, {"ō", "o"}, {"œ", "oe"}, {"ř", "r"},
      {"š", "s"}, {"ś", "s"}, {"ß", "ss"}, {"ť", "t"}, {"ù", "u"}, {"ú", "u"}, {"û", "u"},
      {"ü", "u"}, {"ū", "u"}, {"ů", "u"}, {"ý", "y"}, {"ÿ", "y"}, {"ž", "z"}, {"ź", "z"},
      {"ż", "z"}};
  ReplacementList out;
  for (const auto& entry : kTable) {
    if (!keep.count(entry.first)) out.push_back(entry);
  }
  return out;
}

namespace detail {

inline bool starts_with_at(const std::u32string& text, std::size_t pos,
                           const std::u32string& pattern) {
  return pattern.size() <= text.size() - pos &&
         std::equal(pattern.begin(), pattern.end(), text.begin() + static_cast<std::ptrdiff_t>(pos));
}

struct CompiledMap {
  std::vector<std::pair<std::u32string, std::u32string>> entries;
};

inline CompiledMap compile(const ReplacementList& map) {
  CompiledMap c;
  for (const auto& [from, to] : map) {
    auto key = utf8::decode(from);
    if (!key.empty()) c.entries.emplace_back(std::move(key), utf8::decode(to));
  }
  // Longest key first; ties keep list order.
  std::stable_sort(c.entries.begin(), c.entries.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
  return c;
}

/// One left-to-right pass; replaced text is never rescanned.
inline std::u32string replace_pass(const std::u32string& text, const std::u32string& pattern,
                                   const std::u32string& replacement) {
  std::u32string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    if (starts_with_at(text, i, pattern)) {
      out += replacement;
      i += pattern.size();
    } else {
      out.push_back(text[i++]);
    }
  }
  return out;
}

inline bool is_letter(char32_t cp) { return u_isalpha(static_cast<UChar32>(cp)); }
inline bool is_ascii_digit(char32_t cp) { return cp >= U'0' && cp <= U'9'; }
inline bool is_space(char32_t cp) { return u_isUWhiteSpace(static_cast<UChar32>(cp)); }

inline std::u32string expand_units(const std::u32string& text,
                                   const std::vector<std::pair<std::u32string, std::u32string>>& units) {
  if (units.empty()) return text;
  std::u32string out;
  for (std::size_t i = 0; i < text.size();) {
    bool matched = false;
    if (i == 0 || !is_letter(text[i - 1])) {
      for (const auto& [token, spoken] : units) {
        if (!starts_with_at(text, i, token)) continue;
        const std::size_t end = i + token.size();
        if (end < text.size() && (is_letter(text[end]) || is_ascii_digit(text[end]))) continue;
        out.push_back(U' ');
        out += spoken;
        out.push_back(U' ');
        i = end;
        matched = true;
        break;
      }
    }
    if (!matched) out.push_back(text[i++]);
  }
  return out;
}

/// Length of a thousands-grouped numeral ("1.000", "12,345,678") starting at
/// `pos`, or 0 if the digits there are not grouped.
inline std::size_t grouped_numeral_length(const std::u32string& text, std::size_t pos) {
  std::size_t i = pos;
  while (i < text.size() && is_ascii_digit(text[i]) && i - pos < 4) ++i;
  const std::size_t lead = i - pos;
  if (lead == 0 || lead > 3) return 0;
  std::size_t groups = 0;
  while (i + 3 < text.size() + 0 && (text[i] == U'.' || text[i] == U',') &&
         is_ascii_digit(text[i + 1]) && is_ascii_digit(text[i + 2]) && is_ascii_digit(text[i + 3]) &&
         (i + 4 >= text.size() || !is_ascii_digit(text[i + 4]))) {
    i += 4;
    ++groups;
  }
  return groups ? i - pos : 0;
}

inline void append_number(std::u32string& out, const std::string& digits, std::string_view lang) {
  std::size_t first = digits.find_first_not_of('0');
  const std::string significant = first == std::string::npos ? "0" : digits.substr(first);
  std::string words;
  if (significant.size() <= 13 && std::stoll(significant) <= kMaxSpelledNumber) {
    words = number_to_words(std::stoll(significant), lang);
  } else {
    for (char d : digits) {
      if (!words.empty()) words += ' ';
      words += number_to_words(d - '0', lang);
    }
  }
  out.push_back(U' ');
  out += utf8::decode(words);
  out.push_back(U' ');
}

inline std::u32string expand_numbers(const std::u32string& text, std::string_view lang) {
  std::u32string out;
  for (std::size_t i = 0; i < text.size();) {
    if (!is_ascii_digit(text[i])) {
      out.push_back(text[i++]);
      continue;
    }
    std::string digits;
    if (std::size_t len = grouped_numeral_length(text, i)) {
      for (std::size_t k = i; k < i + len; ++k) {
        if (is_ascii_digit(text[k])) digits.push_back(static_cast<char>(text[k]));
      }
      i += len;
    } else {
      while (i < text.size() && is_ascii_digit(text[i])) digits.push_back(static_cast<char>(text[i++]));
    }
    append_number(out, digits, lang);
  }
  return out;
}

inline std::string filter_and_collapse(const std::u32string& text, const AlphabetSpec& alphabet) {
  const bool keep_space = alphabet.contains(U' ');
  std::u32string kept;
  bool pending_space = false;
  for (char32_t cp : text) {
    if (is_space(cp)) {
      pending_space = keep_space && !kept.empty();
      continue;
    }
    if (!alphabet.contains(cp) || cp == U' ') continue;
    if (pending_space) kept.push_back(U' ');
    pending_space = false;
    kept.push_back(cp);
  }
  return utf8::encode(kept);
}

inline std::string normalize_once(std::string_view text, const NormRules& rules,
                                  const AlphabetSpec& alphabet) {
  std::string s = utf8::nfc(text);
  if (rules.lowercase) s = utf8::lowercase(s);
  std::u32string cps = utf8::decode(s);

  std::vector<std::pair<std::u32string, std::u32string>> units;
  units.reserve(rules.units.size());
  for (const auto& [token, spoken] : rules.units) {
    units.emplace_back(utf8::decode(token), utf8::decode(spoken));
  }
  cps = expand_units(cps, units);
  if (!rules.number_language.empty()) cps = expand_numbers(cps, rules.number_language);
  for (const auto& [pattern, replacement] : rules.replacements) {
    cps = replace_pass(cps, utf8::decode(pattern), utf8::decode(replacement));
  }
  return filter_and_collapse(cps, alphabet);
}

}  // namespace detail

/// Replaces every occurrence of a map key, preferring the longest key at each
/// position. Characters not covered by the map are copied unchanged.
inline std::string transliterate(std::string_view text, const ReplacementList& map) {
  const auto compiled = detail::compile(map);
  const std::u32string cps = utf8::decode(text);
  std::u32string out;
  out.reserve(cps.size());
  for (std::size_t i = 0; i < cps.size();) {
    bool matched = false;
    for (const auto& [key, value] : compiled.entries) {
      if (detail::starts_with_at(cps, i, key)) {
        out += value;
        i += key.size();
        matched = true;
        break;
      }
    }
    if (!matched) out.push_back(cps[i++]);
  }
  return utf8::encode(out);
}

/// Full transcript normalization: case folding, unit and number expansion,
/// rule replacements, removal of characters outside the alphabet and
/// whitespace collapsing. Re-applied until the text is stable so the result
/// is a fixpoint even when character removal joins fragments that a rule
/// would match.
inline std::string normalize_text(std::string_view text, const NormRules& rules,
                                  const AlphabetSpec& alphabet) {
  constexpr int kMaxPasses = 8;
  std::string current = detail::normalize_once(text, rules, alphabet);
  for (int pass = 1; pass < kMaxPasses; ++pass) {
    std::string next = detail::normalize_once(current, rules, alphabet);
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

}  // namespace scribo::textnorm
