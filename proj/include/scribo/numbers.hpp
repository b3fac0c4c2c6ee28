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

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "scribo/error.hpp"

// Cardinal number spelling for the shipped rule languages. Words are joined
// with plain spaces (never hyphens) so every output survives alphabet
// filtering once diacritics are transliterated.

namespace scribo::textnorm {

inline constexpr std::int64_t kMaxSpelledNumber = 1'000'000'000'000;

namespace numbers_detail {

inline std::string join(std::string a, std::string_view b) {
  if (a.empty()) return std::string(b);
  if (b.empty()) return a;
  a += ' ';
  a += b;
  return a;
}

// --- English ---------------------------------------------------------------

inline constexpr std::array<std::string_view, 20> kEnOnes = {
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
    "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen",
    "seventeen", "eighteen", "nineteen"};
inline constexpr std::array<std::string_view, 10> kEnTens = {
    "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"};

inline std::string en_below_1000(int n) {
  std::string out;
  if (n >= 100) {
    out = join(std::string(kEnOnes[n / 100]), "hundred");
    n %= 100;
  }
  if (n == 0) return out;
  if (n < 20) return join(out, kEnOnes[n]);
  out = join(out, kEnTens[n / 10]);
  if (n % 10) out = join(out, kEnOnes[n % 10]);
  return out;
}

inline std::string english(std::int64_t n) {
  if (n == 0) return "zero";
  static constexpr std::array<std::pair<std::int64_t, std::string_view>, 4> kScales = {{
      {1'000'000'000'000, "trillion"},
      {1'000'000'000, "billion"},
      {1'000'000, "million"},
      {1'000, "thousand"},
  }};
  std::string out;
  for (const auto& [scale, name] : kScales) {
    if (n >= scale) {
      out = join(out, join(en_below_1000(static_cast<int>(n / scale)), name));
      n %= scale;
    }
  }
  if (n) out = join(out, en_below_1000(static_cast<int>(n)));
  return out;
}

// --- German ----------------------------------------------------------------

inline constexpr std::array<std::string_view, 20> kDeOnes = {
    "null", "eins", "zwei", "drei", "vier", "fünf", "sechs", "sieben", "acht", "neun",
    "zehn", "elf", "zwölf", "dreizehn", "vierzehn", "fünfzehn", "sechzehn", "siebzehn",
    "achtzehn", "neunzehn"};
inline constexpr std::array<std::string_view, 10> kDeTens = {
    "", "", "zwanzig", "dreißig", "vierzig", "fünfzig", "sechzig", "siebzig", "achtzig",
    "neunzig"};

// `final` selects "eins" over the compounding form "ein".
inline std::string de_below_100(int n, bool final) {
  if (n == 1) return final ? "eins" : "ein";
  if (n < 20) return std::string(kDeOnes[n]);
  const int unit = n % 10;
  std::string out;
  if (unit) out = std::string(unit == 1 ? "ein" : kDeOnes[unit]) + "und";
  return out + std::string(kDeTens[n / 10]);
}

inline std::string de_below_1000(int n, bool final) {
  std::string out;
  if (n >= 100) {
    const int h = n / 100;
    out = (h == 1 ? std::string("ein") : std::string(kDeOnes[h])) + "hundert";
    n %= 100;
  }
  if (n) out += de_below_100(n, final);
  return out;
}

inline std::string de_below_million(int n) {
  std::string out;
  if (n >= 1000) {
    out = de_below_1000(n / 1000, false) + "tausend";
    n %= 1000;
  }
  if (n) out += de_below_1000(n, true);
  return out;
}

inline std::string german(std::int64_t n) {
  if (n == 0) return "null";
  struct Scale {
    std::int64_t value;
    std::string_view singular;
    std::string_view plural;
  };
  static constexpr std::array<Scale, 3> kScales = {{
      {1'000'000'000'000, "billion", "billionen"},
      {1'000'000'000, "milliarde", "milliarden"},
      {1'000'000, "million", "millionen"},
  }};
  std::string out;
  for (const auto& s : kScales) {
    if (n >= s.value) {
      const int count = static_cast<int>(n / s.value);
      out = join(out, count == 1 ? join("eine", s.singular)
                                 : join(de_below_1000(count, false), s.plural));
      n %= s.value;
    }
  }
  if (n) out = join(out, de_below_million(static_cast<int>(n)));
  return out;
}

// --- Spanish ---------------------------------------------------------------

inline constexpr std::array<std::string_view, 30> kEsOnes = {
    "cero", "uno", "dos", "tres", "cuatro", "cinco", "seis", "siete", "ocho", "nueve",
    "diez", "once", "doce", "trece", "catorce", "quince", "dieciséis", "diecisiete",
    "dieciocho", "diecinueve", "veinte", "veintiuno", "veintidós", "veintitrés",
    "veinticuatro", "veinticinco", "veintiséis", "veintisiete", "veintiocho", "veintinueve"};
inline constexpr std::array<std::string_view, 10> kEsTens = {
    "", "", "", "treinta", "cuarenta", "cincuenta", "sesenta", "setenta", "ochenta",
    "noventa"};
inline constexpr std::array<std::string_view, 10> kEsHundreds = {
    "", "ciento", "doscientos", "trescientos", "cuatrocientos", "quinientos",
    "seiscientos", "setecientos", "ochocientos", "novecientos"};

// `apocope` shortens a trailing "uno" in front of a scale word.
inline std::string es_below_100(int n, bool apocope) {
  if (n < 30) {
    if (apocope && n == 1) return "un";
    if (apocope && n == 21) return "veintiún";
    return std::string(kEsOnes[n]);
  }
  std::string out(kEsTens[n / 10]);
  if (n % 10) out = join(join(out, "y"), n % 10 == 1 && apocope ? "un" : kEsOnes[n % 10]);
  return out;
}

inline std::string es_below_1000(int n, bool apocope) {
  if (n == 100) return "cien";
  std::string out;
  if (n >= 100) out = std::string(kEsHundreds[n / 100]);
  if (n % 100) out = join(out, es_below_100(n % 100, apocope));
  return out;
}

inline std::string es_below_million(int n, bool apocope) {
  std::string out;
  if (n >= 1000) {
    const int th = n / 1000;
    out = th == 1 ? std::string("mil") : join(es_below_1000(th, true), "mil");
  }
  if (n % 1000) out = join(out, es_below_1000(n % 1000, apocope));
  return out;
}

inline std::string spanish(std::int64_t n) {
  if (n == 0) return "cero";
  std::string out;
  if (n >= 1'000'000'000'000) {
    out = "un billón";
    n %= 1'000'000'000'000;
  }
  if (n >= 1'000'000) {
    const int m = static_cast<int>(n / 1'000'000);
    out = join(out, m == 1 ? std::string("un millón") : join(es_below_million(m, true), "millones"));
    n %= 1'000'000;
  }
  if (n) out = join(out, es_below_million(static_cast<int>(n), false));
  return out;
}

// --- French ----------------------------------------------------------------

inline constexpr std::array<std::string_view, 17> kFrOnes = {
    "zéro", "un", "deux", "trois", "quatre", "cinq", "six", "sept", "huit", "neuf",
    "dix", "onze", "douze", "treize", "quatorze", "quinze", "seize"};
inline constexpr std::array<std::string_view, 7> kFrTens = {
    "", "", "vingt", "trente", "quarante", "cinquante", "soixante"};

inline std::string fr_below_100(int n, bool multiplier) {
  if (n < 17) return std::string(kFrOnes[n]);
  if (n < 20) return join("dix", kFrOnes[n - 10]);
  const int t = n / 10;
  const int u = n % 10;
  if (t <= 6) {
    std::string out(kFrTens[t]);
    if (u == 1) return join(out, "et un");
    return u ? join(out, kFrOnes[u]) : out;
  }
  if (t == 7) return join("soixante", u == 1 ? std::string("et onze") : fr_below_100(10 + u, false));
  if (t == 8) {
    if (u == 0) return multiplier ? "quatre vingt" : "quatre vingts";
    return join("quatre vingt", kFrOnes[u]);
  }
  return join("quatre vingt", fr_below_100(10 + u, false));
}

// `multiplier` drops the plural "s" of "cents"/"vingts" in front of "mille".
inline std::string fr_below_1000(int n, bool multiplier) {
  std::string out;
  const int h = n / 100;
  const int r = n % 100;
  if (h == 1) {
    out = "cent";
  } else if (h > 1) {
    out = join(std::string(kFrOnes[h]), (r == 0 && !multiplier) ? "cents" : "cent");
  }
  if (r) out = join(out, fr_below_100(r, multiplier));
  return out;
}

inline std::string french(std::int64_t n) {
  if (n == 0) return "zéro";
  struct Scale {
    std::int64_t value;
    std::string_view singular;
    std::string_view plural;
  };
  static constexpr std::array<Scale, 3> kScales = {{
      {1'000'000'000'000, "billion", "billions"},
      {1'000'000'000, "milliard", "milliards"},
      {1'000'000, "million", "millions"},
  }};
  std::string out;
  for (const auto& s : kScales) {
    if (n >= s.value) {
      const int count = static_cast<int>(n / s.value);
      out = join(out, count == 1 ? join("un", s.singular)
                                 : join(fr_below_1000(count, false), s.plural));
      n %= s.value;
    }
  }
  if (n >= 1000) {
    const int th = static_cast<int>(n / 1000);
    out = join(out, th == 1 ? std::string("mille") : join(fr_below_1000(th, true), "mille"));
    n %= 1000;
  }
  if (n) out = join(out, fr_below_1000(static_cast<int>(n), false));
  return out;
}

}  // namespace numbers_detail

inline bool is_supported_number_language(std::string_view lang) {
  return lang == "en" || lang == "de" || lang == "es" || lang == "fr";
}

/// Spelled-out cardinal, lowercase. Accepts 0 through 10^12 inclusive.
inline std::string number_to_words(std::int64_t n, std::string_view lang) {
  if (!is_supported_number_language(lang)) {
    fail(ErrorKind::kDomain, "unsupported number language '" + std::string(lang) + "'");
  }
  if (n < 0 || n > kMaxSpelledNumber) {
    fail(ErrorKind::kDomain, "number " + std::to_string(n) + " outside [0, 10^12]");
  }
  if (lang == "en") return numbers_detail::english(n);
  if (lang == "de") return numbers_detail::german(n);
  if (lang == "es") return numbers_detail::spanish(n);
  return numbers_detail::french(n);
}

}  // namespace scribo::textnorm
