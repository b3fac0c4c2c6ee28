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

// Greedy versus LM-fused beam decoding on a hand-made posterior matrix where
// the acoustics slightly prefer a misspelling.

#include <cstdio>

#include "scribo/ctc.hpp"
#include "scribo/lm.hpp"

int main() {
  const scribo::textnorm::AlphabetSpec alphabet({" ", "a", "c", "o", "t", "h", "e"});
  // Frame-wise probabilities over " acothe" plus blank, spelling "the cot" / "the cat".
  const std::vector<std::vector<float>> probs = {
      {0.01f, 0.01f, 0.01f, 0.01f, 0.90f, 0.02f, 0.02f, 0.02f},  // t
      {0.01f, 0.01f, 0.01f, 0.01f, 0.02f, 0.90f, 0.02f, 0.02f},  // h
      {0.01f, 0.01f, 0.01f, 0.01f, 0.02f, 0.02f, 0.90f, 0.02f},  // e
      {0.90f, 0.01f, 0.01f, 0.01f, 0.02f, 0.02f, 0.01f, 0.02f},  // space
      {0.01f, 0.01f, 0.90f, 0.01f, 0.02f, 0.02f, 0.01f, 0.02f},  // c
      {0.01f, 0.44f, 0.01f, 0.48f, 0.02f, 0.02f, 0.01f, 0.01f},  // a or o
      {0.01f, 0.01f, 0.01f, 0.01f, 0.90f, 0.02f, 0.02f, 0.02f},  // t
  };
  scribo::ctc::LogitMatrix logits(probs.size(), probs[0].size());
  for (std::size_t t = 0; t < probs.size(); ++t) {
    for (std::size_t c = 0; c < probs[t].size(); ++c) logits(t, c) = std::log(probs[t][c]);
  }
  const auto lm = scribo::lm::parse_arpa_string(
      "\\data\\\nngram 1=4\nngram 2=2\n\n\\1-grams:\n-1.0 <unk>\n-0.6 the -0.3\n-0.7 cat\n-3.0 cot\n\n"
      "\\2-grams:\n-0.2 the cat\n-2.5 the cot\n\n\\end\\\n");

  std::printf("greedy:      %s\n", scribo::ctc::greedy_decode(logits, alphabet).c_str());
  const auto plain = scribo::ctc::beam_decode(logits, alphabet, {16, 0.0, 0.0, nullptr});
  std::printf("beam:        %s (%.3f)\n", plain[0].text.c_str(), plain[0].combined);
  const auto fused = scribo::ctc::beam_decode(logits, alphabet, {16, 0.8, 1.0, &lm});
  std::printf("beam + lm:   %s (%.3f)\n", fused[0].text.c_str(), fused[0].combined);
  for (std::size_t i = 0; i < std::min<std::size_t>(3, fused.size()); ++i) {
    std::printf("  #%zu %-10s acoustic %.3f  lm %.3f  words %d\n", i + 1, fused[i].text.c_str(), fused[i].acoustic_log,
                fused[i].lm_log10, fused[i].word_count);
  }
}
