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

// Builds a small folder-style dataset, converts it to a manifest corpus,
// cleans it and draws a speaker-disjoint split.

#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "scribo/corpus.hpp"

int main() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "scribo_corpus_demo";
  fs::remove_all(root);
  fs::create_directories(root / "raw");

  std::mt19937 rng(3);
  const char* sentences[] = {"guten morgen", "wie geht es dir", "das wetter ist schön heute", "ja",
                             "ich habe drei äpfel gekauft"};
  for (int i = 0; i < 60; ++i) {
    const int rate = i % 2 ? 44100 : 22050;
    const double seconds = 0.3 + 0.2 * static_cast<double>(rng() % 20);
    std::vector<std::int16_t> pcm(static_cast<std::size_t>(seconds * rate));
    for (auto& s : pcm) s = static_cast<std::int16_t>(static_cast<int>(rng() % 2000) - 1000);
    const std::string stem = "s" + std::to_string(10 + i % 12) + "_" + std::to_string(i);
    scribo::wav::write_pcm16(root / "raw" / (stem + ".wav"), pcm, rate);
    std::ofstream(root / "raw" / (stem + ".txt")) << sentences[i % 5] << "\n";
  }

  auto ds = scribo::corpus::read_dataset("folder-txt", root / "raw");
  for (auto& item : ds.items) item.speaker = item.filepath.substr(0, 3);
  const auto manifest = scribo::corpus::write_dataset(ds.items, ds.root, "manifest-csv", root / "corpus", {.workers = 2});
  const auto corpus = scribo::corpus::read_manifest(manifest);
  std::printf("converted %zu items into %s\n", corpus.items.size(), manifest.c_str());

  const auto report = scribo::corpus::clean_corpus(corpus.items);
  std::printf("kept %zu, excluded %zu (avg %.2f chars/s, %.2f s)\n", report.kept.size(), report.excluded.size(),
              report.average_cps, report.average_duration);
  for (const auto& e : report.excluded) {
    std::printf("  metric %d  %5.2f s  %s\n", e.metric, e.item.duration, e.item.text.c_str());
  }

  scribo::corpus::SplitPolicy policy{{{"train", 0.7}, {"dev", 0.15}, {"test", 0.15}}, 11, "speaker"};
  for (const auto& part : scribo::corpus::split_dataset(report.kept, policy)) {
    std::set<std::string> speakers;
    for (const auto& item : part.items) speakers.insert(*item.speaker);
    std::printf("%-5s %2zu items, %zu speakers\n", part.name.c_str(), part.items.size(), speakers.size());
  }
}
