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

// Chunked inference with a small random network: the stitched output equals a
// single pass over the whole clip.

#include <cstdio>
#include <random>

#include "scribo/net.hpp"
#include "scribo/pipeline.hpp"

int main() {
  scribo::net::NetConfig cfg;
  cfg.name = "demo";
  cfg.prologue = {11, 2, 1, 64, true};
  cfg.blocks = {{3, 13, 64, 1, true}, {3, 17, 96, 1, true}};
  cfg.epilogue = {{29, 1, 2, 96, true}, {1, 1, 1, 128, false}};

  scribo::net::LoadedModel model;
  model.config = cfg;
  model.weights = scribo::net::random_weights(cfg, 1);
  model.alphabet = scribo::textnorm::AlphabetSpec::english();

  std::mt19937 rng(2);
  std::normal_distribution<float> noise(0.0f, 0.1f);
  scribo::features::AudioClip clip;
  clip.samples.resize(16000 * 6);
  for (auto& s : clip.samples) s = noise(rng);

  const auto rf = scribo::net::receptive_field(cfg);
  std::printf("parameters %lld, receptive reach %d input frames\n",
              static_cast<long long>(scribo::net::param_count(cfg)), rf.reach_input);

  const auto full = scribo::pipeline::transcribe(model, clip);
  std::printf("full     rtf %.4f  %s\n", full.report.rtf, full.text.substr(0, 48).c_str());
  for (double chunk : {2.0, 1.0, 0.25}) {
    scribo::pipeline::DecodeOptions options;
    options.chunk_seconds = chunk;
    const auto part = scribo::pipeline::transcribe(model, clip, options);
    std::printf("chunk %.2f s rtf %.4f  %s\n", chunk, part.report.rtf,
                part.text == full.text ? "identical transcript" : "transcript differs");
  }
}
