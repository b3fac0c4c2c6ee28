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

#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "scribo/error.hpp"
#include "scribo/net/config.hpp"
#include "scribo/net/weights.hpp"
#include "scribo/textnorm.hpp"

namespace scribo::net {

struct AdaptPolicy {
  enum class Mode { kExtend, kShrink };
  enum class Init { kZero, kUniform };

  Mode mode = Mode::kExtend;
  Init init = Init::kZero;
  float scale = 0.01f;  // uniform(-scale, scale) for new rows
  std::uint64_t seed = 0;
  /// Target symbol -> source symbol, or nullopt for a new symbol.
  std::vector<std::pair<std::string, std::optional<std::string>>> mapping;
};

/// Maps each target symbol to the identical source symbol, or marks it new.
inline std::vector<std::pair<std::string, std::optional<std::string>>> default_mapping(
    const textnorm::AlphabetSpec& src, const textnorm::AlphabetSpec& tgt) {
  std::vector<std::pair<std::string, std::optional<std::string>>> m;
  for (const auto& s : tgt.symbols()) {
    if (src.index_of(s)) {
      m.emplace_back(s, s);
    } else {
      m.emplace_back(s, std::nullopt);
    }
  }
  return m;
}

/// Rebuilds the output layer for a new alphabet: mapped symbols copy their
/// source column verbatim, new symbols are initialized per policy, dropped
/// symbols disappear, and the blank stays last. Every other tensor is left
/// untouched.
inline std::pair<NetConfig, NetworkWeights> adapt_alphabet(const NetConfig& cfg, const NetworkWeights& w,
                                                           const textnorm::AlphabetSpec& src,
                                                           const textnorm::AlphabetSpec& tgt,
                                                           const AdaptPolicy& policy) {
  if (src.size() != static_cast<std::size_t>(cfg.vocab_size)) {
    fail(ErrorKind::kShape, "source alphabet has " + std::to_string(src.size()) + " symbols, network has " +
                                std::to_string(cfg.vocab_size));
  }
  validate_weights(cfg, w);
  std::vector<std::optional<int>> source_of(tgt.size());
  std::vector<bool> covered(tgt.size(), false);
  std::set<int> used_sources;
  for (const auto& [target, source] : policy.mapping) {
    const auto ti = tgt.index_of(target);
    if (!ti) fail(ErrorKind::kDomain, "mapping names '" + target + "', which is not in the target alphabet");
    if (covered[static_cast<std::size_t>(*ti)]) fail(ErrorKind::kDomain, "duplicate mapping for target '" + target + "'");
    covered[static_cast<std::size_t>(*ti)] = true;
    if (source) {
      const auto si = src.index_of(*source);
      if (!si) fail(ErrorKind::kDomain, "mapping references unknown source symbol '" + *source + "'");
      source_of[static_cast<std::size_t>(*ti)] = *si;
      used_sources.insert(*si);
    } else if (policy.mode == AdaptPolicy::Mode::kShrink) {
      fail(ErrorKind::kDomain, "shrink mode cannot introduce new symbol '" + target + "'");
    }
  }
  for (std::size_t i = 0; i < tgt.size(); ++i) {
    if (!covered[i]) fail(ErrorKind::kDomain, "mapping does not cover target symbol '" + tgt.symbol(i) + "'");
  }
  if (policy.mode == AdaptPolicy::Mode::kExtend && used_sources.size() != src.size()) {
    fail(ErrorKind::kDomain, "extend mode must keep every source symbol; use shrink to drop symbols");
  }

  const Tensor& pw = w.get("out.pw");
  const Tensor& bias = w.get("out.bias");
  const auto cin = static_cast<std::size_t>(pw.shape[0]);
  const auto old_cols = static_cast<std::size_t>(pw.shape[1]);
  const std::size_t new_cols = tgt.size() + 1;
  Tensor new_pw{{static_cast<std::int64_t>(cin), static_cast<std::int64_t>(new_cols)},
                std::vector<float>(cin * new_cols, 0.0f)};
  Tensor new_bias{{static_cast<std::int64_t>(new_cols)}, std::vector<float>(new_cols, 0.0f)};
  std::mt19937_64 rng(policy.seed);
  std::uniform_real_distribution<float> uniform(-policy.scale, policy.scale);
  for (std::size_t j = 0; j < new_cols; ++j) {
    const bool blank = j == tgt.size();
    const std::optional<int> from = blank ? std::optional<int>(static_cast<int>(old_cols - 1)) : source_of[j];
    if (from) {
      const auto s = static_cast<std::size_t>(*from);
      for (std::size_t i = 0; i < cin; ++i) new_pw.data[i * new_cols + j] = pw.data[i * old_cols + s];
      new_bias.data[j] = bias.data[s];
    } else if (policy.init == AdaptPolicy::Init::kUniform) {
      for (std::size_t i = 0; i < cin; ++i) new_pw.data[i * new_cols + j] = uniform(rng);
    }
  }
  NetConfig out_cfg = cfg;
  out_cfg.vocab_size = static_cast<int>(tgt.size());
  NetworkWeights out = w;
  out.set("out.pw", std::move(new_pw));
  out.set("out.bias", std::move(new_bias));
  validate_weights(out_cfg, out);
  return {out_cfg, out};
}

}  // namespace scribo::net
