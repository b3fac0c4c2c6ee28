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

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <cstring>
#include <string>
#include <vector>

#include "json.hpp"
#include "scribo/error.hpp"
#include "scribo/features.hpp"
#include "scribo/net/config.hpp"
#include "scribo/textnorm.hpp"

namespace scribo::net {

static_assert(std::endian::native == std::endian::little, "weight blobs are little-endian");

struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline std::string shape_string(const std::vector<std::int64_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? ", " : "") + std::to_string(shape[i]);
  return s + "]";
}

class NetworkWeights {
 public:
  void set(const std::string& name, Tensor t) {
    if (static_cast<std::int64_t>(t.data.size()) != t.numel()) {
      fail(ErrorKind::kShape, "tensor '" + name + "' data does not match shape " + shape_string(t.shape));
    }
    tensors_[name] = std::move(t);
  }
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  const Tensor& get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) fail(ErrorKind::kMissing, "missing tensor '" + name + "'");
    return it->second;
  }
  Tensor& get_mutable(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) fail(ErrorKind::kMissing, "missing tensor '" + name + "'");
    return it->second;
  }
  void erase(const std::string& name) { tensors_.erase(name); }
  const std::map<std::string, Tensor>& tensors() const { return tensors_; }
  std::size_t size() const { return tensors_.size(); }

  friend bool operator==(const NetworkWeights&, const NetworkWeights&) = default;

 private:
  std::map<std::string, Tensor> tensors_;
};

/// Checks names, shapes and positive variances against the config.
inline void validate_weights(const NetConfig& cfg, const NetworkWeights& w) {
  const auto specs = tensor_specs(cfg);
  for (const auto& s : specs) {
    if (!w.contains(s.name)) fail(ErrorKind::kMissing, "missing tensor '" + s.name + "'");
    const Tensor& t = w.get(s.name);
    if (t.shape != s.shape) {
      fail(ErrorKind::kShape, "tensor '" + s.name + "' has shape " + shape_string(t.shape) + ", expected " +
                                  shape_string(s.shape));
    }
    if (s.name.size() > 7 && s.name.compare(s.name.size() - 7, 7, ".bn.var") == 0) {
      for (float v : t.data) {
        if (!(v > 0)) fail(ErrorKind::kDomain, "tensor '" + s.name + "' has a non-positive variance");
      }
    }
  }
  if (w.size() != specs.size()) {
    std::set<std::string> known;
    for (const auto& s : specs) known.insert(s.name);
    for (const auto& [name, t] : w.tensors()) {
      if (!known.count(name)) fail(ErrorKind::kSchema, "unexpected tensor '" + name + "'");
    }
  }
}

/// He-style random weights with mild batch-norm statistics; keeps
/// activations in a sane range through deep stacks.
inline NetworkWeights random_weights(const NetConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::uniform_real_distribution<float> uniform(0.0f, 1.0f);
  NetworkWeights w;
  for (const auto& l : layer_specs(cfg)) {
    const auto in = static_cast<std::int64_t>(l.in_channels), co = static_cast<std::int64_t>(l.conv.channels);
    if (has_depthwise(l)) {
      Tensor t{{l.conv.kernel, in}, std::vector<float>(static_cast<std::size_t>(l.conv.kernel * in))};
      const float sd = 1.0f / std::sqrt(static_cast<float>(l.conv.kernel));
      for (float& v : t.data) v = normal(rng) * sd;
      w.set(l.prefix + ".dw", std::move(t));
    }
    Tensor pw{{in, co}, std::vector<float>(static_cast<std::size_t>(in * co))};
    const float sd = std::sqrt(2.0f / static_cast<float>(in)) * (l.batch_norm ? 1.0f : 0.5f);
    for (float& v : pw.data) v = normal(rng) * sd;
    w.set(l.prefix + ".pw", std::move(pw));
    auto vec = [&](float lo, float hi) {
      Tensor t{{co}, std::vector<float>(static_cast<std::size_t>(co))};
      for (float& v : t.data) v = lo + (hi - lo) * uniform(rng);
      return t;
    };
    if (!l.batch_norm || cfg.folded) {
      w.set(l.prefix + ".bias", vec(-0.1f, 0.1f));
    } else {
      w.set(l.prefix + ".bn.gamma", vec(0.5f, 1.0f));
      w.set(l.prefix + ".bn.beta", vec(-0.1f, 0.1f));
      w.set(l.prefix + ".bn.mean", vec(-0.2f, 0.2f));
      w.set(l.prefix + ".bn.var", vec(0.5f, 2.0f));
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Weight manifest: <dir>/manifest.json + <dir>/weights.bin

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kBlobFile = "weights.bin";
inline constexpr const char* kFormatName = "scribo-weights";

struct LoadedModel {
  std::string name;
  NetConfig config;
  NetworkWeights weights;
  features::FeatureConfig features;
  textnorm::AlphabetSpec alphabet;
};

inline std::string crc32_hex(const std::string& bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), n);
    pos += n;
  }
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

namespace detail {

/// Writes `<dir>/weights.bin` and `<dir>/manifest.json`; `manifest` receives
/// the tensor table and blob descriptor.
inline std::filesystem::path write_store(const std::filesystem::path& dir, nlohmann::json manifest,
                                         const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  std::string blob;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& [name, t] : tensors) {
    const std::size_t bytes = t->data.size() * sizeof(float);
    table.push_back({{"name", name}, {"shape", t->shape}, {"dtype", "f32"}, {"offset", blob.size()}, {"length", bytes}});
    blob.append(reinterpret_cast<const char*>(t->data.data()), bytes);
  }
  manifest["tensors"] = table;
  manifest["blob"] = {{"file", kBlobFile}, {"bytes", blob.size()}, {"crc32", crc32_hex(blob)}};
  {
    std::ofstream out(dir / kBlobFile, std::ios::binary | std::ios::trunc);
    if (!out || !out.write(blob.data(), static_cast<std::streamsize>(blob.size()))) {
      fail(ErrorKind::kIo, "cannot write " + (dir / kBlobFile).string());
    }
  }
  std::ofstream out(dir / kManifestFile, std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + (dir / kManifestFile).string());
  out << manifest.dump(2) << '\n';
  return dir / kManifestFile;
}

inline std::filesystem::path manifest_path_of(const std::filesystem::path& path) {
  return std::filesystem::is_directory(path) ? path / kManifestFile : path;
}

inline nlohmann::json read_manifest_json(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) fail(ErrorKind::kMissing, "no manifest at " + manifest_path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, manifest_path.string() + ": " + e.what());
  }
}

/// Reads and verifies the blob, then slices the tensor table out of it.
/// JSON access errors surface as nlohmann exceptions for the caller to map.
inline std::vector<std::pair<std::string, Tensor>> read_store(const std::filesystem::path& dir,
                                                              const nlohmann::json& j) {
  const auto& b = j.at("blob");
  const std::filesystem::path blob_path = dir / b.value("file", std::string(kBlobFile));
  std::ifstream bin(blob_path, std::ios::binary);
  if (!bin) fail(ErrorKind::kMissing, "missing tensor blob " + blob_path.string());
  const std::string blob(std::istreambuf_iterator<char>(bin), {});
  const auto expected_bytes = b.at("bytes").get<std::uint64_t>();
  if (blob.size() != expected_bytes) {
    fail(ErrorKind::kFormat, "tensor blob has " + std::to_string(blob.size()) + " bytes, manifest declares " +
                                 std::to_string(expected_bytes));
  }
  if (crc32_hex(blob) != b.at("crc32").get<std::string>()) fail(ErrorKind::kFormat, "tensor blob checksum mismatch");
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& t : j.at("tensors")) {
    const auto name = t.at("name").get<std::string>();
    if (t.value("dtype", "f32") != "f32") fail(ErrorKind::kSchema, "tensor '" + name + "' is not f32");
    Tensor tensor;
    tensor.shape = t.at("shape").get<std::vector<std::int64_t>>();
    const auto offset = t.at("offset").get<std::uint64_t>();
    const auto length = t.at("length").get<std::uint64_t>();
    if (length != static_cast<std::uint64_t>(tensor.numel()) * sizeof(float)) {
      fail(ErrorKind::kShape, "tensor '" + name + "' length does not match its shape");
    }
    if (offset + length > blob.size() || offset % sizeof(float) != 0) {
      fail(ErrorKind::kFormat, "tensor '" + name + "' lies outside the blob");
    }
    tensor.data.resize(static_cast<std::size_t>(tensor.numel()));
    std::memcpy(tensor.data.data(), blob.data() + offset, length);
    out.emplace_back(name, std::move(tensor));
  }
  return out;
}

}  // namespace detail

/// Writes tensors in config order. Returns the manifest path.
inline std::filesystem::path save_weights(const std::filesystem::path& dir, const NetConfig& cfg,
                                          const NetworkWeights& weights, const features::FeatureConfig& feats,
                                          const textnorm::AlphabetSpec& alphabet) {
  validate_weights(cfg, weights);
  if (alphabet.size() != static_cast<std::size_t>(cfg.vocab_size)) {
    fail(ErrorKind::kShape, "alphabet size " + std::to_string(alphabet.size()) + " != vocab_size " +
                                std::to_string(cfg.vocab_size));
  }
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (const auto& s : tensor_specs(cfg)) tensors.emplace_back(s.name, &weights.get(s.name));
  const nlohmann::json manifest = {{"format", kFormatName},
                                   {"version", 1},
                                   {"model", cfg.name},
                                   {"config", config_to_json(cfg)},
                                   {"features", feats},
                                   {"alphabet", alphabet.to_json()}};
  return detail::write_store(dir, manifest, tensors);
}

/// Accepts the model directory or its manifest.json.
inline LoadedModel load_weights(const std::filesystem::path& path) {
  const auto manifest_path = detail::manifest_path_of(path);
  const auto j = detail::read_manifest_json(manifest_path);
  LoadedModel m;
  try {
    if (j.value("format", "") != kFormatName) fail(ErrorKind::kSchema, "not a " + std::string(kFormatName) + " manifest");
    m.config = config_from_json(j.at("config"));
    m.name = j.value("model", m.config.name);
    m.features = j.at("features").get<features::FeatureConfig>();
    m.alphabet = textnorm::AlphabetSpec::from_json(j.at("alphabet"));
    for (auto& [name, t] : detail::read_store(manifest_path.parent_path(), j)) m.weights.set(name, std::move(t));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kSchema, manifest_path.string() + ": " + e.what());
  }
  validate_weights(m.config, m.weights);
  if (m.alphabet.size() != static_cast<std::size_t>(m.config.vocab_size)) {
    fail(ErrorKind::kShape, "alphabet size does not match vocab_size");
  }
  if (m.features.mel_bins != m.config.input_features) {
    fail(ErrorKind::kShape, "feature mel_bins does not match input_features");
  }
  return m;
}

// ---------------------------------------------------------------------------
// Generic tensor store in the same layout, used for logit dumps.

inline constexpr const char* kTensorFormatName = "scribo-tensors";

inline std::filesystem::path save_tensors(const std::filesystem::path& dir,
                                          const std::vector<std::pair<std::string, Tensor>>& tensors) {
  std::vector<std::pair<std::string, const Tensor*>> refs;
  for (const auto& [name, t] : tensors) refs.emplace_back(name, &t);
  return detail::write_store(dir, {{"format", kTensorFormatName}, {"version", 1}}, refs);
}

/// Reads a tensor store or a weight manifest.
inline std::vector<std::pair<std::string, Tensor>> load_tensors(const std::filesystem::path& path) {
  const auto manifest_path = detail::manifest_path_of(path);
  const auto j = detail::read_manifest_json(manifest_path);
  try {
    const auto format = j.value("format", "");
    if (format != kTensorFormatName && format != kFormatName) {
      fail(ErrorKind::kSchema, manifest_path.string() + ": unknown tensor store format '" + format + "'");
    }
    return detail::read_store(manifest_path.parent_path(), j);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kSchema, manifest_path.string() + ": " + e.what());
  }
}

}  // namespace scribo::net
