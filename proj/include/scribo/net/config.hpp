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

#include <cctype>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "scribo/error.hpp"

namespace scribo::net {

/// One convolution layer: depthwise K x C_in followed by pointwise
/// C_in x C_out when separable, a plain pointwise conv when kernel == 1.
struct ConvSpec {
  int kernel = 1;
  int stride = 1;
  int dilation = 1;
  int channels = 0;
  bool separable = true;

  int padding() const { return dilation * (kernel - 1) / 2; }
  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

/// `repeat` separable sub-blocks sharing kernel and width, plus an optional
/// pointwise + batch-norm projection of the block input added before the
/// last ReLU.
struct BlockSpec {
  int repeat = 5;
  int kernel = 33;
  int channels = 256;
  int dilation = 1;
  bool residual = true;

  friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

struct NetConfig {
  std::string name = "custom";
  int input_features = 64;
  ConvSpec prologue{33, 2, 1, 256, true};
  std::vector<BlockSpec> blocks;
  std::vector<ConvSpec> epilogue;
  int vocab_size = 28;  // symbols without the blank
  double bn_epsilon = 1e-3;
  bool folded = false;  // batch norm merged into conv biases

  int output_width() const { return vocab_size + 1; }
  int final_channels() const { return epilogue.empty() ? last_block_channels() : epilogue.back().channels; }
  int last_block_channels() const { return blocks.empty() ? prologue.channels : blocks.back().channels; }

  void validate() const {
    auto check_conv = [](const ConvSpec& c, const std::string& what) {
      if (c.kernel < 1 || c.kernel % 2 == 0) fail(ErrorKind::kSchema, what + ": kernel must be odd and >= 1");
      if (c.stride < 1 || c.dilation < 1 || c.channels < 1) {
        fail(ErrorKind::kSchema, what + ": stride, dilation and channels must be >= 1");
      }
      if (!c.separable && c.kernel != 1) fail(ErrorKind::kSchema, what + ": dense convs must be pointwise");
    };
    if (input_features < 1) fail(ErrorKind::kSchema, "input_features must be >= 1");
    if (vocab_size < 1) fail(ErrorKind::kSchema, "vocab_size must be >= 1");
    if (!(bn_epsilon > 0)) fail(ErrorKind::kSchema, "bn_epsilon must be positive");
    check_conv(prologue, "prologue");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& b = blocks[i];
      if (b.repeat < 1) fail(ErrorKind::kSchema, "block " + std::to_string(i) + ": repeat must be >= 1");
      check_conv({b.kernel, 1, b.dilation, b.channels, true}, "block " + std::to_string(i));
    }
    for (std::size_t i = 0; i < epilogue.size(); ++i) {
      check_conv(epilogue[i], "epilogue " + std::to_string(i));
      if (epilogue[i].stride != 1) fail(ErrorKind::kSchema, "only the prologue may be strided");
    }
  }

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// QuartzNet 15x5: 5 groups of 3 blocks, 5 sub-blocks each.
inline NetConfig quartznet15x5(int vocab_size = 28, int input_features = 64) {
  NetConfig cfg;
  cfg.name = "QuartzNet15x5";
  cfg.input_features = input_features;
  cfg.vocab_size = vocab_size;
  cfg.prologue = {33, 2, 1, 256, true};
  const int kernels[] = {33, 39, 51, 63, 75};
  const int channels[] = {256, 256, 512, 512, 512};
  for (int g = 0; g < 5; ++g) {
    for (int r = 0; r < 3; ++r) cfg.blocks.push_back({5, kernels[g], channels[g], 1, true});
  }
  cfg.epilogue = {{87, 1, 2, 512, true}, {1, 1, 1, 1024, false}};
  return cfg;
}

/// QuartzNet 5x5: one block per group.
inline NetConfig quartznet5x5(int vocab_size = 28, int input_features = 64) {
  NetConfig cfg = quartznet15x5(vocab_size, input_features);
  cfg.name = "QuartzNet5x5";
  std::vector<BlockSpec> blocks;
  for (std::size_t i = 0; i < cfg.blocks.size(); i += 3) blocks.push_back(cfg.blocks[i]);
  cfg.blocks = blocks;
  return cfg;
}

/// Case-insensitive; the "quartznet" prefix is optional.
inline NetConfig preset(const std::string& name, int vocab_size = 28) {
  std::string key;
  for (char c : name) key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (key.starts_with("quartznet")) key.erase(0, 9);
  if (key == "15x5") return quartznet15x5(vocab_size);
  if (key == "5x5") return quartznet5x5(vocab_size);
  fail(ErrorKind::kDomain, "unknown network preset '" + name + "' (known: QuartzNet15x5, QuartzNet5x5)");
}

// ---------------------------------------------------------------------------
// Tensor layout

struct TensorSpec {
  std::string name;
  std::vector<std::int64_t> shape;
};

/// A conv layer as it appears in the weight table.
struct LayerSpec {
  std::string prefix;
  ConvSpec conv;
  int in_channels = 0;
  bool batch_norm = true;
};

/// Every conv layer in execution order, residual projections right after
/// their block's last sub-block, the output layer last.
inline std::vector<LayerSpec> layer_specs(const NetConfig& cfg) {
  std::vector<LayerSpec> layers;
  layers.push_back({"prologue", cfg.prologue, cfg.input_features, true});
  int channels = cfg.prologue.channels;
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
    const auto& b = cfg.blocks[i];
    const std::string bp = "b" + std::to_string(i + 1);
    int in = channels;
    for (int j = 0; j < b.repeat; ++j) {
      layers.push_back({bp + ".s" + std::to_string(j + 1), {b.kernel, 1, b.dilation, b.channels, true}, in, true});
      in = b.channels;
    }
    if (b.residual) layers.push_back({bp + ".res", {1, 1, 1, b.channels, false}, channels, true});
    channels = b.channels;
  }
  for (std::size_t k = 0; k < cfg.epilogue.size(); ++k) {
    layers.push_back({"epi" + std::to_string(k + 1), cfg.epilogue[k], channels, true});
    channels = cfg.epilogue[k].channels;
  }
  layers.push_back({"out", {1, 1, 1, cfg.output_width(), false}, channels, false});
  return layers;
}

inline bool has_depthwise(const LayerSpec& l) { return l.conv.separable && l.conv.kernel > 1; }

/// Tensor names and shapes the config requires, in layer order.
inline std::vector<TensorSpec> tensor_specs(const NetConfig& cfg) {
  std::vector<TensorSpec> out;
  for (const auto& l : layer_specs(cfg)) {
    const std::int64_t in = l.in_channels, co = l.conv.channels;
    if (has_depthwise(l)) out.push_back({l.prefix + ".dw", {l.conv.kernel, in}});
    out.push_back({l.prefix + ".pw", {in, co}});
    if (!l.batch_norm || cfg.folded) {
      out.push_back({l.prefix + ".bias", {co}});
    } else {
      for (const char* p : {".bn.gamma", ".bn.beta", ".bn.mean", ".bn.var"}) out.push_back({l.prefix + p, {co}});
    }
  }
  return out;
}

/// Trainable parameters of one layer: kernels plus either the batch-norm
/// affine pair or a bias.
inline std::int64_t layer_param_count(const ConvSpec& conv, int in_channels, bool batch_norm, bool bias) {
  std::int64_t n = static_cast<std::int64_t>(in_channels) * conv.channels;
  if (conv.separable && conv.kernel > 1) n += static_cast<std::int64_t>(conv.kernel) * in_channels;
  if (batch_norm) n += 2 * static_cast<std::int64_t>(conv.channels);
  if (bias) n += conv.channels;
  return n;
}

/// Trainable parameters (running statistics excluded).
inline std::int64_t param_count(const NetConfig& cfg) {
  std::int64_t n = 0;
  for (const auto& l : layer_specs(cfg)) {
    const bool bn = l.batch_norm && !cfg.folded;
    n += layer_param_count(l.conv, l.in_channels, bn, !bn);
  }
  return n;
}

/// Context needed on each side of an output frame, in input frames, and
/// the full receptive field width.
struct ReceptiveField {
  int input_frames = 1;      // total width in input frames
  int reach_input = 0;       // one-sided reach in input frames
  int reach_output = 0;      // one-sided reach in output frames (rounded up)
  int stride = 1;            // input frames per output frame
};

inline ReceptiveField receptive_field(const NetConfig& cfg) {
  ReceptiveField rf;
  int stride = 1;
  int reach = 0;
  for (const auto& l : layer_specs(cfg)) {
    reach += stride * l.conv.padding();
    stride *= l.conv.stride;
  }
  rf.stride = stride;
  rf.reach_input = reach;
  rf.input_frames = 2 * reach + 1;
  rf.reach_output = (reach + stride - 1) / stride;
  return rf;
}

/// Output frames for T input frames ("same" padding, one strided layer).
inline std::size_t output_frames(const NetConfig& cfg, std::size_t input_frames) {
  std::size_t t = input_frames;
  for (const auto& l : layer_specs(cfg)) {
    const auto s = static_cast<std::size_t>(l.conv.stride);
    t = (t + s - 1) / s;
  }
  return t;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json conv_to_json(const ConvSpec& c) {
  return {{"kernel", c.kernel}, {"stride", c.stride}, {"dilation", c.dilation},
          {"channels", c.channels}, {"separable", c.separable}};
}

inline ConvSpec conv_from_json(const nlohmann::json& j) {
  ConvSpec c;
  c.kernel = j.at("kernel").get<int>();
  c.stride = j.value("stride", 1);
  c.dilation = j.value("dilation", 1);
  c.channels = j.at("channels").get<int>();
  c.separable = j.value("separable", true);
  return c;
}

inline nlohmann::json config_to_json(const NetConfig& cfg) {
  nlohmann::json blocks = nlohmann::json::array(), epi = nlohmann::json::array();
  for (const auto& b : cfg.blocks) {
    blocks.push_back({{"repeat", b.repeat}, {"kernel", b.kernel}, {"channels", b.channels},
                      {"dilation", b.dilation}, {"residual", b.residual}});
  }
  for (const auto& e : cfg.epilogue) epi.push_back(conv_to_json(e));
  return {{"name", cfg.name},         {"input_features", cfg.input_features}, {"vocab_size", cfg.vocab_size},
          {"bn_epsilon", cfg.bn_epsilon}, {"folded", cfg.folded},          {"prologue", conv_to_json(cfg.prologue)},
          {"blocks", blocks},         {"epilogue", epi}};
}

inline NetConfig config_from_json(const nlohmann::json& j) {
  try {
    NetConfig cfg;
    cfg.name = j.value("name", cfg.name);
    cfg.input_features = j.at("input_features").get<int>();
    cfg.vocab_size = j.at("vocab_size").get<int>();
    cfg.bn_epsilon = j.value("bn_epsilon", cfg.bn_epsilon);
    cfg.folded = j.value("folded", false);
    cfg.prologue = conv_from_json(j.at("prologue"));
    for (const auto& b : j.at("blocks")) {
      cfg.blocks.push_back({b.at("repeat").get<int>(), b.at("kernel").get<int>(), b.at("channels").get<int>(),
                            b.value("dilation", 1), b.value("residual", true)});
    }
    for (const auto& e : j.at("epilogue")) cfg.epilogue.push_back(conv_from_json(e));
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kSchema, std::string("network config: ") + e.what());
  }
}

}  // namespace scribo::net
