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
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "scribo/ctc.hpp"
#include "scribo/error.hpp"
#include "scribo/features.hpp"
#include "scribo/matrix.hpp"
#include "scribo/net/config.hpp"
#include "scribo/net/weights.hpp"

namespace scribo::net {

using Activations = Matrix<float>;  // rows are time frames

namespace kernels {

/// Per-channel 1-D convolution, "same" padding; out has ceil(T / stride) rows.
inline Activations depthwise(const Activations& in, const Tensor& w, int stride, int dilation) {
  const auto kernel = static_cast<std::ptrdiff_t>(w.shape[0]);
  const std::size_t channels = in.cols();
  const std::ptrdiff_t pad = dilation * (kernel - 1) / 2;
  const auto rows = static_cast<std::ptrdiff_t>(in.rows());
  const std::size_t out_rows = (in.rows() + static_cast<std::size_t>(stride) - 1) / static_cast<std::size_t>(stride);
  Activations out(out_rows, channels);
  for (std::size_t to = 0; to < out_rows; ++to) {
    float* acc = out.row(to).data();
    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(to) * stride - pad;
    for (std::ptrdiff_t k = 0; k < kernel; ++k) {
      const std::ptrdiff_t ti = base + k * dilation;
      if (ti < 0 || ti >= rows) continue;
      const float* x = in.row(static_cast<std::size_t>(ti)).data();
      const float* wk = w.data.data() + static_cast<std::size_t>(k) * channels;
      for (std::size_t c = 0; c < channels; ++c) acc[c] += wk[c] * x[c];
    }
  }
  return out;
}

inline constexpr std::size_t kRowTile = 4;
inline constexpr std::size_t kColTile = 256;

template <std::size_t Rows>
inline void gemm_tile(const float* a, std::size_t lda, const float* w, std::size_t ldw, std::size_t cin,
                      std::size_t cols, float* out, std::size_t ldo) {
  float acc[Rows][kColTile] = {};
  for (std::size_t ci = 0; ci < cin; ++ci) {
    const float* wr = w + ci * ldw;
    for (std::size_t r = 0; r < Rows; ++r) {
      const float av = a[r * lda + ci];
      float* ar = acc[r];
      for (std::size_t c = 0; c < cols; ++c) ar[c] += av * wr[c];
    }
  }
  for (std::size_t r = 0; r < Rows; ++r) std::copy(acc[r], acc[r] + cols, out + r * ldo);
}

/// out = in x W for W of shape [C_in, C_out]. Blocked over rows and output
/// columns; every element accumulates over C_in in ascending order, so the
/// result for a row never depends on how many rows are processed.
inline Activations pointwise(const Activations& in, const Tensor& w) {
  const auto cin = static_cast<std::size_t>(w.shape[0]);
  const auto cout = static_cast<std::size_t>(w.shape[1]);
  if (in.cols() != cin) {
    fail(ErrorKind::kShape, "pointwise input width " + std::to_string(in.cols()) + " != " + std::to_string(cin));
  }
  Activations out(in.rows(), cout);
  for (std::size_t t0 = 0; t0 < in.rows(); t0 += kRowTile) {
    const std::size_t rows = std::min(kRowTile, in.rows() - t0);
    for (std::size_t c0 = 0; c0 < cout; c0 += kColTile) {
      const std::size_t cols = std::min(kColTile, cout - c0);
      const float* a = in.row(t0).data();
      const float* wb = w.data.data() + c0;
      float* o = out.row(t0).data() + c0;
      switch (rows) {
        case 4: gemm_tile<4>(a, cin, wb, cout, cin, cols, o, cout); break;
        case 3: gemm_tile<3>(a, cin, wb, cout, cin, cols, o, cout); break;
        case 2: gemm_tile<2>(a, cin, wb, cout, cin, cols, o, cout); break;
        default: gemm_tile<1>(a, cin, wb, cout, cin, cols, o, cout); break;
      }
    }
  }
  return out;
}

struct Affine {
  std::vector<float> scale;  // empty means 1
  std::vector<float> shift;
};

inline Affine batch_norm_affine(const NetworkWeights& w, const std::string& prefix, double eps) {
  const auto& gamma = w.get(prefix + ".bn.gamma").data;
  const auto& beta = w.get(prefix + ".bn.beta").data;
  const auto& mean = w.get(prefix + ".bn.mean").data;
  const auto& var = w.get(prefix + ".bn.var").data;
  Affine a;
  a.scale.resize(gamma.size());
  a.shift.resize(gamma.size());
  for (std::size_t c = 0; c < gamma.size(); ++c) {
    if (!(var[c] > 0)) fail(ErrorKind::kDomain, prefix + ": non-positive batch-norm variance");
    const double s = gamma[c] / std::sqrt(static_cast<double>(var[c]) + eps);
    a.scale[c] = static_cast<float>(s);
    a.shift[c] = static_cast<float>(beta[c] - mean[c] * s);
  }
  return a;
}

inline void apply_affine(Activations& x, const Affine& a) {
  for (std::size_t t = 0; t < x.rows(); ++t) {
    float* r = x.row(t).data();
    if (a.scale.empty()) {
      for (std::size_t c = 0; c < x.cols(); ++c) r[c] += a.shift[c];
    } else {
      for (std::size_t c = 0; c < x.cols(); ++c) r[c] = r[c] * a.scale[c] + a.shift[c];
    }
  }
}

inline void add_inplace(Activations& x, const Activations& y) {
  float* a = x.data();
  const float* b = y.data();
  for (std::size_t i = 0; i < x.values().size(); ++i) a[i] += b[i];
}

inline void relu(Activations& x) {
  float* a = x.data();
  for (std::size_t i = 0; i < x.values().size(); ++i) a[i] = std::max(a[i], 0.0f);
}

}  // namespace kernels

namespace detail {

inline kernels::Affine layer_affine(const NetConfig& cfg, const NetworkWeights& w, const LayerSpec& l) {
  if (!l.batch_norm || cfg.folded) return {{}, w.get(l.prefix + ".bias").data};
  return kernels::batch_norm_affine(w, l.prefix, cfg.bn_epsilon);
}

/// Conv + batch norm (or bias), no activation.
inline Activations apply_layer(const NetConfig& cfg, const NetworkWeights& w, const LayerSpec& l, const Activations& x) {
  Activations h = has_depthwise(l) ? kernels::depthwise(x, w.get(l.prefix + ".dw"), l.conv.stride, l.conv.dilation)
                                   : Activations{};
  if (!has_depthwise(l) && l.conv.stride != 1) {
    fail(ErrorKind::kSchema, l.prefix + ": strided layers must be separable with kernel > 1");
  }
  Activations y = kernels::pointwise(has_depthwise(l) ? h : x, w.get(l.prefix + ".pw"));
  kernels::apply_affine(y, layer_affine(cfg, w, l));
  return y;
}

}  // namespace detail

/// Pre-softmax outputs, ceil(T/2) x (V+1) for the stride-2 presets.
inline Matrix<float> forward_logits(const NetConfig& cfg, const NetworkWeights& w, const features::FeatureMatrix& x) {
  if (x.cols() != static_cast<std::size_t>(cfg.input_features)) {
    fail(ErrorKind::kShape, "feature width " + std::to_string(x.cols()) + " != input_features " +
                                std::to_string(cfg.input_features));
  }
  if (x.rows() == 0) fail(ErrorKind::kDomain, "forward needs at least one frame");
  const auto layers = layer_specs(cfg);
  std::size_t li = 0;
  Activations h = detail::apply_layer(cfg, w, layers[li++], x);
  kernels::relu(h);
  for (const auto& b : cfg.blocks) {
    const Activations block_in = h;
    for (int j = 0; j < b.repeat; ++j) {
      h = detail::apply_layer(cfg, w, layers[li++], h);
      if (j + 1 < b.repeat) kernels::relu(h);
    }
    if (b.residual) kernels::add_inplace(h, detail::apply_layer(cfg, w, layers[li++], block_in));
    kernels::relu(h);
  }
  for (std::size_t k = 0; k < cfg.epilogue.size(); ++k) {
    h = detail::apply_layer(cfg, w, layers[li++], h);
    kernels::relu(h);
  }
  return detail::apply_layer(cfg, w, layers[li++], h);
}

/// Per-frame log-probabilities.
inline ctc::LogitMatrix forward(const NetConfig& cfg, const NetworkWeights& w, const features::FeatureMatrix& x) {
  return ctc::log_softmax(forward_logits(cfg, w, x));
}

/// Merges every batch norm into its conv: W' = W * s, bias = beta - mean * s
/// with s = gamma / sqrt(var + eps). Returns the folded config and weights.
inline std::pair<NetConfig, NetworkWeights> fold_batchnorm(const NetConfig& cfg, const NetworkWeights& w) {
  if (cfg.folded) fail(ErrorKind::kState, "batch norm is already folded");
  validate_weights(cfg, w);
  NetConfig out_cfg = cfg;
  out_cfg.folded = true;
  NetworkWeights out = w;
  for (const auto& l : layer_specs(cfg)) {
    if (!l.batch_norm) continue;
    const auto affine = kernels::batch_norm_affine(w, l.prefix, cfg.bn_epsilon);
    Tensor& pw = out.get_mutable(l.prefix + ".pw");
    const auto cout = static_cast<std::size_t>(pw.shape[1]);
    for (std::size_t i = 0; i < pw.data.size(); ++i) pw.data[i] *= affine.scale[i % cout];
    for (const char* p : {".bn.gamma", ".bn.beta", ".bn.mean", ".bn.var"}) out.erase(l.prefix + p);
    out.set(l.prefix + ".bias", Tensor{{static_cast<std::int64_t>(cout)}, affine.shift});
  }
  validate_weights(out_cfg, out);
  return {out_cfg, out};
}

// ---------------------------------------------------------------------------
// Streaming

struct StreamingPlan {
  std::size_t chunk_output_frames = 0;  // emitted rows per chunk
  std::size_t context_output_frames = 0;  // extra rows computed on each side
};

/// Chunk sizes in output frames. `chunk_seconds` is the emitted span of each
/// chunk; `context_seconds` (default: the receptive reach) is the overlap
/// computed and discarded on each side.
inline StreamingPlan plan_streaming(const NetConfig& cfg, const features::FeatureConfig& feats, double chunk_seconds,
                                    std::optional<double> context_seconds = std::nullopt) {
  const ReceptiveField rf = receptive_field(cfg);
  const double output_hop = feats.hop_length * rf.stride;
  StreamingPlan plan;
  const double chunk_frames = std::floor(chunk_seconds / output_hop + 1e-9);
  if (!(chunk_frames >= 1)) {
    fail(ErrorKind::kDomain, "chunk of " + std::to_string(chunk_seconds) + " s is shorter than one output frame (" +
                                 std::to_string(output_hop) + " s)");
  }
  plan.chunk_output_frames = static_cast<std::size_t>(chunk_frames);
  plan.context_output_frames = static_cast<std::size_t>(rf.reach_output);
  if (context_seconds) {
    const double ctx = std::ceil(*context_seconds / output_hop - 1e-9);
    if (ctx < rf.reach_output) {
      fail(ErrorKind::kDomain, "chunk overlap of " + std::to_string(*context_seconds) +
                                   " s is below the receptive reach of " +
                                   std::to_string(rf.reach_output * output_hop) + " s");
    }
    plan.context_output_frames = static_cast<std::size_t>(ctx);
  }
  return plan;
}

/// Runs the network chunk by chunk over already normalized features and
/// stitches the uncontaminated center rows. Returns pre-softmax outputs.
inline Matrix<float> forward_logits_chunked(const NetConfig& cfg, const NetworkWeights& w,
                                            const features::FeatureMatrix& x, const StreamingPlan& plan) {
  const ReceptiveField rf = receptive_field(cfg);
  const auto stride = static_cast<std::size_t>(rf.stride);
  const std::size_t total_out = output_frames(cfg, x.rows());
  Matrix<float> out;
  for (std::size_t start = 0; start < total_out; start += plan.chunk_output_frames) {
    const std::size_t end = std::min(total_out, start + plan.chunk_output_frames);
    const std::size_t lo = start > plan.context_output_frames ? start - plan.context_output_frames : 0;
    const std::size_t hi = std::min(total_out, end + plan.context_output_frames);
    const std::size_t in_lo = lo * stride;
    const std::size_t in_hi = std::min(x.rows(), hi * stride);
    const Matrix<float> part = forward_logits(cfg, w, x.slice_rows(in_lo, in_hi));
    out.append_rows(part.slice_rows(start - lo, end - lo));
  }
  return out;
}

/// Streaming transcription path: features and their normalization are
/// computed over the clip, then the network runs chunk by chunk.
inline ctc::LogitMatrix forward_streaming(const NetConfig& cfg, const NetworkWeights& w, const features::AudioClip& clip,
                                          const features::FeatureConfig& feats, double chunk_seconds,
                                          std::optional<double> context_seconds = std::nullopt) {
  const StreamingPlan plan = plan_streaming(cfg, feats, chunk_seconds, context_seconds);
  const auto x = features::normalize_features(features::logmel(clip, feats));
  return ctc::log_softmax(forward_logits_chunked(cfg, w, x, plan));
}

}  // namespace scribo::net
