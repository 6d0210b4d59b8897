// SPDX-License-Identifier: Apache-2.0
//
// Dual-attention classifier for multivariate time series.
//
// The network is a stack of stages. Each stage merges groups of
// `merge_factor` neighbouring timestamps into one time-block (flatten +
// linear projection) and then runs a sequence of dual-attention modules
// that alternate between regular and cyclically shifted windows:
//
//   shift? -> window partition -> SEWA gate -> LN -> SSAW (+ residual)
//          -> LN -> MLP (+ residual) -> window reverse -> unshift?
//
// SEWA weighs whole windows by a squeeze/excite bottleneck on the
// window mean; SSAW computes full attention only for the top-u queries
// ranked by the max-mean measurement and emits mean(V) for the rest.
// A global average pool over blocks and a linear layer produce logits.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "danet/attention.hpp"
#include "danet/tensor.hpp"

namespace danet {

struct ModelConfig {
  std::size_t num_stages = 4;
  std::size_t merge_factor = 4;
  std::size_t window_size = 64;
  std::vector<std::size_t> channel_schedule{96, 192, 384, 768};
  std::vector<std::size_t> heads_schedule{3, 6, 12, 6};
  std::vector<std::size_t> blocks_schedule{2, 2, 6, 2};
  double top_u_factor = 5.0;
  std::size_t mlp_ratio = 4;
  std::size_t sewa_reduction = 4;
  std::size_t input_channels = 1;
  std::size_t num_classes = 2;
  double ln_eps = 1e-5;
  double init_std = 0.02;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  std::size_t stage_in_channels(std::size_t stage) const;
  /// Sequence length after `stage`'s partition layer for raw length T.
  std::size_t stage_length(std::size_t stage, std::size_t raw_length) const;
  /// min(window_size, stage length)
  std::size_t effective_window(std::size_t stage_length) const;
  /// u = min(w, ceil(c * ln w)) for an effective window w.
  std::size_t top_u(std::size_t window) const;
  /// True when every stage of a length-T input partitions evenly.
  bool accepts_length(std::size_t raw_length) const;
  /// Smallest T' >= raw_length with accepts_length(T').
  std::size_t padded_length(std::size_t raw_length) const;

  std::string to_json() const;
  /// Applies the keys of a JSON object on top of `base`; unknown keys or
  /// mistyped values raise ConfigError.
  static ModelConfig from_json(const std::string& text);
  static ModelConfig from_json(const std::string& text, const ModelConfig& base);
};

/// Ordered, named collection of learnable tensors.
class ModelParams {
 public:
  void add(std::string name, Tensor value);
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t total_values() const;

  void set_requires_grad(bool on);
  ModelParams clone() const;
  bool all_finite() const;
  /// FNV-1a over the raw bits of every value, in order.
  std::uint64_t checksum() const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Every parameter name with the shape the configuration implies.
std::vector<std::pair<std::string, Shape>> expected_param_shapes(const ModelConfig& config);

/// Mismatches between `params` and expected_param_shapes (empty when clean).
std::vector<std::string> audit_param_shapes(const ModelConfig& config, const ModelParams& params);

/// Truncated-normal projections (std = config.init_std, +/- 2 sigma), zero
/// biases, LN gamma = 1 and beta = 0.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

struct WindowedFeatures {
  Tensor values;  // [B*num_windows x blocks_per_window x C]
  std::size_t batch = 0;
  std::size_t num_windows = 0;
  std::size_t stage = 0;
  bool shifted = false;

  std::size_t blocks_per_window() const { return values.dim(1); }
  std::size_t channels() const { return values.dim(2); }
};

/// [B x T x C_in] -> [B x T/m x C_out]: flatten m consecutive timestamps and project.
Tensor time_block_partition_embed(const Tensor& x, const Tensor& weight, const Tensor& bias,
                                  std::size_t merge_factor);
Tensor time_block_partition_embed(const Tensor& x, std::size_t stage, const ModelConfig& config,
                                  const ModelParams& params);

/// [B x L x C] -> windows of min(window, L) consecutive blocks.
WindowedFeatures window_partition(const Tensor& x, std::size_t window);
/// Inverse of window_partition.
Tensor window_reverse(const WindowedFeatures& w);

/// Mean over blocks and channels per window: [B*num_windows x 1].
Tensor sewa_squeeze(const WindowedFeatures& x);
/// H = W2 . ReLU(W1 . Z); w1 is [r x 1], w2 is [1 x r].
Tensor sewa_excite(const Tensor& z, const Tensor& w1, const Tensor& w2);
/// Every value of window m multiplied by sigmoid(H_m).
WindowedFeatures sewa_scale(const Tensor& h, const WindowedFeatures& x);
/// Squeeze, excite and scale in one call.
WindowedFeatures sewa(const WindowedFeatures& x, const Tensor& w1, const Tensor& w2);

/// Rotates the block axis: out[i] = x[(i + offset) mod L].
Tensor cyclic_shift(const Tensor& x, long offset);

/// Two linear layers with a ReLU in between.
Tensor mlp(const Tensor& x, const Tensor& fc1_w, const Tensor& fc1_b, const Tensor& fc2_w,
           const Tensor& fc2_b);

/// Projection weights of one window-attention layer.
struct AttentionWeights {
  Tensor wq, bq, wk, wv, bv, wo, bo;
};

AttentionWeights attention_weights(const ModelParams& params, const std::string& prefix);

enum class AttentionMode { dense, sparse };

/// Multi-head attention inside every window of x ([N x W x C]): project,
/// split heads, attend (W-MHA or SSAW), merge heads, output projection.
Tensor window_attention(const Tensor& x, const AttentionWeights& w, std::size_t heads,
                        AttentionMode mode, std::size_t top_u);

/// One dual-attention module; output shape equals input shape [B x L x C].
Tensor dual_attention_block(const Tensor& x, const ModelConfig& config, const ModelParams& params,
                            std::size_t stage, std::size_t block, bool shifted);

/// Mean over the block axis then linear: [B x L x C] -> [B x num_classes].
Tensor classification_head(const Tensor& x, const Tensor& weight, const Tensor& bias);

struct ForwardTrace {
  std::vector<Shape> stage_shapes;  // after each stage's partition layer
};

/// [B x T x C_raw] -> logits [B x num_classes].
Tensor model_forward(const Tensor& batch, const ModelConfig& config, const ModelParams& params,
                     ForwardTrace* trace = nullptr);

/// Parameter name helpers, e.g. block_prefix(1, 0) == "stage1.block0".
std::string stage_prefix(std::size_t stage);
std::string block_prefix(std::size_t stage, std::size_t block);

}  // namespace danet
