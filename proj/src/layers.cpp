// SPDX-License-Identifier: Apache-2.0
#include "danet/error.hpp"
#include "danet/model.hpp"
#include "danet/ops.hpp"

namespace danet {

Tensor time_block_partition_embed(const Tensor& x, const Tensor& weight, const Tensor& bias,
                                  std::size_t merge_factor) {
  if (x.rank() != 3) throw DimensionError("partition embed expects [B x T x C], got " + shape_to_string(x.shape()));
  const std::size_t batch = x.dim(0), length = x.dim(1), channels = x.dim(2);
  if (merge_factor == 0 || length % merge_factor != 0) {
    throw ContractError("partition embed: length " + std::to_string(length) +
                        " is not divisible by merge factor " + std::to_string(merge_factor) +
                        " (pad the series first)");
  }
  // Row-major [B x T x C] is already laid out as [B x T/m x m*C].
  Tensor blocks = reshape(x, {batch, length / merge_factor, merge_factor * channels});
  return linear(blocks, weight, bias);
}

Tensor time_block_partition_embed(const Tensor& x, std::size_t stage, const ModelConfig& config,
                                  const ModelParams& params) {
  const std::string p = stage_prefix(stage) + ".embed";
  return time_block_partition_embed(x, params.at(p + ".weight"), params.at(p + ".bias"),
                                    config.merge_factor);
}

WindowedFeatures window_partition(const Tensor& x, std::size_t window) {
  if (x.rank() != 3) throw DimensionError("window_partition expects [B x L x C], got " + shape_to_string(x.shape()));
  if (window == 0) throw ContractError("window_partition: window must be >= 1");
  const std::size_t batch = x.dim(0), length = x.dim(1), channels = x.dim(2);
  const std::size_t w = std::min(window, length);
  if (length % w != 0) {
    throw ContractError("window_partition: length " + std::to_string(length) +
                        " is not divisible by window " + std::to_string(w));
  }
  WindowedFeatures out;
  out.batch = batch;
  out.num_windows = length / w;
  out.values = reshape(x, {batch * out.num_windows, w, channels});
  return out;
}

Tensor window_reverse(const WindowedFeatures& w) {
  return reshape(w.values, {w.batch, w.num_windows * w.blocks_per_window(), w.channels()});
}

Tensor sewa_squeeze(const WindowedFeatures& x) {
  Tensor z = global_average_pool(x.values, {1, 2});
  return reshape(z, {z.numel(), 1});
}

Tensor sewa_excite(const Tensor& z, const Tensor& w1, const Tensor& w2) {
  return linear(relu(linear(z, w1)), w2);
}

WindowedFeatures sewa_scale(const Tensor& h, const WindowedFeatures& x) {
  if (h.numel() != x.values.dim(0)) {
    throw DimensionError("sewa_scale: " + std::to_string(h.numel()) + " weights for " +
                         std::to_string(x.values.dim(0)) + " windows");
  }
  WindowedFeatures out = x;
  out.values = scale_groups(x.values, reshape(sigmoid(h), {h.numel()}));
  return out;
}

WindowedFeatures sewa(const WindowedFeatures& x, const Tensor& w1, const Tensor& w2) {
  return sewa_scale(sewa_excite(sewa_squeeze(x), w1, w2), x);
}

Tensor cyclic_shift(const Tensor& x, long offset) {
  if (x.rank() < 2) throw DimensionError("cyclic_shift expects [B x L x C], got " + shape_to_string(x.shape()));
  return roll(x, 1, offset);
}

Tensor mlp(const Tensor& x, const Tensor& fc1_w, const Tensor& fc1_b, const Tensor& fc2_w,
           const Tensor& fc2_b) {
  return linear(relu(linear(x, fc1_w, fc1_b)), fc2_w, fc2_b);
}

AttentionWeights attention_weights(const ModelParams& params, const std::string& prefix) {
  return AttentionWeights{params.at(prefix + ".wq"), params.at(prefix + ".bq"),
                          params.at(prefix + ".wk"), params.at(prefix + ".wv"),
                          params.at(prefix + ".bv"), params.at(prefix + ".wo"),
                          params.at(prefix + ".bo")};
}

Tensor window_attention(const Tensor& x, const AttentionWeights& w, std::size_t heads,
                        AttentionMode mode, std::size_t top_u) {
  if (x.rank() != 3) throw DimensionError("window_attention expects [N x W x C], got " + shape_to_string(x.shape()));
  const std::size_t n = x.dim(0), win = x.dim(1), c = x.dim(2);
  if (heads == 0 || c % heads != 0) {
    throw ContractError("window_attention: " + std::to_string(c) + " channels not divisible by " +
                        std::to_string(heads) + " heads");
  }
  const std::size_t dh = c / heads;
  auto split_heads = [&](const Tensor& t) {
    return reshape(permute(reshape(t, {n, win, heads, dh}), {0, 2, 1, 3}), {n * heads, win, dh});
  };
  const Tensor q = split_heads(linear(x, w.wq, w.bq));
  const Tensor k = split_heads(linear(x, w.wk));
  const Tensor v = split_heads(linear(x, w.wv, w.bv));
  const Tensor attended = mode == AttentionMode::dense ? scaled_dot_product_attention(q, k, v)
                                                       : ssaw_attention(q, k, v, top_u);
  const Tensor merged =
      reshape(permute(reshape(attended, {n, heads, win, dh}), {0, 2, 1, 3}), {n, win, c});
  return linear(merged, w.wo, w.bo);
}

Tensor dual_attention_block(const Tensor& x, const ModelConfig& config, const ModelParams& params,
                            std::size_t stage, std::size_t block, bool shifted) {
  if (x.rank() != 3) throw DimensionError("dual_attention_block expects [B x L x C], got " + shape_to_string(x.shape()));
  const std::string p = block_prefix(stage, block);
  const std::size_t length = x.dim(1);
  const std::size_t w = config.effective_window(length);
  const long offset = shifted ? static_cast<long>(w / 2) : 0;

  const Tensor rotated = offset != 0 ? cyclic_shift(x, offset) : x;
  WindowedFeatures windows = window_partition(rotated, w);
  windows.stage = stage;
  windows.shifted = shifted;

  const Tensor gated = sewa(windows, params.at(p + ".sewa.w1"), params.at(p + ".sewa.w2")).values;
  const Tensor normed = layer_norm(gated, params.at(p + ".norm1.gamma"), params.at(p + ".norm1.beta"), config.ln_eps);
  const Tensor attended = window_attention(normed, attention_weights(params, p + ".attn"),
                                           config.heads_schedule.at(stage), AttentionMode::sparse,
                                           config.top_u(w));
  const Tensor mid = add(gated, attended);
  const Tensor ffn = mlp(layer_norm(mid, params.at(p + ".norm2.gamma"), params.at(p + ".norm2.beta"), config.ln_eps),
                         params.at(p + ".mlp.fc1.weight"), params.at(p + ".mlp.fc1.bias"),
                         params.at(p + ".mlp.fc2.weight"), params.at(p + ".mlp.fc2.bias"));
  windows.values = add(mid, ffn);
  const Tensor out = window_reverse(windows);
  return offset != 0 ? cyclic_shift(out, -offset) : out;
}

Tensor classification_head(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 3) throw DimensionError("classification_head expects [B x L x C], got " + shape_to_string(x.shape()));
  return linear(global_average_pool(x, {1}), weight, bias);
}

Tensor model_forward(const Tensor& batch, const ModelConfig& config, const ModelParams& params,
                     ForwardTrace* trace) {
  if (batch.rank() != 3) throw DimensionError("model_forward expects [B x T x C], got " + shape_to_string(batch.shape()));
  if (batch.dim(2) != config.input_channels) {
    throw DimensionError("model_forward: input has " + std::to_string(batch.dim(2)) +
                         " channels, model expects " + std::to_string(config.input_channels));
  }
  if (!config.accepts_length(batch.dim(1))) {
    throw ContractError("model_forward: length " + std::to_string(batch.dim(1)) +
                        " does not partition evenly; pad to " +
                        std::to_string(config.padded_length(batch.dim(1))));
  }
  Tensor x = batch;
  for (std::size_t s = 0; s < config.num_stages; ++s) {
    x = time_block_partition_embed(x, s, config, params);
    if (trace) trace->stage_shapes.push_back(x.shape());
    for (std::size_t b = 0; b < config.blocks_schedule[s]; ++b) {
      x = dual_attention_block(x, config, params, s, b, b % 2 == 1);
    }
  }
  return classification_head(x, params.at("head.weight"), params.at("head.bias"));
}

}  // namespace danet
