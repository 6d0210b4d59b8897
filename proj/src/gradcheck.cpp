// SPDX-License-Identifier: Apache-2.0
#include "danet/gradcheck.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <memory>
#include <sstream>

#include "danet/error.hpp"
#include "danet/finite_difference.hpp"
#include "danet/ops.hpp"
#include "danet/rng.hpp"
#include "danet/tape.hpp"

namespace danet {

namespace {

struct Leaf {
  std::string name;
  Tensor value;
};

// Leaves plus a forward pass over them; the scalar checked is sum(out * R)
// for a fixed random R, so every output coordinate contributes.
struct Case {
  std::shared_ptr<std::vector<Leaf>> leaves = std::make_shared<std::vector<Leaf>>();
  std::function<Tensor()> forward;
};

Tensor random_tensor(Rng& rng, Shape shape, double mean, double stddev) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = mean + stddev * rng.normal();
  return Tensor(std::move(shape), std::move(v));
}

void add_weights(Case& c, Rng& rng, const std::string& prefix, std::size_t channels) {
  for (const char* name : {"wq", "wk", "wv", "wo"}) {
    c.leaves->push_back({prefix + name, random_tensor(rng, {channels, channels}, 0.0, 0.5)});
  }
  for (const char* name : {"bq", "bv", "bo"}) {
    c.leaves->push_back({prefix + name, random_tensor(rng, {channels}, 0.0, 0.2)});
  }
}

AttentionWeights weights_from(const std::vector<Leaf>& leaves, std::size_t first) {
  auto get = [&](const std::string& n) -> const Tensor& {
    for (std::size_t i = first; i < leaves.size(); ++i) {
      if (leaves[i].name == n) return leaves[i].value;
    }
    throw ContractError("gradcheck: missing leaf " + n);
  };
  return {get("attn.wq"), get("attn.bq"), get("attn.wk"), get("attn.wv"),
          get("attn.bv"), get("attn.wo"), get("attn.bo")};
}

Case make_case(const std::string& layer, std::uint64_t seed) {
  Rng rng(seed * 0x2545f4914f6cdd1dULL + 17);
  Case c;
  if (layer == "sewa") {
    *c.leaves = {{"x", random_tensor(rng, {4, 4, 3}, 0.6, 1.0)},
                {"w1", random_tensor(rng, {4, 1}, 0.0, 0.8)},
                {"w2", random_tensor(rng, {1, 4}, 0.0, 0.8)}};
    c.forward = [lp = c.leaves] {
      const auto& l = *lp;
      WindowedFeatures w{l[0].value, 2, 2, 0, false};
      return sewa(w, l[1].value, l[2].value).values;
    };
  } else if (layer == "ssaw" || layer == "w_mha") {
    const std::size_t channels = 8, window = 8;
    *c.leaves = {{"x", random_tensor(rng, {2, window, channels}, 0.0, 1.0)}};
    add_weights(c, rng, "attn.", channels);
    const AttentionMode mode = layer == "ssaw" ? AttentionMode::sparse : AttentionMode::dense;
    c.forward = [lp = c.leaves, mode] {
      const auto& l = *lp;
      return window_attention(l[0].value, weights_from(l, 1), 2, mode, 3);
    };
  } else if (layer == "layer_norm") {
    *c.leaves = {{"x", random_tensor(rng, {3, 4, 6}, 0.3, 1.0)},
                {"gamma", random_tensor(rng, {6}, 1.0, 0.3)},
                {"beta", random_tensor(rng, {6}, 0.0, 0.3)}};
    c.forward = [lp = c.leaves] {
      const auto& l = *lp;
      return layer_norm(l[0].value, l[1].value, l[2].value);
    };
  } else if (layer == "mlp") {
    *c.leaves = {{"x", random_tensor(rng, {2, 4, 6}, 0.0, 1.0)},
                {"fc1.weight", random_tensor(rng, {12, 6}, 0.0, 0.5)},
                {"fc1.bias", random_tensor(rng, {12}, 0.0, 0.2)},
                {"fc2.weight", random_tensor(rng, {6, 12}, 0.0, 0.5)},
                {"fc2.bias", random_tensor(rng, {6}, 0.0, 0.2)}};
    c.forward = [lp = c.leaves] {
      const auto& l = *lp;
      return mlp(l[0].value, l[1].value, l[2].value, l[3].value, l[4].value);
    };
  } else if (layer == "partition_embed") {
    *c.leaves = {{"x", random_tensor(rng, {2, 16, 2}, 0.0, 1.0)},
                {"weight", random_tensor(rng, {8, 8}, 0.0, 0.5)},
                {"bias", random_tensor(rng, {8}, 0.0, 0.2)}};
    c.forward = [lp = c.leaves] {
      const auto& l = *lp;
      return time_block_partition_embed(l[0].value, l[1].value, l[2].value, 4);
    };
  } else if (layer == "tiny_model") {
    ModelConfig cfg = tiny_model_config();
    cfg.init_std = 0.5;
    ModelParams params = init_params(cfg, rng.next_u64());
    c.leaves->push_back({"input", random_tensor(rng, {2, 16, cfg.input_channels}, 0.0, 1.0)});
    for (auto& [name, t] : params.entries()) {
      Tensor v = t.clone();
      const bool is_weight = t.rank() == 2;
      if (!is_weight) {
        const bool gamma = name.ends_with(".gamma");
        for (auto& x : v.mutable_values()) x = (gamma ? 1.0 : 0.0) + 0.2 * rng.normal();
      }
      c.leaves->push_back({name, v});
    }
    c.forward = [lp = c.leaves, cfg] {
      const auto& l = *lp;
      ModelParams p;
      for (std::size_t i = 1; i < l.size(); ++i) p.add(l[i].name, l[i].value);
      return model_forward(l[0].value, cfg, p);
    };
  } else {
    throw ContractError("gradcheck: unknown layer '" + layer + "'");
  }
  for (auto& leaf : *c.leaves) leaf.value.set_requires_grad(true);
  return c;
}

double projected(const Tensor& out, const Tensor& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.numel(); ++i) s += out[i] * r[i];
  return s;
}

}  // namespace

const std::vector<std::string>& gradcheck_layers() {
  static const std::vector<std::string> names{"sewa", "ssaw", "w_mha", "layer_norm",
                                              "mlp", "partition_embed", "tiny_model"};
  return names;
}

ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.num_stages = 1;
  cfg.merge_factor = 4;
  cfg.window_size = 4;
  cfg.channel_schedule = {8};
  cfg.heads_schedule = {2};
  cfg.blocks_schedule = {1};
  cfg.input_channels = 2;
  cfg.num_classes = 2;
  cfg.sewa_reduction = 4;
  return cfg;
}

LayerCheck check_layer(const std::string& layer, const GradcheckOptions& options) {
  if (!(options.step > 0.0)) throw ContractError("gradcheck: step must be positive");
  LayerCheck result;
  result.layer = layer;
  for (std::size_t s = 0; s < std::max<std::size_t>(options.num_seeds, 1); ++s) {
    const std::uint64_t seed = options.seed + s;
    Case c = make_case(layer, seed);

    const Tensor probe = c.forward();
    Rng rrng(seed + 99);
    const Tensor r = random_tensor(rrng, probe.shape(), 0.0, 1.0);

    GradTape tape;
    if (!options.corrupt_op.empty()) tape.inject_fault(options.corrupt_op, options.corrupt_factor);
    Tensor loss;
    {
      TapeScope scope(tape);
      loss = sum(mul(c.forward(), r));
    }
    const GradTable table = tape.backward(loss);

    for (auto& leaf : *c.leaves) {
      const Tensor analytic = table.of(leaf.value);
      const Tensor numeric = finite_difference_gradient_inplace(
          [&] { return projected(c.forward(), r); }, leaf.value, options.step);
      for (std::size_t i = 0; i < analytic.numel(); ++i) {
        const double e = relative_error(analytic[i], numeric[i]);
        if (e > result.max_rel_error || result.worst.empty()) {
          result.max_rel_error = e;
          result.worst = leaf.name + "[" + std::to_string(i) + "] (seed " + std::to_string(seed) + ")";
        }
      }
      result.coordinates += analytic.numel();
    }
  }
  result.passed = result.max_rel_error < options.tolerance;
  return result;
}

std::vector<LayerCheck> run_gradcheck(const GradcheckOptions& options) {
  const auto& layers = options.layers.empty() ? gradcheck_layers() : options.layers;
  std::vector<LayerCheck> out;
  for (const auto& layer : layers) out.push_back(check_layer(layer, options));
  return out;
}

std::string format_gradcheck(const std::vector<LayerCheck>& checks, double tolerance) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %14s %12s  %s\n", "layer", "max_rel_error", "coordinates", "status");
  os << line;
  for (const auto& c : checks) {
    std::snprintf(line, sizeof line, "%-16s %14.3e %12zu  %s\n", c.layer.c_str(), c.max_rel_error,
                  c.coordinates, c.passed ? "ok" : "FAIL");
    os << line;
    if (!c.passed) os << "  worst: " << c.worst << "\n";
  }
  std::snprintf(line, sizeof line, "tolerance %.3e\n", tolerance);
  os << line;
  return os.str();
}

}  // namespace danet
