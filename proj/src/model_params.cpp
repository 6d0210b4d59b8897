// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <bit>
#include <cstring>

#include "danet/error.hpp"
#include "danet/model.hpp"
#include "danet/rng.hpp"

namespace danet {

void ModelParams::add(std::string name, Tensor value) {
  if (index_.count(name)) throw ContractError("duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(value));
}

const Tensor& ModelParams::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

Tensor& ModelParams::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

std::size_t ModelParams::total_values() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

void ModelParams::set_requires_grad(bool on) {
  for (auto& [name, t] : entries_) t.set_requires_grad(on);
}

ModelParams ModelParams::clone() const {
  ModelParams out;
  for (const auto& [name, t] : entries_) {
    Tensor copy = t.clone();
    copy.set_requires_grad(t.requires_grad());
    out.add(name, std::move(copy));
  }
  return out;
}

bool ModelParams::all_finite() const {
  for (const auto& [name, t] : entries_) {
    if (!t.is_finite()) return false;
  }
  return true;
}

std::uint64_t ModelParams::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t word) {
    for (int i = 0; i < 8; ++i) {
      h ^= (word >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, t] : entries_) {
    for (char c : name) mix(static_cast<unsigned char>(c));
    for (double v : t.values()) mix(std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

std::string stage_prefix(std::size_t stage) { return "stage" + std::to_string(stage); }

std::string block_prefix(std::size_t stage, std::size_t block) {
  return stage_prefix(stage) + ".block" + std::to_string(block);
}

namespace {

enum class Init { normal, zeros, ones };

struct ParamSpec {
  std::string name;
  Shape shape;
  Init init;
};

std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<ParamSpec> specs;
  for (std::size_t s = 0; s < cfg.num_stages; ++s) {
    const std::size_t c = cfg.channel_schedule[s];
    const std::size_t hidden = c * cfg.mlp_ratio;
    const std::size_t r = cfg.sewa_reduction;
    const std::string sp = stage_prefix(s);
    specs.push_back({sp + ".embed.weight", {c, cfg.merge_factor * cfg.stage_in_channels(s)}, Init::normal});
    specs.push_back({sp + ".embed.bias", {c}, Init::zeros});
    for (std::size_t b = 0; b < cfg.blocks_schedule[s]; ++b) {
      const std::string p = block_prefix(s, b);
      specs.push_back({p + ".norm1.gamma", {c}, Init::ones});
      specs.push_back({p + ".norm1.beta", {c}, Init::zeros});
      specs.push_back({p + ".sewa.w1", {r, 1}, Init::normal});
      specs.push_back({p + ".sewa.w2", {1, r}, Init::normal});
      specs.push_back({p + ".attn.wq", {c, c}, Init::normal});
      specs.push_back({p + ".attn.bq", {c}, Init::zeros});
      specs.push_back({p + ".attn.wk", {c, c}, Init::normal});
      specs.push_back({p + ".attn.wv", {c, c}, Init::normal});
      specs.push_back({p + ".attn.bv", {c}, Init::zeros});
      specs.push_back({p + ".attn.wo", {c, c}, Init::normal});
      specs.push_back({p + ".attn.bo", {c}, Init::zeros});
      specs.push_back({p + ".norm2.gamma", {c}, Init::ones});
      specs.push_back({p + ".norm2.beta", {c}, Init::zeros});
      specs.push_back({p + ".mlp.fc1.weight", {hidden, c}, Init::normal});
      specs.push_back({p + ".mlp.fc1.bias", {hidden}, Init::zeros});
      specs.push_back({p + ".mlp.fc2.weight", {c, hidden}, Init::normal});
      specs.push_back({p + ".mlp.fc2.bias", {c}, Init::zeros});
    }
  }
  specs.push_back({"head.weight", {cfg.num_classes, cfg.channel_schedule.back()}, Init::normal});
  specs.push_back({"head.bias", {cfg.num_classes}, Init::zeros});
  return specs;
}

}  // namespace

std::vector<std::pair<std::string, Shape>> expected_param_shapes(const ModelConfig& config) {
  std::vector<std::pair<std::string, Shape>> out;
  for (auto& spec : param_specs(config)) out.emplace_back(std::move(spec.name), std::move(spec.shape));
  return out;
}

std::vector<std::string> audit_param_shapes(const ModelConfig& config, const ModelParams& params) {
  std::vector<std::string> problems;
  const auto expected = expected_param_shapes(config);
  for (const auto& [name, shape] : expected) {
    if (!params.contains(name)) {
      problems.push_back("missing " + name);
    } else if (params.at(name).shape() != shape) {
      problems.push_back(name + " has shape " + shape_to_string(params.at(name).shape()) +
                         ", expected " + shape_to_string(shape));
    } else if (!params.at(name).is_finite()) {
      problems.push_back(name + " holds non-finite values");
    }
  }
  if (params.size() != expected.size()) {
    for (const auto& [name, t] : params.entries()) {
      const bool known = std::any_of(expected.begin(), expected.end(),
                                     [&](const auto& e) { return e.first == name; });
      if (!known) problems.push_back("unexpected " + name);
    }
  }
  return problems;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  ModelParams params;
  for (auto& spec : param_specs(config)) {
    const std::size_t n = shape_numel(spec.shape);
    std::vector<double> values(n, spec.init == Init::ones ? 1.0 : 0.0);
    if (spec.init == Init::normal) {
      for (auto& v : values) v = rng.truncated_normal(config.init_std);
    }
    params.add(std::move(spec.name), Tensor(std::move(spec.shape), std::move(values)));
  }
  return params;
}

}  // namespace danet
