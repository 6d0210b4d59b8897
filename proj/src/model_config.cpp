// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "danet/error.hpp"
#include "danet/model.hpp"
#include "json.hpp"

namespace danet {

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("model config: " + what); };
  if (num_stages == 0) fail("num_stages must be >= 1");
  if (merge_factor < 2) fail("merge_factor must be >= 2");
  if (window_size < 1) fail("window_size must be >= 1");
  if (channel_schedule.size() != num_stages || heads_schedule.size() != num_stages ||
      blocks_schedule.size() != num_stages) {
    fail("channel/heads/blocks schedules must each have num_stages = " + std::to_string(num_stages) +
         " entries");
  }
  for (std::size_t s = 0; s < num_stages; ++s) {
    if (channel_schedule[s] == 0 || heads_schedule[s] == 0) fail("zero width or head count");
    if (channel_schedule[s] % heads_schedule[s] != 0) {
      fail("stage " + std::to_string(s) + ": " + std::to_string(channel_schedule[s]) +
           " channels not divisible by " + std::to_string(heads_schedule[s]) + " heads");
    }
    if (blocks_schedule[s] == 0) fail("stage " + std::to_string(s) + " has no blocks");
  }
  if (!(top_u_factor >= 0.0) || !std::isfinite(top_u_factor)) fail("top_u_factor must be >= 0");
  if (mlp_ratio < 1) fail("mlp_ratio must be >= 1");
  if (sewa_reduction < 1) fail("sewa_reduction must be >= 1");
  if (input_channels < 1) fail("input_channels must be >= 1");
  if (num_classes < 1) fail("num_classes must be >= 1");
  if (!(ln_eps > 0.0)) fail("ln_eps must be > 0");
  if (!(init_std > 0.0)) fail("init_std must be > 0");
}

std::size_t ModelConfig::stage_in_channels(std::size_t stage) const {
  return stage == 0 ? input_channels : channel_schedule.at(stage - 1);
}

std::size_t ModelConfig::stage_length(std::size_t stage, std::size_t raw_length) const {
  std::size_t len = raw_length;
  for (std::size_t s = 0; s <= stage; ++s) len /= merge_factor;
  return len;
}

std::size_t ModelConfig::effective_window(std::size_t length) const {
  return std::min(window_size, length);
}

std::size_t ModelConfig::top_u(std::size_t window) const {
  if (window <= 1) return 0;
  const double u = std::ceil(top_u_factor * std::log(static_cast<double>(window)));
  return std::min(window, static_cast<std::size_t>(u));
}

bool ModelConfig::accepts_length(std::size_t raw_length) const {
  std::size_t len = raw_length;
  for (std::size_t s = 0; s < num_stages; ++s) {
    if (len == 0 || len % merge_factor != 0) return false;
    len /= merge_factor;
    if (len % effective_window(len) != 0) return false;
  }
  return true;
}

std::size_t ModelConfig::padded_length(std::size_t raw_length) const {
  std::size_t granule = 1;
  for (std::size_t s = 0; s < num_stages; ++s) granule *= merge_factor;
  std::size_t t = std::max<std::size_t>(1, (raw_length + granule - 1) / granule) * granule;
  while (!accepts_length(t)) t += granule;
  return t;
}

std::string ModelConfig::to_json() const {
  nlohmann::json j{
      {"num_stages", num_stages},       {"merge_factor", merge_factor},
      {"window_size", window_size},     {"channel_schedule", channel_schedule},
      {"heads_schedule", heads_schedule}, {"blocks_schedule", blocks_schedule},
      {"top_u_factor", top_u_factor},   {"mlp_ratio", mlp_ratio},
      {"sewa_reduction", sewa_reduction}, {"input_channels", input_channels},
      {"num_classes", num_classes},     {"ln_eps", ln_eps},
      {"init_std", init_std},
  };
  return j.dump(2);
}

namespace {

std::size_t as_count(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_unsigned()) throw ConfigError("model config: '" + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

double as_real(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("model config: '" + key + "' must be a number");
  return v.get<double>();
}

std::vector<std::size_t> as_counts(const nlohmann::json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("model config: '" + key + "' must be an array of integers");
  std::vector<std::size_t> out;
  for (const auto& e : v) out.push_back(as_count(e, key));
  return out;
}

}  // namespace

ModelConfig ModelConfig::from_json(const std::string& text) { return from_json(text, ModelConfig{}); }

ModelConfig ModelConfig::from_json(const std::string& text, const ModelConfig& base) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("model config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("model config: expected a JSON object");
  ModelConfig c = base;
  for (const auto& [key, v] : j.items()) {
    if (key == "num_stages") c.num_stages = as_count(v, key);
    else if (key == "merge_factor") c.merge_factor = as_count(v, key);
    else if (key == "window_size") c.window_size = as_count(v, key);
    else if (key == "channel_schedule") c.channel_schedule = as_counts(v, key);
    else if (key == "heads_schedule") c.heads_schedule = as_counts(v, key);
    else if (key == "blocks_schedule") c.blocks_schedule = as_counts(v, key);
    else if (key == "top_u_factor") c.top_u_factor = as_real(v, key);
    else if (key == "mlp_ratio") c.mlp_ratio = as_count(v, key);
    else if (key == "sewa_reduction") c.sewa_reduction = as_count(v, key);
    else if (key == "input_channels") c.input_channels = as_count(v, key);
    else if (key == "num_classes") c.num_classes = as_count(v, key);
    else if (key == "ln_eps") c.ln_eps = as_real(v, key);
    else if (key == "init_std") c.init_std = as_real(v, key);
    else throw ConfigError("model config: unknown key '" + key + "'");
  }
  return c;
}

}  // namespace danet
