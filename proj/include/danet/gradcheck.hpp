// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference verification of the tape's backward rules, one layer at
// a time and for a complete tiny model.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "danet/model.hpp"

namespace danet {

struct GradcheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
  std::size_t num_seeds = 1;  // seeds seed, seed+1, ...
  /// Op whose backward rule is scaled by corrupt_factor (negative control).
  std::string corrupt_op;
  double corrupt_factor = 1.5;
  /// Names from gradcheck_layers(); empty means all.
  std::vector<std::string> layers;
};

struct LayerCheck {
  std::string layer;
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;  // summed over seeds
  std::string worst;            // "name[i] (seed s)"
  bool passed = false;
};

/// sewa, ssaw, w_mha, layer_norm, mlp, partition_embed, tiny_model
const std::vector<std::string>& gradcheck_layers();

/// One stage, one block, window 4, 8 channels, 2 heads, 2 input channels,
/// 2 classes; accepts T = 16.
ModelConfig tiny_model_config();

LayerCheck check_layer(const std::string& layer, const GradcheckOptions& options);
std::vector<LayerCheck> run_gradcheck(const GradcheckOptions& options);

/// Aligned table: layer, max relative error, coordinates, status.
std::string format_gradcheck(const std::vector<LayerCheck>& checks, double tolerance);

}  // namespace danet
