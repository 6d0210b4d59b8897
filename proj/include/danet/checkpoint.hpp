// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint file layout (all integers little-endian):
//
//   magic        8 bytes  "DANETCK1"
//   config_len   u64      length of the model-config JSON that follows
//   config       bytes    ModelConfig::to_json()
//   count        u64      number of parameters
//   count times:
//     name_len   u32, name bytes   e.g. "stage0.block1.attn.wq"
//     rank       u32, extents u64 x rank
//     values     f64 x numel, row-major, IEEE-754 binary64
//
// Values are stored as raw bits, so save/load round-trips exactly.
#pragma once

#include <filesystem>

#include "danet/model.hpp"

namespace danet {

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ModelParams& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace danet
