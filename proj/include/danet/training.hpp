// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "danet/dataio.hpp"
#include "danet/model.hpp"
#include "danet/tape.hpp"

namespace danet {

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t epochs = 100;
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
  static TrainConfig from_json(const std::string& text, const TrainConfig& base);
};

/// ADAM moments, one buffer per parameter in ModelParams order.
struct OptimizerState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

/// Mean over the batch of -log softmax(logits)[label]. Differentiable.
Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels);

/// Leaf gradients of `params` from a backward pass, in parameter order.
std::vector<Tensor> collect_gradients(const ModelParams& params, const GradTable& table);

/// Bias-corrected ADAM update, in place.
void adam_step(ModelParams& params, const std::vector<Tensor>& grads, OptimizerState& state,
               const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean per-instance training loss
  double accuracy = 0.0;  // running training accuracy over the epoch
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Seeded mini-batch ADAM training from a fresh initialization. The dataset
/// must already be padded to an accepted length (ModelConfig::padded_length).
TrainResult train_model(const MvDataset& train, const TrainConfig& cfg, const ModelConfig& mcfg,
                        const EpochCallback& on_epoch = {});

struct SplitEvaluation {
  double accuracy = 0.0;
  std::vector<std::size_t> predictions;
};

/// Argmax predictions and accuracy; forward-only, parameters untouched.
SplitEvaluation evaluate_split(const ModelParams& params, const MvDataset& ds,
                               const ModelConfig& mcfg, std::size_t batch_size = 16);

/// Per-row argmax of [B x K] logits (first index wins ties).
std::vector<std::size_t> argmax_rows(const Tensor& logits);

/// Fraction of positions where predictions equal labels.
double accuracy(const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& labels);

/// [{"epoch":1,"loss":...,"accuracy":...}, ...]
std::string history_to_json(const std::vector<EpochRecord>& history);

}  // namespace danet
