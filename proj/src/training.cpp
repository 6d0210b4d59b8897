// SPDX-License-Identifier: Apache-2.0
#include "danet/training.hpp"

#include <algorithm>
#include <cmath>

#include "danet/error.hpp"
#include "danet/rng.hpp"
#include "json.hpp"

namespace danet {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("train config: " + what); };
  if (batch_size == 0) fail("batch_size must be >= 1");
  if (!(alpha > 0.0)) fail("alpha must be > 0");
  if (!(beta1 > 0.0 && beta1 < 1.0)) fail("beta1 must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) fail("beta2 must lie in (0, 1)");
  if (!(epsilon > 0.0)) fail("epsilon must be > 0");
}

std::string TrainConfig::to_json() const {
  nlohmann::json j{{"batch_size", batch_size}, {"epochs", epochs}, {"alpha", alpha},
                   {"beta1", beta1},           {"beta2", beta2},   {"epsilon", epsilon},
                   {"seed", seed}};
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) { return from_json(text, TrainConfig{}); }

TrainConfig TrainConfig::from_json(const std::string& text, const TrainConfig& base) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("train config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("train config: expected a JSON object");
  TrainConfig c = base;
  auto count = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number_unsigned()) throw ConfigError("train config: '" + key + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
  };
  auto real = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError("train config: '" + key + "' must be a number");
    return v.get<double>();
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "batch_size") c.batch_size = count(v, key);
    else if (key == "epochs") c.epochs = count(v, key);
    else if (key == "alpha") c.alpha = real(v, key);
    else if (key == "beta1") c.beta1 = real(v, key);
    else if (key == "beta2") c.beta2 = real(v, key);
    else if (key == "epsilon") c.epsilon = real(v, key);
    else if (key == "seed") c.seed = count(v, key);
    else throw ConfigError("train config: unknown key '" + key + "'");
  }
  return c;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
  if (logits.rank() != 2) throw DimensionError("cross_entropy expects [B x K] logits, got " + shape_to_string(logits.shape()));
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(batch));
  }
  for (auto y : labels) {
    if (y >= classes) {
      throw ContractError("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                          std::to_string(classes) + ")");
    }
  }
  auto lv = logits.values();
  std::vector<double> probs(lv.size());
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* row = lv.data() + b * classes;
    const double mx = *std::max_element(row, row + classes);
    double z = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      probs[b * classes + k] = std::exp(row[k] - mx);
      z += probs[b * classes + k];
    }
    for (std::size_t k = 0; k < classes; ++k) probs[b * classes + k] /= z;
    total += mx + std::log(z) - row[labels[b]];
  }
  Tensor loss = Tensor::scalar(total / static_cast<double>(batch));
  if (should_record({&logits})) {
    record_op("cross_entropy", {logits}, loss,
              [logits, labels, probs = std::move(probs), batch, classes](std::span<const double> g) mutable {
                auto dl = logits.grad_accumulator();
                const double scale = g[0] / static_cast<double>(batch);
                for (std::size_t b = 0; b < batch; ++b) {
                  for (std::size_t k = 0; k < classes; ++k) {
                    const double target = k == labels[b] ? 1.0 : 0.0;
                    dl[b * classes + k] += scale * (probs[b * classes + k] - target);
                  }
                }
              });
  }
  return loss;
}

std::vector<Tensor> collect_gradients(const ModelParams& params, const GradTable& table) {
  std::vector<Tensor> grads;
  grads.reserve(params.size());
  for (const auto& [name, t] : params.entries()) grads.push_back(table.of(t));
  return grads;
}

void adam_step(ModelParams& params, const std::vector<Tensor>& grads, OptimizerState& state,
               const TrainConfig& cfg) {
  if (grads.size() != params.size()) {
    throw ContractError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                        std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape() != params.entries()[i].second.shape()) {
      throw ContractError("adam_step: gradient " + shape_to_string(grads[i].shape()) + " for " +
                          params.entries()[i].first + " " +
                          shape_to_string(params.entries()[i].second.shape()));
    }
  }
  if (state.m.empty()) {
    for (const auto& [name, t] : params.entries()) {
      state.m.emplace_back(t.numel(), 0.0);
      state.v.emplace_back(t.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ContractError("adam_step: optimizer state does not match parameters");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto theta = params.entries()[i].second.mutable_values();
    auto g = grads[i].values();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      theta[j] -= cfg.alpha * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

std::vector<std::size_t> argmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw DimensionError("argmax_rows expects [B x K], got " + shape_to_string(logits.shape()));
  const std::size_t classes = logits.dim(1);
  std::vector<std::size_t> out(logits.dim(0));
  auto lv = logits.values();
  for (std::size_t b = 0; b < out.size(); ++b) {
    const double* row = lv.data() + b * classes;
    out[b] = static_cast<std::size_t>(std::max_element(row, row + classes) - row);
  }
  return out;
}

double accuracy(const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& labels) {
  if (predictions.size() != labels.size()) throw ContractError("accuracy: length mismatch");
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

namespace {

void check_compatible(const MvDataset& ds, const ModelConfig& mcfg) {
  ds.validate();
  if (ds.num_channels() != mcfg.input_channels) {
    throw ContractError("dataset has " + std::to_string(ds.num_channels()) +
                        " channels, model expects " + std::to_string(mcfg.input_channels));
  }
  if (ds.class_names.size() > mcfg.num_classes) {
    throw ContractError("dataset has " + std::to_string(ds.class_names.size()) +
                        " classes, model head has " + std::to_string(mcfg.num_classes));
  }
  if (!ds.equal_length() || !mcfg.accepts_length(ds.max_length())) {
    throw ContractError("dataset length " + std::to_string(ds.max_length()) +
                        " must be padded to " + std::to_string(mcfg.padded_length(ds.max_length())));
  }
}

}  // namespace

TrainResult train_model(const MvDataset& train, const TrainConfig& cfg, const ModelConfig& mcfg,
                        const EpochCallback& on_epoch) {
  cfg.validate();
  mcfg.validate();
  if (train.size() == 0) throw ContractError("train_model: empty dataset");
  check_compatible(train, mcfg);

  TrainResult result;
  result.params = init_params(mcfg, cfg.seed);
  result.params.set_requires_grad(true);
  OptimizerState state;
  Rng shuffler(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const BatchPlan plan = make_batch_plan(train.size(), cfg.batch_size, shuffler.next_u64());
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (const Batch& batch : make_batches(train, plan)) {
      GradTape tape;
      Tensor loss;
      Tensor logits;
      {
        TapeScope scope(tape);
        logits = model_forward(batch.inputs, mcfg, result.params);
        loss = cross_entropy(logits, batch.labels);
      }
      const GradTable grads = tape.backward(loss);
      adam_step(result.params, collect_gradients(result.params, grads), state, cfg);

      loss_sum += loss.item() * static_cast<double>(batch.labels.size());
      const auto pred = argmax_rows(logits);
      for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == batch.labels[i];
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(train.size()),
                    static_cast<double>(correct) / static_cast<double>(train.size())};
    if (!std::isfinite(rec.loss)) throw Error("training diverged: non-finite loss at epoch " + std::to_string(epoch));
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  result.params.set_requires_grad(false);
  return result;
}

SplitEvaluation evaluate_split(const ModelParams& params, const MvDataset& ds,
                               const ModelConfig& mcfg, std::size_t batch_size) {
  SplitEvaluation out;
  if (ds.size() == 0) return out;
  check_compatible(ds, mcfg);
  BatchPlan plan{batch_size, 0, {}};
  plan.order.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) plan.order[i] = i;
  out.predictions.reserve(ds.size());
  for (const Batch& batch : make_batches(ds, plan)) {
    const auto pred = argmax_rows(model_forward(batch.inputs, mcfg, params));
    out.predictions.insert(out.predictions.end(), pred.begin(), pred.end());
  }
  out.accuracy = accuracy(out.predictions, ds.labels);
  return out;
}

std::string history_to_json(const std::vector<EpochRecord>& history) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : history) {
    j.push_back({{"epoch", r.epoch}, {"loss", r.loss}, {"accuracy", r.accuracy}});
  }
  return j.dump(2) + "\n";
}

}  // namespace danet
