// SPDX-License-Identifier: Apache-2.0
//
// The train / gradcheck / report commands behind the `danet` tool.
//
// Experiment config file (every key optional):
//
//   {
//     "data": "data",            dataset root; files are <data>/<name>/<name>_TRAIN.ts
//     "dataset": "BasicMotions",
//     "method": "DA-Net",        label used in the eval fragment
//     "out": "out",
//     "seed": 0,                 same as train.seed
//     "model": { ModelConfig keys },
//     "train": { TrainConfig keys }
//   }
//
// Precedence: command-line flags > config file > built-in defaults.
// input_channels and num_classes are always taken from the training data.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "danet/gradcheck.hpp"
#include "danet/model.hpp"
#include "danet/training.hpp"

namespace danet {

struct ExperimentConfig {
  std::filesystem::path data_dir = "data";
  std::string dataset;
  std::string method = "DA-Net";
  std::filesystem::path out_dir = "out";
  ModelConfig model;
  TrainConfig train;

  static ExperimentConfig from_json(const std::string& text, const ExperimentConfig& base);
};

struct ExperimentOverrides {
  std::optional<std::filesystem::path> config_file;
  std::optional<std::filesystem::path> data_dir;
  std::optional<std::string> dataset;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::filesystem::path> out_dir;
};

/// Defaults, then the config file, then flags. Throws ConfigError.
ExperimentConfig resolve_experiment(const ExperimentOverrides& overrides);

/// <out>/<dataset>_seed<N>
std::filesystem::path run_directory(const ExperimentConfig& config);

/// Exit codes: 0 success, 1 failed check or invalid input data, 2 missing
/// files or bad configuration.
int run_train(const ExperimentConfig& config, std::ostream& out, std::ostream& err);
int run_gradcheck(const GradcheckOptions& options, std::ostream& out, std::ostream& err);
/// Merges every eval fragment under `result_dir` and writes report.json and
/// report.txt into `out_dir` (defaults to result_dir).
int run_report(const std::filesystem::path& result_dir,
               const std::optional<std::filesystem::path>& out_dir, std::ostream& out,
               std::ostream& err);

}  // namespace danet
