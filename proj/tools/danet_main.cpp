// SPDX-License-Identifier: Apache-2.0
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "danet/commands.hpp"
#include "danet/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"danet: dual-attention time series classifier"};
  app.require_subcommand(1);

  danet::ExperimentOverrides overrides;
  std::string config, data, dataset, out;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  auto* train = app.add_subcommand("train", "train on a UEA dataset and evaluate the test split");
  train->add_option("--config", config, "experiment config JSON");
  train->add_option("--data", data, "dataset root directory");
  train->add_option("--dataset", dataset, "dataset name, e.g. BasicMotions");
  train->add_option("--seed", seed, "training seed");
  train->add_option("--epochs", epochs, "number of epochs");
  train->add_option("--out", out, "output root directory");

  danet::GradcheckOptions gc;
  std::size_t gc_seeds = 1;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every layer");
  gradcheck->add_option("--tolerance", gc.tolerance, "max relative error")->capture_default_str();
  gradcheck->add_option("--seed", gc.seed, "first seed")->capture_default_str();
  gradcheck->add_option("--seeds", gc_seeds, "number of seeds")->capture_default_str();
  gradcheck->add_option("--step", gc.step, "finite-difference step")->capture_default_str();
  gradcheck->add_option("--layer", gc.layers, "restrict to these layers");
  gradcheck->add_option("--corrupt-op", gc.corrupt_op, "scale this op's backward rule (negative control)");
  gradcheck->add_option("--corrupt-factor", gc.corrupt_factor)->capture_default_str();

  std::string result_dir, report_out;
  auto* report = app.add_subcommand("report", "merge eval fragments into a comparison table");
  report->add_option("result_dir", result_dir, "directory scanned for eval fragments")->required();
  report->add_option("--out", report_out, "where to write report.json and report.txt");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      if (train->count("--config")) overrides.config_file = config;
      if (train->count("--data")) overrides.data_dir = data;
      if (train->count("--dataset")) overrides.dataset = dataset;
      if (train->count("--seed")) overrides.seed = seed;
      if (train->count("--epochs")) overrides.epochs = epochs;
      if (train->count("--out")) overrides.out_dir = out;
      return danet::run_train(danet::resolve_experiment(overrides), std::cout, std::cerr);
    }
    if (gradcheck->parsed()) {
      gc.num_seeds = gc_seeds;
      return danet::run_gradcheck(gc, std::cout, std::cerr);
    }
    std::optional<std::filesystem::path> dest;
    if (!report_out.empty()) dest = report_out;
    return danet::run_report(result_dir, dest, std::cout, std::cerr);
  } catch (const danet::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const danet::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
