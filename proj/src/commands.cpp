// SPDX-License-Identifier: Apache-2.0
#include "danet/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "danet/checkpoint.hpp"
#include "danet/dataio.hpp"
#include "danet/error.hpp"
#include "danet/evaluation.hpp"
#include "json.hpp"

namespace danet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os || !(os << content)) throw Error("cannot write " + path.string());
}

std::string expect_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("experiment config: '" + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const std::string& text, const ExperimentConfig& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("experiment config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("experiment config: expected a JSON object");
  ExperimentConfig c = base;
  for (const auto& [key, v] : j.items()) {
    if (key == "data") c.data_dir = expect_string(v, key);
    else if (key == "dataset") c.dataset = expect_string(v, key);
    else if (key == "method") c.method = expect_string(v, key);
    else if (key == "out") c.out_dir = expect_string(v, key);
    else if (key == "seed") {
      if (!v.is_number_unsigned()) throw ConfigError("experiment config: 'seed' must be a non-negative integer");
      c.train.seed = v.get<std::uint64_t>();
    } else if (key == "model") {
      c.model = ModelConfig::from_json(v.dump(), c.model);
    } else if (key == "train") {
      c.train = TrainConfig::from_json(v.dump(), c.train);
    } else {
      throw ConfigError("experiment config: unknown key '" + key + "'");
    }
  }
  return c;
}

ExperimentConfig resolve_experiment(const ExperimentOverrides& o) {
  ExperimentConfig c;
  if (o.config_file) {
    if (!fs::is_regular_file(*o.config_file)) {
      throw ConfigError("config file not found: " + o.config_file->string());
    }
    c = ExperimentConfig::from_json(read_file(*o.config_file), c);
  }
  if (o.data_dir) c.data_dir = *o.data_dir;
  if (o.dataset) c.dataset = *o.dataset;
  if (o.seed) c.train.seed = *o.seed;
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.out_dir) c.out_dir = *o.out_dir;
  c.train.validate();
  return c;
}

fs::path run_directory(const ExperimentConfig& config) {
  return config.out_dir / (config.dataset + "_seed" + std::to_string(config.train.seed));
}

int run_train(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
  if (config.dataset.empty()) {
    err << "error: no dataset given (--dataset NAME)\n";
    return 2;
  }
  const fs::path dir = config.data_dir / config.dataset;
  const fs::path train_path = dir / (config.dataset + "_TRAIN.ts");
  const fs::path test_path = dir / (config.dataset + "_TEST.ts");
  for (const auto& p : {train_path, test_path}) {
    if (!fs::is_regular_file(p)) {
      err << "error: missing dataset file " << p.string() << "\n";
      return 2;
    }
  }

  MvDataset train_raw = parse_ts_file(train_path);
  MvDataset test_raw = parse_ts_file(test_path);
  if (train_raw.class_names != test_raw.class_names) {
    err << "error: train and test files declare different class labels\n";
    return 1;
  }
  if (train_raw.num_channels() != test_raw.num_channels()) {
    err << "error: train and test files have different channel counts\n";
    return 1;
  }

  ModelConfig mcfg = config.model;
  mcfg.input_channels = train_raw.num_channels();
  mcfg.num_classes = train_raw.class_names.size();
  mcfg.validate();
  config.train.validate();

  auto [train_norm, stats] = zscore_normalize(train_raw);
  auto test_norm = zscore_normalize(test_raw, stats).first;
  const std::size_t length =
      mcfg.padded_length(std::max(train_norm.max_length(), test_norm.max_length()));
  const MvDataset train = pad_to_length(train_norm, length);
  const MvDataset test = pad_to_length(test_norm, length);

  out << config.dataset << ": " << train.size() << " train / " << test.size() << " test, "
      << train.num_channels() << " channels, length " << train_raw.max_length() << " padded to "
      << length << ", " << mcfg.num_classes << " classes\n";

  const TrainResult result = train_model(train, config.train, mcfg, [&](const EpochRecord& r) {
    if (r.epoch == 1 || r.epoch % 10 == 0 || r.epoch == config.train.epochs) {
      out << "epoch " << r.epoch << "  loss " << std::fixed << std::setprecision(6) << r.loss
          << "  train_acc " << std::setprecision(4) << r.accuracy << "\n";
      out.unsetf(std::ios::floatfield);
    }
  });
  const SplitEvaluation test_eval = evaluate_split(result.params, test, mcfg);
  const SplitEvaluation train_eval = evaluate_split(result.params, train, mcfg);

  const fs::path run_dir = run_directory(config);
  fs::create_directories(run_dir);
  save_checkpoint(run_dir / "checkpoint", mcfg, result.params);
  write_file(run_dir / "history.json", history_to_json(result.history));

  json fragment;
  fragment["results"] = json::array({{{"method", config.method},
                                      {"dataset", config.dataset},
                                      {"accuracy", test_eval.accuracy}}});
  fragment["class_counts"] = {{config.dataset, mcfg.num_classes}};
  fragment["seed"] = config.train.seed;
  fragment["epochs"] = config.train.epochs;
  fragment["train_accuracy"] = train_eval.accuracy;
  fragment["padded_length"] = length;
  fragment["predictions"] = test_eval.predictions;
  write_file(run_dir / "eval.json", fragment.dump(2) + "\n");

  out << "test accuracy: " << std::fixed << std::setprecision(4) << test_eval.accuracy << "\n";
  out.unsetf(std::ios::floatfield);
  out << "artifacts: " << run_dir.string() << "\n";
  return 0;
}

int run_gradcheck(const GradcheckOptions& options, std::ostream& out, std::ostream& err) {
  const auto checks = run_gradcheck(options);
  out << format_gradcheck(checks, options.tolerance);
  std::vector<std::string> offenders;
  for (const auto& c : checks) {
    if (!c.passed) offenders.push_back(c.layer);
  }
  if (offenders.empty()) return 0;
  err << "gradcheck failed:";
  for (const auto& name : offenders) err << " " << name;
  err << "\n";
  return 1;
}

int run_report(const fs::path& result_dir, const std::optional<fs::path>& out_dir,
               std::ostream& out, std::ostream& err) {
  if (!fs::is_directory(result_dir)) {
    err << "error: result directory not found: " << result_dir.string() << "\n";
    return 2;
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(result_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json" &&
        entry.path().filename() != "report.json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> sums;
  std::vector<std::string> method_order, dataset_order;
  std::map<std::string, std::size_t> class_counts;
  std::size_t fragments = 0;
  try {
    for (const auto& path : files) {
      json j;
      try {
        j = json::parse(read_file(path));
      } catch (const json::parse_error&) {
        continue;
      }
      if (!j.is_object() || !j.contains("results")) continue;
      ++fragments;
      const json& results = j.at("results");
      if (!results.is_array()) throw ValidationError(path.string() + ": 'results' must be an array");
      for (const auto& r : results) {
        if (!r.is_object() || !r.contains("method") || !r.contains("dataset") || !r.contains("accuracy") ||
            !r.at("method").is_string() || !r.at("dataset").is_string() || !r.at("accuracy").is_number()) {
          throw ValidationError(path.string() + ": result entries need method, dataset and accuracy");
        }
        const std::string method = r.at("method"), dataset = r.at("dataset");
        const double acc = r.at("accuracy");
        if (!(acc >= 0.0 && acc <= 1.0)) {
          std::ostringstream os;
          os << path.string() << ": accuracy " << acc << " for " << method << " on " << dataset
             << " is outside [0, 1]";
          throw ValidationError(os.str());
        }
        if (std::find(method_order.begin(), method_order.end(), method) == method_order.end()) method_order.push_back(method);
        if (std::find(dataset_order.begin(), dataset_order.end(), dataset) == dataset_order.end()) dataset_order.push_back(dataset);
        auto& cell = sums[{method, dataset}];
        cell.first += acc;
        cell.second += 1;
      }
      if (j.contains("class_counts")) {
        for (const auto& [dataset, v] : j.at("class_counts").items()) {
          if (!v.is_number_unsigned()) throw ValidationError(path.string() + ": class count for " + dataset + " must be an integer");
          const std::size_t k = v.get<std::size_t>();
          auto [it, inserted] = class_counts.emplace(dataset, k);
          if (!inserted && it->second != k) {
            throw ValidationError("conflicting class counts for " + dataset + ": " +
                                  std::to_string(it->second) + " vs " + std::to_string(k));
          }
        }
      }
    }
    if (fragments == 0) {
      err << "error: no eval fragments under " << result_dir.string() << "\n";
      return 1;
    }

    AccuracyTable table;
    for (const auto& m : method_order) {
      for (const auto& d : dataset_order) {
        auto it = sums.find({m, d});
        if (it != sums.end()) table.set(m, d, it->second.first / static_cast<double>(it->second.second));
      }
    }
    const EvalReport report = build_report(table, class_counts);
    const fs::path dest = out_dir.value_or(result_dir);
    fs::create_directories(dest);
    write_file(dest / "report.json", report.to_json());
    write_file(dest / "report.txt", report.to_text());
    out << report.to_text();
    return 0;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace danet
