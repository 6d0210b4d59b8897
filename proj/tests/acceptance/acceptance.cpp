// SPDX-License-Identifier: Apache-2.0
//
// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances and time budgets are pinned below.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "danet/attention.hpp"
#include "danet/commands.hpp"
#include "danet/evaluation.hpp"
#include "danet/gradcheck.hpp"
#include "danet/model.hpp"
#include "danet/rng.hpp"
#include "danet/training.hpp"
#include "json.hpp"

using namespace danet;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kEquivalenceTol = 1e-9;
constexpr double kEquivalenceBudget = 10.0;
constexpr double kGradTol = 1e-4;
constexpr double kGradBudget = 120.0;
constexpr double kMeanRowTol = 1e-12;
constexpr double kSelectedRowTol = 1e-9;
constexpr double kMeanTol = 1e-12;
constexpr double kToyAccuracy = 0.95;
constexpr std::size_t kToyMaxEpochs = 200;
constexpr double kToyBudget = 60.0;
constexpr double kSmokeAccuracy = 0.70;
constexpr double kSmokeBudget = 600.0;

struct Outcome {
  bool passed = false;
  std::string detail;
};

Tensor random_tensor(Rng& rng, Shape shape) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.normal();
  return Tensor(std::move(shape), std::move(v));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome ac1_equivalence() {
  double worst = 0.0;
  std::size_t draws = 0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    for (std::size_t w : {2, 4, 8, 64}) {
      Rng rng(seed * 1000 + w);
      const Tensor x = random_tensor(rng, {2, w, 8});
      AttentionWeights aw{random_tensor(rng, {8, 8}), random_tensor(rng, {8}), random_tensor(rng, {8, 8}),
                          random_tensor(rng, {8, 8}), random_tensor(rng, {8}), random_tensor(rng, {8, 8}),
                          random_tensor(rng, {8})};
      const Tensor q = random_tensor(rng, {2, w, 4});
      const Tensor k = random_tensor(rng, {2, w, 4});
      const Tensor v = random_tensor(rng, {2, w, 4});
      worst = std::max(worst, max_abs_diff(ssaw_attention(q, k, v, w), w_mha_attention(q, k, v)));
      worst = std::max(worst, max_abs_diff(window_attention(x, aw, 2, AttentionMode::sparse, w),
                                           window_attention(x, aw, 2, AttentionMode::dense, w)));
      ++draws;
    }
  }
  return {worst < kEquivalenceTol, std::to_string(draws) + " draws, max |diff| " + fmt(worst)};
}

Outcome ac2_gradients() {
  GradcheckOptions opt;
  opt.num_seeds = 20;
  opt.tolerance = kGradTol;
  const auto checks = run_gradcheck(opt);
  bool ok = true;
  double worst = 0.0;
  std::string worst_layer;
  std::size_t coords = 0;
  for (const auto& c : checks) {
    ok = ok && c.passed;
    coords += c.coordinates;
    if (c.max_rel_error >= worst) {
      worst = c.max_rel_error;
      worst_layer = c.layer;
    }
  }
  return {ok, std::to_string(checks.size()) + " layers x 20 seeds, " + std::to_string(coords) +
                  " coordinates, max rel err " + fmt(worst) + " (" + worst_layer + ")"};
}

Outcome ac3_sparse_rule() {
  double worst_mean = 0.0, worst_selected = 0.0;
  std::size_t windows = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const std::size_t w = 2 + rng.below(31), d = 1 + rng.below(8), u = rng.below(w);
    const Tensor q = random_tensor(rng, {1, w, d});
    const Tensor k = random_tensor(rng, {1, w, d});
    const Tensor v = random_tensor(rng, {1, w, d});
    const Tensor out = ssaw_attention(q, k, v, u);
    std::vector<double> scores(w * w), measure(w), mean_v(d, 0.0);
    for (std::size_t i = 0; i < w; ++i) {
      double mx = -1e300, mean = 0.0;
      for (std::size_t j = 0; j < w; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += q[i * d + c] * k[j * d + c];
        s /= std::sqrt(static_cast<double>(d));
        scores[i * w + j] = s;
        mx = std::max(mx, s);
        mean += s / static_cast<double>(w);
      }
      measure[i] = mx - mean;
    }
    for (std::size_t j = 0; j < w; ++j) {
      for (std::size_t c = 0; c < d; ++c) mean_v[c] += v[j * d + c] / static_cast<double>(w);
    }
    std::vector<std::size_t> order(w);
    for (std::size_t i = 0; i < w; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return measure[a] > measure[b]; });
    std::vector<bool> selected(w, false);
    for (std::size_t i = 0; i < u; ++i) selected[order[i]] = true;
    for (std::size_t i = 0; i < w; ++i) {
      if (!selected[i]) {
        for (std::size_t c = 0; c < d; ++c) worst_mean = std::max(worst_mean, std::abs(out[i * d + c] - mean_v[c]));
        continue;
      }
      double mx = -1e300, z = 0.0;
      for (std::size_t j = 0; j < w; ++j) mx = std::max(mx, scores[i * w + j]);
      std::vector<double> row(d, 0.0);
      for (std::size_t j = 0; j < w; ++j) {
        const double e = std::exp(scores[i * w + j] - mx);
        z += e;
        for (std::size_t c = 0; c < d; ++c) row[c] += e * v[j * d + c];
      }
      for (std::size_t c = 0; c < d; ++c) worst_selected = std::max(worst_selected, std::abs(out[i * d + c] - row[c] / z));
    }
    ++windows;
  }
  return {worst_mean < kMeanRowTol && worst_selected < kSelectedRowTol,
          std::to_string(windows) + " windows, unselected max |diff| " + fmt(worst_mean) +
              ", selected max |diff| " + fmt(worst_selected)};
}

Outcome ac4_metrics() {
  std::vector<std::string> problems;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };
  const std::vector<double> e0{0.0, 0.0};
  const std::vector<std::size_t> d0{2, 3};
  expect(mpce(e0, d0) == 0.0, "mpce zeros");
  expect(std::abs(mpce(std::vector<double>{0.1, 0.2}, std::vector<std::size_t>{2, 4}) - 0.05) < kMeanTol, "mpce 0.05");
  expect(mpce(std::vector<double>{0.5}, std::vector<std::size_t>{2}) == 0.25, "mpce 0.25");

  AccuracyTable sym;
  sym.set("a", "x", 0.9);
  sym.set("a", "y", 0.8);
  sym.set("b", "x", 0.8);
  sym.set("b", "y", 0.9);
  for (const auto& s : ranking_summary(sym)) expect(s.avg_rank == 1.5 && s.wins == 1, "symmetric pair");
  AccuracyTable tie;
  tie.set("a", "x", 0.7);
  tie.set("b", "x", 0.7);
  tie.set("c", "x", 0.6);
  const auto ts = ranking_summary(tie);
  expect(ts[0].avg_rank == 1.5 && ts[1].avg_rank == 1.5 && ts[2].avg_rank == 3.0, "tie ranks");
  expect(ts[0].wins == 1 && ts[1].wins == 1 && ts[2].wins == 0, "tie wins");
  AccuracyTable one;
  one.set("solo", "x", 1.0);
  const EvalReport single = build_report(one, {{"x", 2}});
  expect(single.summary[0].wins == 1 && single.summary[0].avg_rank == 1.0 && single.mpce[0] == 0.0, "single cell");

  const json j = json::parse(slurp(fs::path(DANET_FIXTURE_DIR) / "uea14_comparison.json"));
  AccuracyTable table;
  for (const auto& r : j["results"]) table.set(r["method"], r["dataset"], r["accuracy"].get<double>());
  const auto summary = ranking_summary(table);
  std::vector<std::string> row_mismatch;
  for (const auto& s : summary) {
    const std::size_t reference = j["reference_win_counts"][s.method].get<std::size_t>();
    if (s.wins != reference) {
      row_mismatch.push_back(s.method + " computed " + std::to_string(s.wins) + " reference " + std::to_string(reference));
    }
  }
  std::string detail = problems.empty() ? "hand fixtures exact" : "hand fixtures FAILED:";
  for (const auto& p : problems) detail += " " + p;
  detail += "; comparison-table Win row " + std::to_string(summary.size() - row_mismatch.size()) + "/" +
            std::to_string(summary.size()) + " methods match";
  for (const auto& m : row_mismatch) detail += "; " + m;
  return {problems.empty() && row_mismatch.empty(), detail};
}

Outcome ac5_architecture() {
  ModelConfig c;
  c.input_channels = 3;
  c.num_classes = 4;
  const ModelParams p = init_params(c, 0);
  const auto audit = audit_param_shapes(c, p);
  Rng rng(1);
  ForwardTrace trace;
  const Tensor logits = model_forward(random_tensor(rng, {1, 1024, 3}), c, p, &trace);
  std::vector<std::size_t> lengths;
  for (const auto& s : trace.stage_shapes) lengths.push_back(s[1]);
  const bool ok = audit.empty() && lengths == std::vector<std::size_t>{256, 64, 16, 4} &&
                  logits.shape() == Shape{1, 4};
  std::string detail = "stage lengths";
  for (auto l : lengths) detail += " " + std::to_string(l);
  detail += ", " + std::to_string(p.size()) + " tensors / " + std::to_string(p.total_values()) +
            " values, audit " + (audit.empty() ? "clean" : audit.front());
  return {ok, detail};
}

Outcome ac6_toy() {
  Rng rng(2024);
  MvDataset ds;
  ds.name = "toy";
  ds.class_names = {"low", "high"};
  for (std::size_t i = 0; i < 32; ++i) {
    const std::size_t label = i % 2;
    Series s{3, 64, {}};
    for (std::size_t c = 0; c < 3; ++c) {
      const double mean = label ? 0.5 * static_cast<double>(c + 1) : -0.5 * static_cast<double>(c + 1);
      for (std::size_t t = 0; t < 64; ++t) s.values.push_back(mean + rng.normal());
    }
    ds.instances.push_back(std::move(s));
    ds.labels.push_back(label);
  }
  ModelConfig m;
  m.num_stages = 2;
  m.window_size = 4;
  m.channel_schedule = {16, 32};
  m.heads_schedule = {2, 4};
  m.blocks_schedule = {1, 1};
  m.input_channels = 3;
  m.num_classes = 2;
  TrainConfig t;
  t.epochs = kToyMaxEpochs;
  const TrainResult r = train_model(ds, t, m);
  const double acc = evaluate_split(r.params, ds, m).accuracy;
  std::size_t reached = 0;
  for (const auto& e : r.history) {
    if (e.accuracy >= kToyAccuracy) {
      reached = e.epoch;
      break;
    }
  }
  return {acc >= kToyAccuracy, "train accuracy " + fmt(acc) + " after " + std::to_string(kToyMaxEpochs) +
                                   " epochs (running accuracy first >= " + fmt(kToyAccuracy) + " at epoch " +
                                   std::to_string(reached) + ")"};
}

ExperimentConfig experiment(const fs::path& config_file, const fs::path& out, std::uint64_t seed) {
  ExperimentOverrides o;
  o.config_file = config_file;
  o.data_dir = fs::path(DANET_DATA_DIR);
  o.dataset = "BasicMotions";
  o.out_dir = out;
  o.seed = seed;
  return resolve_experiment(o);
}

Outcome ac7_basicmotions(const fs::path& out) {
  std::ostringstream log, err;
  const ExperimentConfig cfg = experiment(fs::path(DANET_CONFIG_DIR) / "basicmotions_small.json", out / "ac7", 0);
  const int status = run_train(cfg, log, err);
  if (status != 0) return {false, "train exited " + std::to_string(status) + ": " + err.str()};
  const json eval = json::parse(slurp(run_directory(cfg) / "eval.json"));
  const double acc = eval["results"][0]["accuracy"].get<double>();
  return {acc >= kSmokeAccuracy, "test accuracy " + fmt(acc) + " after " + std::to_string(cfg.train.epochs) +
                                     " epochs (threshold " + fmt(kSmokeAccuracy) + ")"};
}

Outcome ac8_determinism(const fs::path& out) {
  std::ostringstream log, err;
  const fs::path tiny = fs::path(DANET_CONFIG_DIR) / "tiny.json";
  const ExperimentConfig a = experiment(tiny, out / "ac8_a", 7);
  const ExperimentConfig b = experiment(tiny, out / "ac8_b", 7);
  if (run_train(a, log, err) != 0 || run_train(b, log, err) != 0) return {false, "train failed: " + err.str()};
  const std::string ha = slurp(run_directory(a) / "history.json");
  const std::string hb = slurp(run_directory(b) / "history.json");
  return {!ha.empty() && ha == hb, std::to_string(ha.size()) + "-byte histories " + (ha == hb ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string out = "acceptance_runs";
  std::vector<std::string> only;
  app.add_option("--out", out, "scratch directory for training runs");
  app.add_option("--only", only, "run a subset, e.g. --only AC1 AC4");
  CLI11_PARSE(app, argc, argv);

  const fs::path out_dir = out;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1 SSAW(u=w) == W-MHA", ac1_equivalence},
      {"AC2 gradient suite", ac2_gradients},
      {"AC3 sparse rule", ac3_sparse_rule},
      {"AC4 metric oracle", ac4_metrics},
      {"AC5 architecture arithmetic", ac5_architecture},
      {"AC6 toy learnability", ac6_toy},
      {"AC7 BasicMotions smoke", [&] { return ac7_basicmotions(out_dir); }},
      {"AC8 determinism", [&] { return ac8_determinism(out_dir); }},
  };
  const std::map<std::string, double> budgets{{"AC1", kEquivalenceBudget}, {"AC2", kGradBudget},
                                              {"AC6", kToyBudget}, {"AC7", kSmokeBudget}};

  bool all = true;
  for (const auto& [name, run] : criteria) {
    const std::string id = name.substr(0, 3);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (auto it = budgets.find(id); it != budgets.end() && secs > it->second) {
      o.passed = false;
      o.detail += "; over the " + fmt(it->second) + " s budget";
    }
    all = all && o.passed;
    std::cout << (o.passed ? "[PASS] " : "[FAIL] ") << name << " (" << std::fixed << std::setprecision(2) << secs
              << " s): " << o.detail << std::endl;
    std::cout.unsetf(std::ios::floatfield);
  }
  return all ? 0 : 1;
}
