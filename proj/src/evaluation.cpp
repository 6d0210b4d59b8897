// SPDX-License-Identifier: Apache-2.0
#include "danet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "danet/error.hpp"
#include "json.hpp"

namespace danet {

double mpce(std::span<const double> error_rates, std::span<const std::size_t> class_counts) {
  if (error_rates.size() != class_counts.size()) {
    throw ContractError("mpce: " + std::to_string(error_rates.size()) + " error rates but " +
                        std::to_string(class_counts.size()) + " class counts");
  }
  if (error_rates.empty()) throw ContractError("mpce: no datasets");
  double total = 0.0;
  for (std::size_t k = 0; k < error_rates.size(); ++k) {
    if (class_counts[k] == 0) throw ContractError("mpce: class count must be >= 1");
    total += error_rates[k] / static_cast<double>(class_counts[k]);
  }
  return total / static_cast<double>(error_rates.size());
}

std::size_t AccuracyTable::ensure_method(const std::string& method) {
  auto it = std::find(methods_.begin(), methods_.end(), method);
  if (it != methods_.end()) return static_cast<std::size_t>(it - methods_.begin());
  methods_.push_back(method);
  cells_.emplace_back(datasets_.size());
  return methods_.size() - 1;
}

std::size_t AccuracyTable::ensure_dataset(const std::string& dataset) {
  auto it = std::find(datasets_.begin(), datasets_.end(), dataset);
  if (it != datasets_.end()) return static_cast<std::size_t>(it - datasets_.begin());
  datasets_.push_back(dataset);
  for (auto& row : cells_) row.emplace_back();
  return datasets_.size() - 1;
}

void AccuracyTable::set(const std::string& method, const std::string& dataset, double accuracy) {
  const std::size_t m = ensure_method(method);
  const std::size_t d = ensure_dataset(dataset);
  cells_[m][d] = accuracy;
}

std::size_t AccuracyTable::method_index(const std::string& method) const {
  auto it = std::find(methods_.begin(), methods_.end(), method);
  if (it == methods_.end()) throw ContractError("unknown method '" + method + "'");
  return static_cast<std::size_t>(it - methods_.begin());
}

std::optional<double> AccuracyTable::get(const std::string& method, const std::string& dataset) const {
  auto mi = std::find(methods_.begin(), methods_.end(), method);
  auto di = std::find(datasets_.begin(), datasets_.end(), dataset);
  if (mi == methods_.end() || di == datasets_.end()) return std::nullopt;
  return cells_[mi - methods_.begin()][di - datasets_.begin()];
}

std::optional<double> AccuracyTable::cell(std::size_t method, std::size_t dataset) const {
  return cells_.at(method).at(dataset);
}

AccuracyTable AccuracyTable::with_dataset_order(const std::vector<std::string>& order) const {
  std::vector<std::string> sorted_a = order, sorted_b = datasets_;
  std::sort(sorted_a.begin(), sorted_a.end());
  std::sort(sorted_b.begin(), sorted_b.end());
  if (sorted_a != sorted_b) throw ContractError("with_dataset_order: not a permutation of the datasets");
  AccuracyTable out;
  for (const auto& m : methods_) out.ensure_method(m);
  for (const auto& d : order) out.ensure_dataset(d);
  for (std::size_t m = 0; m < methods_.size(); ++m) {
    for (const auto& d : order) {
      if (auto v = get(methods_[m], d)) out.set(methods_[m], d, *v);
    }
  }
  return out;
}

void AccuracyTable::validate() const {
  for (std::size_t m = 0; m < methods_.size(); ++m) {
    for (std::size_t d = 0; d < datasets_.size(); ++d) {
      const auto& v = cells_[m][d];
      if (v && !(*v >= 0.0 && *v <= 1.0)) {
        std::ostringstream os;
        os << "accuracy " << *v << " for " << methods_[m] << " on " << datasets_[d]
           << " is outside [0, 1]";
        throw ValidationError(os.str());
      }
    }
  }
}

std::vector<std::vector<std::optional<double>>> dataset_ranks(const AccuracyTable& table) {
  const std::size_t nm = table.methods().size(), nd = table.datasets().size();
  std::vector<std::vector<std::optional<double>>> ranks(nm, std::vector<std::optional<double>>(nd));
  for (std::size_t d = 0; d < nd; ++d) {
    for (std::size_t m = 0; m < nm; ++m) {
      const auto v = table.cell(m, d);
      if (!v) continue;
      std::size_t better = 0, equal = 0;
      for (std::size_t o = 0; o < nm; ++o) {
        const auto w = table.cell(o, d);
        if (!w) continue;
        better += *w > *v;
        equal += *w == *v;
      }
      // Positions better+1 .. better+equal share their mean.
      ranks[m][d] = static_cast<double>(better) + static_cast<double>(equal + 1) / 2.0;
    }
  }
  return ranks;
}

std::vector<MethodSummary> ranking_summary(const AccuracyTable& table) {
  if (table.methods().empty() || table.datasets().empty()) {
    throw ContractError("ranking_summary: table needs at least one method and one dataset");
  }
  table.validate();
  const std::size_t nm = table.methods().size(), nd = table.datasets().size();
  const auto ranks = dataset_ranks(table);

  std::vector<std::optional<double>> best(nd);
  for (std::size_t d = 0; d < nd; ++d) {
    for (std::size_t m = 0; m < nm; ++m) {
      const auto v = table.cell(m, d);
      if (v && (!best[d] || *v > *best[d])) best[d] = v;
    }
  }

  std::vector<MethodSummary> out;
  for (std::size_t m = 0; m < nm; ++m) {
    MethodSummary s;
    s.method = table.methods()[m];
    double acc_sum = 0.0, rank_sum = 0.0;
    for (std::size_t d = 0; d < nd; ++d) {
      const auto v = table.cell(m, d);
      if (!v) continue;
      ++s.datasets;
      acc_sum += *v;
      rank_sum += *ranks[m][d];
      s.wins += *v == *best[d];
    }
    if (s.datasets > 0) {
      const double n = static_cast<double>(s.datasets);
      s.mean_accuracy = acc_sum / n;
      s.avg_rank = rank_sum / n;
      double sq = 0.0;
      for (std::size_t d = 0; d < nd; ++d) {
        if (const auto v = table.cell(m, d)) sq += (*v - s.mean_accuracy) * (*v - s.mean_accuracy);
      }
      s.std_accuracy = std::sqrt(sq / n);
    }
    out.push_back(s);
  }
  return out;
}

EvalReport build_report(const AccuracyTable& table,
                        const std::map<std::string, std::size_t>& class_counts) {
  EvalReport report;
  report.table = table;
  report.summary = ranking_summary(table);
  for (const auto& d : table.datasets()) {
    auto it = class_counts.find(d);
    if (it == class_counts.end()) throw ContractError("build_report: no class count for dataset '" + d + "'");
    if (it->second < 2) {
      throw ValidationError("build_report: dataset '" + d + "' has class count " +
                            std::to_string(it->second) + " (need >= 2)");
    }
    report.class_counts[d] = it->second;
  }
  for (std::size_t m = 0; m < table.methods().size(); ++m) {
    std::vector<double> errors;
    std::vector<std::size_t> counts;
    for (std::size_t d = 0; d < table.datasets().size(); ++d) {
      if (const auto v = table.cell(m, d)) {
        errors.push_back(1.0 - *v);
        counts.push_back(report.class_counts.at(table.datasets()[d]));
      }
    }
    report.mpce.push_back(errors.empty() ? 0.0 : mpce(errors, counts));
  }
  return report;
}

std::string EvalReport::to_json() const {
  // nlohmann::json objects are std::map-backed, so keys come out sorted.
  nlohmann::json j;
  nlohmann::json accuracies = nlohmann::json::object();
  for (const auto& m : table.methods()) {
    nlohmann::json row = nlohmann::json::object();
    for (const auto& d : table.datasets()) {
      const auto v = table.get(m, d);
      row[d] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    }
    accuracies[m] = row;
  }
  j["accuracy"] = accuracies;
  j["class_counts"] = class_counts;
  j["datasets"] = table.datasets();
  j["methods"] = table.methods();
  nlohmann::json summary = nlohmann::json::object();
  for (std::size_t i = 0; i < this->summary.size(); ++i) {
    const auto& s = this->summary[i];
    summary[s.method] = {{"avg_acc", s.mean_accuracy}, {"avg_acc_std", s.std_accuracy},
                         {"avg_rank", s.avg_rank},     {"datasets", s.datasets},
                         {"mpce", mpce.at(i)},         {"win", s.wins}};
  }
  j["summary"] = summary;
  return j.dump(2) + "\n";
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string EvalReport::to_text() const {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"Dataset"};
  for (const auto& m : table.methods()) header.push_back(m);
  rows.push_back(header);
  for (const auto& d : table.datasets()) {
    std::vector<std::string> row{d};
    for (const auto& m : table.methods()) {
      const auto v = table.get(m, d);
      row.push_back(v ? fixed(*v, 3) : "N/A");
    }
    rows.push_back(row);
  }
  std::vector<std::string> acc{"AVG acc"}, win{"Win"}, rank{"AVG rank"}, err{"MPCE"};
  for (std::size_t i = 0; i < summary.size(); ++i) {
    acc.push_back(fixed(summary[i].mean_accuracy, 3) + "(+-" + fixed(summary[i].std_accuracy, 3) + ")");
    win.push_back(std::to_string(summary[i].wins));
    rank.push_back(fixed(summary[i].avg_rank, 3));
    err.push_back(fixed(mpce.at(i), 4));
  }
  rows.push_back(acc);
  rows.push_back(win);
  rows.push_back(rank);
  rows.push_back(err);

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream os;
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c > 0) os << "  ";
      os << r[c] << std::string(c + 1 < r.size() ? width[c] - r[c].size() : 0, ' ');
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace danet
