// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace danet {

/// Mean over datasets of error_rate / class_count. Error rates are fractions.
double mpce(std::span<const double> error_rates, std::span<const std::size_t> class_counts);

/// Method x dataset accuracies; absent cells are std::nullopt. Rows and
/// columns keep insertion order.
class AccuracyTable {
 public:
  void set(const std::string& method, const std::string& dataset, double accuracy);
  std::optional<double> get(const std::string& method, const std::string& dataset) const;
  std::optional<double> cell(std::size_t method, std::size_t dataset) const;

  const std::vector<std::string>& methods() const { return methods_; }
  const std::vector<std::string>& datasets() const { return datasets_; }
  std::size_t method_index(const std::string& method) const;

  /// Same cells with the dataset columns in `order` (a permutation of datasets()).
  AccuracyTable with_dataset_order(const std::vector<std::string>& order) const;

  /// Throws ValidationError when any cell lies outside [0, 1] or is NaN.
  void validate() const;

 private:
  std::size_t ensure_method(const std::string& method);
  std::size_t ensure_dataset(const std::string& dataset);

  std::vector<std::string> methods_;
  std::vector<std::string> datasets_;
  std::vector<std::vector<std::optional<double>>> cells_;  // [method][dataset]
};

/// Per-dataset ranks, [method][dataset]; 1 is best, ties share the average
/// of their positions, absent cells stay absent.
std::vector<std::vector<std::optional<double>>> dataset_ranks(const AccuracyTable& table);

struct MethodSummary {
  std::string method;
  std::size_t datasets = 0;  // present cells
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // population
  std::size_t wins = 0;
  double avg_rank = 0.0;
};

std::vector<MethodSummary> ranking_summary(const AccuracyTable& table);

struct EvalReport {
  AccuracyTable table;
  std::map<std::string, std::size_t> class_counts;
  std::vector<MethodSummary> summary;
  std::vector<double> mpce;  // per method, over its present datasets

  /// Deterministic JSON (sorted keys).
  std::string to_json() const;
  /// Datasets as rows, methods as columns, then AVG acc / Win / AVG rank / MPCE.
  std::string to_text() const;
};

EvalReport build_report(const AccuracyTable& table,
                        const std::map<std::string, std::size_t>& class_counts);

}  // namespace danet
