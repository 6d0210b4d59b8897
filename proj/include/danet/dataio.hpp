// SPDX-License-Identifier: Apache-2.0
//
// UEA/sktime `.ts` ingestion, per-channel normalization, padding and
// mini-batching.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "danet/tensor.hpp"

namespace danet {

enum class Split { train, test };

std::string to_string(Split split);

/// One multivariate series stored channel-major: values[c * length + t].
struct Series {
  std::size_t channels = 0;
  std::size_t length = 0;
  std::vector<double> values;

  double at(std::size_t channel, std::size_t t) const { return values[channel * length + t]; }
  double& at(std::size_t channel, std::size_t t) { return values[channel * length + t]; }
};

struct MvDataset {
  std::string name;
  Split split = Split::train;
  std::vector<std::string> class_names;
  std::vector<Series> instances;
  std::vector<std::size_t> labels;

  std::size_t size() const { return instances.size(); }
  std::size_t num_channels() const { return instances.empty() ? 0 : instances.front().channels; }
  /// Longest instance length.
  std::size_t max_length() const;
  bool equal_length() const;

  /// Throws SchemaError / VocabularyError if an invariant is broken.
  void validate() const;
};

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// Standard deviations below this are treated as constant channels.
inline constexpr double kConstantChannelStd = 1e-12;

MvDataset parse_ts_file(const std::filesystem::path& path);
MvDataset parse_ts_text(const std::string& text, const std::string& source_name = "<memory>");

/// Debug writer: a `.ts` document that parses back to identical values.
std::string to_ts_text(const MvDataset& ds);

/// Per-channel z-score. Without `stats` they are computed from `ds` itself
/// (population std over all timestamps of all instances).
std::pair<MvDataset, ChannelStats> zscore_normalize(const MvDataset& ds,
                                                    const std::optional<ChannelStats>& stats = {});

/// x * std + mean, the inverse of zscore_normalize for non-constant channels.
MvDataset denormalize(const MvDataset& ds, const ChannelStats& stats);

/// Right-pads every instance with zeros to the smallest multiple of
/// `granule` that is >= the dataset's longest instance.
MvDataset pad_to_multiple(const MvDataset& ds, std::size_t granule);

/// Right-pads every instance with zeros to exactly `length` (>= max_length()).
MvDataset pad_to_length(const MvDataset& ds, std::size_t length);

struct BatchPlan {
  std::size_t batch_size = 16;
  std::uint64_t shuffle_seed = 0;
  std::vector<std::size_t> order;
};

/// Seeded permutation of 0..num_instances-1.
BatchPlan make_batch_plan(std::size_t num_instances, std::size_t batch_size, std::uint64_t seed);

struct Batch {
  Tensor inputs;  // [B x T x C]
  std::vector<std::size_t> labels;
  std::vector<std::size_t> indices;
};

/// Stacks instances following plan.order; the last batch may be short.
std::vector<Batch> make_batches(const MvDataset& ds, const BatchPlan& plan);

/// JSON dump of shape, stats and the first instance, for fixture tests.
std::string dataset_debug_json(const MvDataset& ds, const std::optional<ChannelStats>& stats);

}  // namespace danet
