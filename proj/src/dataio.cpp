// SPDX-License-Identifier: Apache-2.0
#include "danet/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "danet/error.hpp"
#include "danet/rng.hpp"
#include "json.hpp"

namespace danet {

std::string to_string(Split split) { return split == Split::train ? "train" : "test"; }

std::size_t MvDataset::max_length() const {
  std::size_t t = 0;
  for (const auto& s : instances) t = std::max(t, s.length);
  return t;
}

bool MvDataset::equal_length() const {
  return std::all_of(instances.begin(), instances.end(),
                     [&](const Series& s) { return s.length == instances.front().length; });
}

void MvDataset::validate() const {
  if (labels.size() != instances.size()) {
    throw SchemaError(name + ": " + std::to_string(labels.size()) + " labels for " +
                      std::to_string(instances.size()) + " instances");
  }
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& s = instances[i];
    if (s.channels != num_channels() || s.channels == 0) {
      throw SchemaError(name + ": instance " + std::to_string(i) + " has " +
                        std::to_string(s.channels) + " channels, expected " +
                        std::to_string(num_channels()));
    }
    if (s.values.size() != s.channels * s.length) {
      throw SchemaError(name + ": instance " + std::to_string(i) + " storage size mismatch");
    }
    if (labels[i] >= class_names.size()) {
      throw VocabularyError(name + ": label index " + std::to_string(labels[i]) +
                            " outside vocabulary of " + std::to_string(class_names.size()));
    }
  }
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream is{std::string(s)};
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

double parse_value(std::string_view token, std::size_t line) {
  token = trim(token);
  if (token.empty()) throw ParseError("empty value", line);
  if (token == "?" || lower(token) == "nan") {
    throw ParseError("missing values are not supported", line);
  }
  if (token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v)) {
    throw ParseError("invalid numeric value '" + std::string(token) + "'", line);
  }
  return v;
}

bool parse_bool(const std::string& word, std::size_t line) {
  const auto w = lower(word);
  if (w == "true") return true;
  if (w == "false") return false;
  throw ParseError("expected true/false, got '" + word + "'", line);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

MvDataset parse_ts_text(const std::string& text, const std::string& source_name) {
  MvDataset ds;
  ds.name = source_name;
  {
    const auto upper_pos = lower(source_name).rfind("_test");
    ds.split = upper_pos != std::string::npos ? Split::test : Split::train;
  }

  bool saw_content = false;
  bool in_data = false;
  bool has_labels = false;
  std::optional<std::size_t> declared_dims;
  std::size_t line_no = 0;

  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    saw_content = true;

    if (!in_data) {
      if (line.front() != '@') throw ParseError("expected a header directive before @data", line_no);
      const auto w = words(line);
      const auto key = lower(w[0]);
      if (key == "@data") {
        if (!has_labels) throw ParseError("dataset declares no class labels (@classLabel true ...)", line_no);
        in_data = true;
      } else if (key == "@problemname") {
        if (w.size() >= 2) ds.name = w[1];
      } else if (key == "@classlabel") {
        if (w.size() < 2) throw ParseError("@classLabel needs a value", line_no);
        has_labels = parse_bool(w[1], line_no);
        if (has_labels) {
          if (w.size() < 3) throw ParseError("@classLabel true without any labels", line_no);
          ds.class_names.assign(w.begin() + 2, w.end());
        }
      } else if (key == "@dimensions") {
        if (w.size() < 2) throw ParseError("@dimensions needs a value", line_no);
        declared_dims = static_cast<std::size_t>(parse_value(w[1], line_no));
      } else if (key == "@timestamps") {
        if (w.size() >= 2 && parse_bool(w[1], line_no)) {
          throw ParseError("timestamped series are not supported", line_no);
        }
      } else if (key == "@targetlabel") {
        if (w.size() >= 2 && parse_bool(w[1], line_no)) {
          throw ParseError("regression targets are not supported", line_no);
        }
      }
      // @univariate, @equalLength, @seriesLength, @missing: informational.
      continue;
    }

    const auto fields = split(line, ':');
    const std::string_view label_field = trim(fields.back());
    if (fields.size() < 2 || label_field.find(',') != std::string_view::npos ||
        (declared_dims && fields.size() == *declared_dims)) {
      throw ParseError("missing class label field", line_no);
    }
    const std::size_t channels = fields.size() - 1;
    if (declared_dims && channels != *declared_dims) {
      throw SchemaError("line " + std::to_string(line_no) + ": " + std::to_string(channels) +
                        " channels, header declares " + std::to_string(*declared_dims));
    }
    if (!ds.instances.empty() && channels != ds.instances.front().channels) {
      throw SchemaError("line " + std::to_string(line_no) + ": " + std::to_string(channels) +
                        " channels, previous instances have " +
                        std::to_string(ds.instances.front().channels));
    }

    Series s;
    s.channels = channels;
    for (std::size_t c = 0; c < channels; ++c) {
      const auto tokens = split(fields[c], ',');
      if (c == 0) {
        s.length = tokens.size();
      } else if (tokens.size() != s.length) {
        throw SchemaError("line " + std::to_string(line_no) + ": channel " + std::to_string(c) +
                          " has " + std::to_string(tokens.size()) + " values, channel 0 has " +
                          std::to_string(s.length));
      }
      for (auto tok : tokens) s.values.push_back(parse_value(tok, line_no));
    }

    const auto it = std::find(ds.class_names.begin(), ds.class_names.end(), label_field);
    if (it == ds.class_names.end()) {
      throw VocabularyError("line " + std::to_string(line_no) + ": class label '" +
                            std::string(label_field) + "' is not declared");
    }
    ds.labels.push_back(static_cast<std::size_t>(it - ds.class_names.begin()));
    ds.instances.push_back(std::move(s));
  }

  if (!saw_content) throw ParseError("empty file: " + source_name);
  if (!in_data) throw ParseError("no @data section in " + source_name);
  if (ds.instances.empty()) throw ParseError("no data instances in " + source_name);
  return ds;
}

MvDataset parse_ts_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  MvDataset ds = parse_ts_text(buf.str(), path.filename().string());
  ds.split = lower(path.filename().string()).find("_test") != std::string::npos ? Split::test
                                                                                 : Split::train;
  return ds;
}

std::string to_ts_text(const MvDataset& ds) {
  std::ostringstream os;
  os << "@problemName " << ds.name << '\n';
  os << "@timeStamps false\n@missing false\n";
  os << "@univariate " << (ds.num_channels() == 1 ? "true" : "false") << '\n';
  os << "@dimensions " << ds.num_channels() << '\n';
  os << "@equalLength " << (ds.equal_length() ? "true" : "false") << '\n';
  if (ds.equal_length() && !ds.instances.empty()) os << "@seriesLength " << ds.max_length() << '\n';
  os << "@classLabel true";
  for (const auto& c : ds.class_names) os << ' ' << c;
  os << "\n@data\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& s = ds.instances[i];
    for (std::size_t c = 0; c < s.channels; ++c) {
      for (std::size_t t = 0; t < s.length; ++t) {
        if (t) os << ',';
        os << format_double(s.at(c, t));
      }
      os << ':';
    }
    os << ds.class_names[ds.labels[i]] << '\n';
  }
  return os.str();
}

std::pair<MvDataset, ChannelStats> zscore_normalize(const MvDataset& ds,
                                                    const std::optional<ChannelStats>& stats) {
  const std::size_t channels = ds.num_channels();
  ChannelStats st;
  if (stats) {
    if (stats->mean.size() != channels || stats->stddev.size() != channels) {
      throw SchemaError("zscore_normalize: stats cover " + std::to_string(stats->mean.size()) +
                        " channels, dataset has " + std::to_string(channels));
    }
    st = *stats;
  } else {
    st.mean.assign(channels, 0.0);
    st.stddev.assign(channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
      double total = 0.0;
      std::size_t count = 0;
      for (const auto& s : ds.instances) {
        for (std::size_t t = 0; t < s.length; ++t) total += s.at(c, t);
        count += s.length;
      }
      const double mean = count ? total / static_cast<double>(count) : 0.0;
      double sq = 0.0;
      for (const auto& s : ds.instances) {
        for (std::size_t t = 0; t < s.length; ++t) sq += (s.at(c, t) - mean) * (s.at(c, t) - mean);
      }
      st.mean[c] = mean;
      st.stddev[c] = count ? std::sqrt(sq / static_cast<double>(count)) : 0.0;
    }
  }
  MvDataset out = ds;
  for (auto& s : out.instances) {
    for (std::size_t c = 0; c < channels; ++c) {
      const bool constant = st.stddev[c] < kConstantChannelStd;
      for (std::size_t t = 0; t < s.length; ++t) {
        s.at(c, t) = constant ? 0.0 : (s.at(c, t) - st.mean[c]) / st.stddev[c];
      }
    }
  }
  return {std::move(out), std::move(st)};
}

MvDataset denormalize(const MvDataset& ds, const ChannelStats& stats) {
  if (stats.mean.size() != ds.num_channels()) throw SchemaError("denormalize: channel count mismatch");
  MvDataset out = ds;
  for (auto& s : out.instances) {
    for (std::size_t c = 0; c < s.channels; ++c) {
      for (std::size_t t = 0; t < s.length; ++t) s.at(c, t) = s.at(c, t) * stats.stddev[c] + stats.mean[c];
    }
  }
  return out;
}

MvDataset pad_to_length(const MvDataset& ds, std::size_t length) {
  if (length < ds.max_length()) {
    throw ContractError("pad_to_length: target " + std::to_string(length) +
                        " is shorter than the longest instance " + std::to_string(ds.max_length()));
  }
  MvDataset out = ds;
  for (auto& s : out.instances) {
    if (s.length == length) continue;
    Series padded;
    padded.channels = s.channels;
    padded.length = length;
    padded.values.assign(s.channels * length, 0.0);
    for (std::size_t c = 0; c < s.channels; ++c) {
      std::copy_n(s.values.begin() + static_cast<std::ptrdiff_t>(c * s.length), s.length,
                  padded.values.begin() + static_cast<std::ptrdiff_t>(c * length));
    }
    s = std::move(padded);
  }
  return out;
}

MvDataset pad_to_multiple(const MvDataset& ds, std::size_t granule) {
  if (granule == 0) throw ContractError("pad_to_multiple: granule must be >= 1");
  const std::size_t longest = ds.max_length();
  const std::size_t target = (longest + granule - 1) / granule * granule;
  return pad_to_length(ds, target);
}

BatchPlan make_batch_plan(std::size_t num_instances, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw ContractError("batch size must be >= 1");
  Rng rng(seed);
  return BatchPlan{batch_size, seed, rng.permutation(num_instances)};
}

std::vector<Batch> make_batches(const MvDataset& ds, const BatchPlan& plan) {
  if (plan.batch_size == 0) throw ContractError("batch size must be >= 1");
  std::vector<Batch> batches;
  if (ds.size() == 0) return batches;
  if (plan.order.size() != ds.size()) {
    throw ContractError("make_batches: plan covers " + std::to_string(plan.order.size()) +
                        " instances, dataset has " + std::to_string(ds.size()));
  }
  if (!ds.equal_length()) throw ContractError("make_batches: instances must be padded to equal length");
  const std::size_t length = ds.max_length();
  const std::size_t channels = ds.num_channels();
  for (std::size_t start = 0; start < plan.order.size(); start += plan.batch_size) {
    const std::size_t count = std::min(plan.batch_size, plan.order.size() - start);
    std::vector<double> values(count * length * channels);
    Batch b;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t idx = plan.order[start + i];
      if (idx >= ds.size()) throw ContractError("make_batches: index out of range");
      const Series& s = ds.instances[idx];
      for (std::size_t t = 0; t < length; ++t) {
        for (std::size_t c = 0; c < channels; ++c) {
          values[(i * length + t) * channels + c] = s.at(c, t);
        }
      }
      b.labels.push_back(ds.labels[idx]);
      b.indices.push_back(idx);
    }
    b.inputs = Tensor({count, length, channels}, std::move(values));
    batches.push_back(std::move(b));
  }
  return batches;
}

std::string dataset_debug_json(const MvDataset& ds, const std::optional<ChannelStats>& stats) {
  nlohmann::json j;
  j["name"] = ds.name;
  j["split"] = to_string(ds.split);
  j["shape"] = {ds.size(), ds.num_channels(), ds.max_length()};
  j["classes"] = ds.class_names;
  if (stats) j["stats"] = {{"mean", stats->mean}, {"std", stats->stddev}};
  if (!ds.instances.empty()) {
    const Series& s = ds.instances.front();
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t c = 0; c < s.channels; ++c) {
      rows.push_back(std::vector<double>(s.values.begin() + static_cast<std::ptrdiff_t>(c * s.length),
                                         s.values.begin() + static_cast<std::ptrdiff_t>((c + 1) * s.length)));
    }
    j["first_instance"] = {{"label", ds.class_names[ds.labels.front()]}, {"values", rows}};
  }
  return j.dump(2);
}

}  // namespace danet
