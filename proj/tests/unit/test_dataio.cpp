// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "danet/dataio.hpp"
#include "danet/error.hpp"
#include "danet/rng.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace danet;

namespace {

const char* kToy = R"(# toy fixture
@problemName Toy
@timeStamps false
@missing false
@univariate false
@dimensions 2
@equalLength true
@seriesLength 3
@classLabel true up down
@data
1,2,3:4,5,6:up
0.5,-1,2.25:7,8,1e-3:down
)";

MvDataset random_dataset(std::uint64_t seed, std::size_t n, std::size_t channels, std::size_t length) {
  Rng rng(seed);
  MvDataset ds;
  ds.name = "rand";
  ds.class_names = {"a", "b"};
  for (std::size_t i = 0; i < n; ++i) {
    Series s{channels, length, {}};
    for (std::size_t j = 0; j < channels * length; ++j) s.values.push_back(3.0 + 2.0 * rng.normal());
    ds.instances.push_back(s);
    ds.labels.push_back(i % 2);
  }
  return ds;
}

std::size_t line_of(const ParseError& e) { return e.line(); }

}  // namespace

TEST_CASE("handcrafted fixture parses to exact values") {
  const MvDataset ds = parse_ts_text(kToy, "Toy_TRAIN.ts");
  CHECK(ds.name == "Toy");
  CHECK(ds.size() == 2);
  CHECK(ds.num_channels() == 2);
  CHECK(ds.max_length() == 3);
  CHECK(ds.class_names == std::vector<std::string>{"up", "down"});
  CHECK(ds.labels == std::vector<std::size_t>{0, 1});
  CHECK(ds.instances[0].at(1, 2) == 6.0);
  CHECK(ds.instances[1].at(0, 2) == 2.25);
  CHECK(ds.instances[1].at(1, 2) == 1e-3);
}

TEST_CASE("BasicMotions train split has the published shape") {
  const MvDataset ds = parse_ts_file(std::filesystem::path(DANET_DATA_DIR) / "BasicMotions/BasicMotions_TRAIN.ts");
  CHECK(ds.size() == 40);
  CHECK(ds.num_channels() == 6);
  CHECK(ds.max_length() == 100);
  CHECK(ds.equal_length());
  CHECK(ds.class_names.size() == 4);
  CHECK(ds.split == Split::train);
  const MvDataset test = parse_ts_file(std::filesystem::path(DANET_DATA_DIR) / "BasicMotions/BasicMotions_TEST.ts");
  CHECK(test.size() == 40);
  CHECK(test.split == Split::test);
  CHECK(test.class_names == ds.class_names);
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(parse_ts_text("", "empty.ts"), ParseError);
  CHECK_THROWS_AS(parse_ts_text("@problemName X\n@classLabel true a\n", "x"), ParseError);
  CHECK_THROWS_AS(parse_ts_file("/nonexistent/file.ts"), ParseError);

  const std::string header = "@problemName T\n@dimensions 2\n@classLabel true a b\n@data\n";
  try {
    parse_ts_text(header + "1,2:3,4:a\n1,2:3,4\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(line_of(e) == 6);
    CHECK(std::string(e.what()).find("line 6") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_ts_text(header + "1,2:3,4:a\n1,2:3,4:5,6:b\n"), SchemaError);
  CHECK_THROWS_AS(parse_ts_text(header + "1,2:3,4,5:a\n"), SchemaError);
  CHECK_THROWS_AS(parse_ts_text(header + "1,2:3,4:c\n"), VocabularyError);
  CHECK_THROWS_AS(parse_ts_text(header + "1,?:3,4:a\n"), ParseError);
  CHECK_THROWS_AS(parse_ts_text(header + "1,x:3,4:a\n"), ParseError);

  const std::string undeclared = "@problemName T\n@classLabel true a b\n@data\n";
  CHECK_THROWS_AS(parse_ts_text(undeclared + "1,2:3,4:a\n1,2:3,4:5,6:b\n"), SchemaError);
}

TEST_CASE("parse then serialize then parse is value-identical") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const MvDataset ds = random_dataset(seed, 4, 3, 7);
    const MvDataset back = parse_ts_text(to_ts_text(ds));
    REQUIRE(back.size() == ds.size());
    CHECK(back.labels == ds.labels);
    CHECK(back.class_names == ds.class_names);
    for (std::size_t i = 0; i < ds.size(); ++i) CHECK(back.instances[i].values == ds.instances[i].values);
  }
}

TEST_CASE("zscore examples") {
  MvDataset ds;
  ds.class_names = {"a"};
  ds.instances.push_back(Series{2, 3, {1, 2, 3, 5, 5, 5}});
  ds.labels = {0};
  const auto [norm, stats] = zscore_normalize(ds);
  CHECK(std::abs(norm.instances[0].at(0, 0) + 1.2247) < 1e-4);
  CHECK(norm.instances[0].at(0, 1) == 0.0);
  CHECK(std::abs(norm.instances[0].at(0, 2) - 1.2247) < 1e-4);
  for (std::size_t t = 0; t < 3; ++t) CHECK(norm.instances[0].at(1, t) == 0.0);

  ChannelStats wrong{{0.0}, {1.0}};
  CHECK_THROWS_AS(zscore_normalize(ds, wrong), SchemaError);
}

TEST_CASE("normalized train channels have zero mean and unit std") {
  const MvDataset ds = random_dataset(3, 10, 4, 20);
  const auto [norm, stats] = zscore_normalize(ds);
  for (std::size_t c = 0; c < 4; ++c) {
    double mean = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto& s : norm.instances) {
      for (std::size_t t = 0; t < s.length; ++t) {
        mean += s.at(c, t);
        ++n;
      }
    }
    mean /= static_cast<double>(n);
    for (const auto& s : norm.instances) {
      for (std::size_t t = 0; t < s.length; ++t) sq += (s.at(c, t) - mean) * (s.at(c, t) - mean);
    }
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(sq / static_cast<double>(n)) - 1.0) < 1e-6);
  }
  const MvDataset back = denormalize(norm, stats);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.instances[i].values.size(); ++j) {
      CHECK(std::abs(back.instances[i].values[j] - ds.instances[i].values[j]) < 1e-9);
    }
  }
}

TEST_CASE("padding examples") {
  const MvDataset ds = random_dataset(1, 2, 3, 100);
  const MvDataset p = pad_to_multiple(ds, 256);
  CHECK(p.max_length() == 256);
  for (const auto& s : p.instances) {
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t t = 100; t < 256; ++t) CHECK(s.at(c, t) == 0.0);
    }
  }
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t t = 0; t < 100; ++t) CHECK(p.instances[i].at(c, t) == ds.instances[i].at(c, t));
    }
  }
  CHECK(pad_to_multiple(ds, 50).instances[0].values == ds.instances[0].values);
  CHECK(pad_to_multiple(ds, 1).instances[1].values == ds.instances[1].values);
  CHECK_THROWS_AS(pad_to_multiple(ds, 0), ContractError);
  CHECK_THROWS_AS(pad_to_length(ds, 99), ContractError);
}

TEST_CASE("unequal lengths pad to the longest instance") {
  MvDataset ds;
  ds.class_names = {"a"};
  ds.instances = {Series{1, 2, {1, 2}}, Series{1, 5, {1, 2, 3, 4, 5}}};
  ds.labels = {0, 0};
  CHECK_FALSE(ds.equal_length());
  const MvDataset p = pad_to_multiple(ds, 4);
  CHECK(p.equal_length());
  CHECK(p.max_length() == 8);
  CHECK(p.instances[0].values == std::vector<double>{1, 2, 0, 0, 0, 0, 0, 0});
}

TEST_CASE("batching examples") {
  const MvDataset ds = random_dataset(2, 40, 2, 8);
  const auto batches = make_batches(ds, make_batch_plan(40, 16, 7));
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].labels.size() == 16);
  CHECK(batches[1].labels.size() == 16);
  CHECK(batches[2].labels.size() == 8);
  CHECK(batches[2].inputs.shape() == Shape{8, 8, 2});

  std::multiset<std::size_t> seen;
  for (const auto& b : batches) {
    for (std::size_t r = 0; r < b.indices.size(); ++r) {
      seen.insert(b.indices[r]);
      const Series& s = ds.instances[b.indices[r]];
      CHECK(b.labels[r] == ds.labels[b.indices[r]]);
      for (std::size_t t = 0; t < 8; ++t) {
        for (std::size_t c = 0; c < 2; ++c) CHECK(b.inputs.at({r, t, c}) == s.at(c, t));
      }
    }
  }
  CHECK(seen.size() == 40);
  for (std::size_t i = 0; i < 40; ++i) CHECK(seen.count(i) == 1);

  CHECK(make_batches(ds, make_batch_plan(40, 64, 7)).size() == 1);
  CHECK(make_batch_plan(40, 16, 7).order == make_batch_plan(40, 16, 7).order);
  CHECK(make_batch_plan(40, 16, 7).order != make_batch_plan(40, 16, 8).order);

  MvDataset empty;
  CHECK(make_batches(empty, make_batch_plan(0, 16, 1)).empty());
  CHECK_THROWS_AS(make_batch_plan(4, 0, 1), ContractError);
}

TEST_CASE("debug dump reports shape, stats and the first instance") {
  const MvDataset ds = parse_ts_text(kToy, "Toy_TEST.ts");
  const auto [norm, stats] = zscore_normalize(ds);
  const auto j = nlohmann::json::parse(dataset_debug_json(norm, stats));
  CHECK(j["name"] == "Toy");
  CHECK(j["split"] == "test");
  CHECK(j["shape"] == nlohmann::json::array({2, 2, 3}));
  CHECK(j["stats"]["mean"].size() == 2);
  CHECK(j["first_instance"]["label"] == "up");
}
