// SPDX-License-Identifier: Apache-2.0
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kTinyConfig = R"({
  "model": {"num_stages": 1, "window_size": 4, "channel_schedule": [8], "heads_schedule": [2],
            "blocks_schedule": [1]},
  "train": {"epochs": 2}
})";

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

fs::path workdir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "danet_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

Run danet(const fs::path& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + DANET_CLI_PATH + "\" " + args + " > \"" + out.string() +
                          "\" 2> \"" + err.string() + "\"";
  const int raw = std::system(cmd.c_str());
  return Run{WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
}

std::string train_args(const fs::path& dir, const std::string& extra = "") {
  return "train --config \"" + (dir / "tiny.json").string() + "\" --data \"" + DANET_DATA_DIR +
         "\" --dataset BasicMotions --out \"" + (dir / "runs").string() + "\" " + extra;
}

void fragment(const fs::path& p, const std::string& method, const std::string& dataset, double acc,
              std::size_t classes) {
  json j;
  j["results"] = json::array({{{"method", method}, {"dataset", dataset}, {"accuracy", acc}}});
  j["class_counts"] = {{dataset, classes}};
  write(p, j.dump());
}

}  // namespace

TEST_CASE("train writes checkpoint, history and eval fragment") {
  const fs::path dir = workdir("train");
  write(dir / "tiny.json", kTinyConfig);
  const Run r = danet(dir, train_args(dir));
  INFO(r.err);
  REQUIRE(r.status == 0);
  const fs::path run = dir / "runs" / "BasicMotions_seed0";
  CHECK(fs::is_regular_file(run / "checkpoint"));
  CHECK(fs::is_regular_file(run / "history.json"));
  CHECK(r.out.find("test accuracy: ") != std::string::npos);
  const json eval = json::parse(slurp(run / "eval.json"));
  CHECK(eval["results"][0]["dataset"] == "BasicMotions");
  CHECK(eval["class_counts"]["BasicMotions"] == 4);
  CHECK(eval["predictions"].size() == 40);
  CHECK(json::parse(slurp(run / "history.json")).size() == 2);
}

TEST_CASE("repeated training runs produce identical histories") {
  const fs::path dir = workdir("determinism");
  write(dir / "tiny.json", kTinyConfig);
  REQUIRE(danet(dir, train_args(dir, "--seed 3")).status == 0);
  const std::string first = slurp(dir / "runs" / "BasicMotions_seed3" / "history.json");
  REQUIRE(danet(dir, train_args(dir, "--seed 3")).status == 0);
  CHECK(slurp(dir / "runs" / "BasicMotions_seed3" / "history.json") == first);
}

TEST_CASE("command-line flags override the config file") {
  const fs::path dir = workdir("override");
  write(dir / "tiny.json", kTinyConfig);
  REQUIRE(danet(dir, train_args(dir, "--epochs 1 --seed 5")).status == 0);
  const json history = json::parse(slurp(dir / "runs" / "BasicMotions_seed5" / "history.json"));
  CHECK(history.size() == 1);
}

TEST_CASE("missing dataset files fail before any output is created") {
  const fs::path dir = workdir("missing");
  write(dir / "tiny.json", kTinyConfig);
  const Run r = danet(dir, "train --config \"" + (dir / "tiny.json").string() + "\" --data \"" +
                               (dir / "nodata").string() + "\" --dataset BasicMotions --out \"" +
                               (dir / "runs").string() + "\"");
  CHECK(r.status != 0);
  CHECK(r.err.find("BasicMotions_TRAIN.ts") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "runs"));
}

TEST_CASE("config type errors exit before training") {
  const fs::path dir = workdir("badconfig");
  write(dir / "tiny.json", R"({"model": {"window_size": "large"}})");
  const Run r = danet(dir, train_args(dir));
  CHECK(r.status == 2);
  CHECK(r.err.find("window_size") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "runs"));
  CHECK(danet(dir, "train --config \"" + (dir / "absent.json").string() + "\"").status == 2);
}

TEST_CASE("gradcheck exit codes") {
  const fs::path dir = workdir("gradcheck");
  const Run ok = danet(dir, "gradcheck");
  CHECK(ok.status == 0);
  CHECK(ok.out.find("tiny_model") != std::string::npos);

  const Run corrupt = danet(dir, "gradcheck --corrupt-op sigmoid");
  CHECK(corrupt.status == 1);
  CHECK(corrupt.err.find("sewa") != std::string::npos);

  CHECK(danet(dir, "gradcheck --tolerance 0 --layer mlp").status == 1);
}

TEST_CASE("report merges fragments from several methods") {
  const fs::path dir = workdir("report");
  fragment(dir / "a" / "eval.json", "A", "X", 0.9, 2);
  fragment(dir / "a2" / "eval.json", "A", "Y", 0.5, 3);
  fragment(dir / "b" / "eval.json", "B", "X", 0.8, 2);
  fragment(dir / "b2" / "eval.json", "B", "Y", 0.7, 3);
  const Run r = danet(dir, "report \"" + dir.string() + "\"");
  INFO(r.err);
  REQUIRE(r.status == 0);
  const json rep = json::parse(slurp(dir / "report.json"));
  CHECK(rep["summary"]["A"]["win"] == 1);
  CHECK(rep["summary"]["B"]["win"] == 1);
  CHECK(rep["summary"]["A"]["avg_rank"] == 1.5);
  CHECK(fs::is_regular_file(dir / "report.txt"));
  CHECK(r.out.find("MPCE") != std::string::npos);
}

TEST_CASE("report on a single fragment") {
  const fs::path dir = workdir("single");
  fragment(dir / "eval.json", "Solo", "X", 1.0, 4);
  REQUIRE(danet(dir, "report \"" + dir.string() + "\"").status == 0);
  const json rep = json::parse(slurp(dir / "report.json"));
  CHECK(rep["summary"]["Solo"]["win"] == 1);
  CHECK(rep["summary"]["Solo"]["avg_rank"] == 1.0);
  CHECK(rep["summary"]["Solo"]["mpce"] == 0.0);
}

TEST_CASE("report rejects invalid input") {
  const fs::path bad = workdir("report_bad");
  fragment(bad / "eval.json", "A", "X", 1.2, 2);
  const Run r = danet(bad, "report \"" + bad.string() + "\"");
  CHECK(r.status == 1);
  CHECK(r.err.find("1.2") != std::string::npos);
  CHECK_FALSE(fs::exists(bad / "report.json"));

  const fs::path empty = workdir("report_empty");
  CHECK(danet(empty, "report \"" + (empty / "sub").string() + "\"").status == 2);
  fs::create_directories(empty / "sub");
  CHECK(danet(empty, "report \"" + (empty / "sub").string() + "\"").status == 1);
}
