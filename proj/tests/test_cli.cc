// Copyright 2026 The Slowdown Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "test_support.h"

namespace slowdown {
namespace {

using nlohmann::json;
using testing::TempDir;

struct Result {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  Result run(const std::string& args) {
    const auto out = dir_ / "stdout.txt";
    const auto err = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.path().string() + "' && '" +
                            std::string(SLOWDOWN_CLI_PATH) + "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  std::filesystem::path path(const std::string& name) { return dir_ / name; }

  TempDir dir_;
};

TEST_F(CliTest, TopLevelHelpListsEverySubcommand) {
  auto r = run("--help");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  for (const char* sub : {"synth", "train", "baseline", "analyze", "compare", "scale",
                          "sample-size", "demo", "serve", "runs", "--registry",
                          "--config"}) {
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
  }
}

TEST_F(CliTest, SubcommandHelpDocumentsFlags) {
  const std::vector<std::pair<std::string, std::vector<std::string>>> expected = {
      {"synth", {"--templates", "--jobs", "--slow-fraction", "--injection", "--noise-cv",
                 "--seed", "--out"}},
      {"train", {"--data", "--trees", "--max-depth", "--min-leaf", "--features-per-split",
                 "--no-bootstrap", "--corr-threshold"}},
      {"baseline", {"--run"}},
      {"analyze", {"--run", "--data", "--job-id", "--all", "--truth", "--p", "--t1", "--t2",
                   "--top"}},
      {"compare", {"--data"}},
      {"scale", {"--seed"}},
      {"sample-size", {"--seed"}},
      {"demo", {"--data"}},
      {"serve", {"--bind"}},
      {"runs", {"--json"}},
  };
  for (const auto& [sub, flags] : expected) {
    auto r = run(sub + " --help");
    EXPECT_EQ(r.exit_code, 0) << sub << ": " << r.err;
    for (const auto& flag : flags) {
      EXPECT_NE(r.out.find(flag), std::string::npos) << sub << " " << flag;
    }
  }
}

TEST_F(CliTest, UnknownFlagIsUsageError) {
  auto r = run("synth --bogus");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("--bogus"), std::string::npos);
}

TEST_F(CliTest, MissingRequiredFlagIsUsageError) {
  EXPECT_EQ(run("train").exit_code, 1);
}

TEST_F(CliTest, AnalyzeWithEmptyRegistryExitsTwo) {
  ASSERT_EQ(run("synth --templates 2 --jobs 20 --out d.csv").exit_code, 0);
  auto r = run("--registry reg analyze --data d.csv --all");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("no model runs found"), std::string::npos) << r.err;
}

TEST_F(CliTest, MissingDataFileExitsTwo) {
  auto r = run("--registry reg train --data missing.csv");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, SynthWritesDataAndTruth) {
  auto r = run("synth --templates 3 --jobs 50 --seed 4 --out d.csv");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.err.find("wrote 150 jobs to d.csv"), std::string::npos) << r.err;
  const auto csv = slurp(path("d.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 151);
  const auto truth = json::parse(slurp(path("d.csv.truth.json")));
  EXPECT_TRUE(truth.at("injected").is_object());
}

TEST_F(CliTest, SynthIsDeterministicForSeed) {
  ASSERT_EQ(run("synth --templates 2 --jobs 30 --seed 11 --out a.csv").exit_code, 0);
  ASSERT_EQ(run("synth --templates 2 --jobs 30 --seed 11 --out b.csv").exit_code, 0);
  ASSERT_EQ(run("synth --templates 2 --jobs 30 --seed 12 --out c.csv").exit_code, 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_NE(slurp(path("a.csv")), slurp(path("c.csv")));
}

TEST_F(CliTest, ConfigFileSuppliesDefaultsAndFlagsWin) {
  {
    std::ofstream cfg(path("c.json"));
    cfg << R"({"synth": {"templates": 2, "jobs": 10, "seed": 3}})";
  }
  auto r = run("--config c.json synth --jobs 12 --out d.csv");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.err.find("wrote 24 jobs"), std::string::npos) << r.err;
}

TEST_F(CliTest, TrainAnalyzeRunsSmoke) {
  ASSERT_EQ(run("synth --templates 6 --jobs 300 --seed 7 --out s.csv").exit_code, 0);
  auto train = run("--registry reg train --data s.csv --trees 40 --seed 1 --json");
  ASSERT_EQ(train.exit_code, 0) << train.err;
  const auto manifest = json::parse(train.out);
  const auto run_id = manifest.at("run_id").get<std::string>();
  EXPECT_EQ(run_id.size(), 16u);

  auto runs = run("--registry reg runs --json");
  ASSERT_EQ(runs.exit_code, 0) << runs.err;
  const auto listed = json::parse(runs.out);
  ASSERT_EQ(listed.size(), 1u);
  EXPECT_EQ(listed[0].at("run_id"), run_id);

  const auto truth = json::parse(slurp(path("s.csv.truth.json"))).at("injected");
  std::string job;
  for (const auto& [id, feature] : truth.items()) {
    if (feature == "input_size") {
      job = id;
      break;
    }
  }
  ASSERT_FALSE(job.empty());

  auto one = run("--registry reg analyze --run " + run_id + " --data s.csv --job-id " + job +
                 " --json");
  ASSERT_EQ(one.exit_code, 0) << one.err;
  const auto report = json::parse(one.out);
  EXPECT_EQ(report.at("job_id"), job);
  ASSERT_FALSE(report.at("causes").empty());
  EXPECT_EQ(report.at("causes")[0].at("feature"), "input_size");
  EXPECT_GT(report.at("actual_runtime").get<double>(),
            report.at("baseline_runtime").get<double>());

  auto all = run("--registry reg analyze --data s.csv --all --truth s.csv.truth.json --json");
  ASSERT_EQ(all.exit_code, 0) << all.err;
  const auto summary = json::parse(all.out);
  EXPECT_EQ(summary.at("jobs"), 1800);
  EXPECT_GE(summary.at("recovery").at("top3").get<double>(), 0.95);

  auto unknown = run("--registry reg analyze --data s.csv --job-id nope");
  EXPECT_EQ(unknown.exit_code, 2);
}

TEST_F(CliTest, RunsOnEmptyRegistry) {
  auto r = run("--registry reg runs");
  EXPECT_EQ(r.exit_code, 0) << r.err;
}

}  // namespace
}  // namespace slowdown
