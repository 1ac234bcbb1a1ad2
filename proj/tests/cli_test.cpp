// Copyright 2026 The HPTMT Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace hptmt {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "hptmt");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  int code = cli::Main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> Lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

fs::path TempDir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("hptmt_cli_" + name + "_" + std::to_string(getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(Cli({}).code, cli::kExitUsage);
  EXPECT_EQ(Cli({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(Cli({"pipeline", "--bogus"}).code, cli::kExitUsage);
  EXPECT_EQ(Cli({"pipeline", "--local-threads", "2", "--rank", "0"}).code, cli::kExitUsage);
  EXPECT_EQ(Cli({"pipeline", "--rank", "0"}).code, cli::kExitUsage);
  EXPECT_EQ(Cli({"pipeline", "--epochs", "0"}).code, cli::kExitUsage);
  EXPECT_EQ(Cli({"selftest", "--instances", "0"}).code, cli::kExitUsage);
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(Cli({"--help"}).code, cli::kExitOk); }

TEST(Cli, BenchJoinEmitsCsv) {
  CliRun r = Cli({"bench-join", "--local-threads", "2", "--rows", "100000", "--uniqueness", "0.10",
               "--repeat", "1"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  auto lines = Lines(r.out);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0], "op,world,rows,uniqueness,repeat,seconds");
  EXPECT_EQ(lines[1].rfind("join,2,100000,0.1000,1,", 0), 0u) << lines[1];
}

TEST(Cli, BenchSortAppendsToFile) {
  fs::path dir = TempDir("bench");
  std::string csv = (dir / "b.csv").string();
  for (const char* p : {"1", "3"}) {
    CliRun r = Cli({"bench-sort", "--local-threads", p, "--rows", "5000", "--repeat", "1", "--out", csv});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  }
  std::ifstream in(csv);
  std::stringstream ss;
  ss << in.rdbuf();
  auto lines = Lines(ss.str());
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[1].rfind("sort,1,5000,", 0), 0u);
  EXPECT_EQ(lines[2].rfind("sort,3,5000,", 0), 0u);
  fs::remove_all(dir);
}

TEST(Cli, PipelineEmitsMetrics) {
  CliRun r = Cli({"pipeline", "--local-threads", "4", "--seed", "7", "--epochs", "2", "--rows", "1500"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  auto lines = Lines(r.out);
  ASSERT_GT(lines.size(), 4u);
  EXPECT_EQ(lines[0], "stage,rank,rows_in,rows_out,seconds");
  for (int rank = 0; rank < 4; ++rank) {
    std::string prefix = "train," + std::to_string(rank) + ",";
    EXPECT_TRUE(std::any_of(lines.begin(), lines.end(), [&](const std::string& l) { return l.rfind(prefix, 0) == 0; }))
        << prefix;
  }
  EXPECT_NE(r.err.find("epoch 2 loss"), std::string::npos);
}

TEST(Cli, SelftestPasses) {
  CliRun r = Cli({"selftest", "--local-threads", "4", "--instances", "3"});
  EXPECT_EQ(r.code, cli::kExitOk) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
  EXPECT_NE(r.out.find("PASS dist_join/inner p=4 3/3"), std::string::npos);
}

TEST(Cli, GenDataWritesFourFiles) {
  fs::path dir = TempDir("gen");
  CliRun r = Cli({"gen-data", "--local-threads", "2", "--rows", "300", "--out", dir.string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  for (const char* f : {"response.csv", "drug_features_a.csv", "drug_features_b.csv", "rna.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  fs::remove_all(dir);
}

TEST(Cli, LaunchSpawnsTcpWorkers) {
  fs::path dir = TempDir("launch");
  std::string cmd = std::string(HPTMT_TOOL_PATH) + " pipeline --launch 2 --hostfile " +
                    (dir / "hosts").string() + " --epochs 1 --rows 600 --out " +
                    (dir / "m.csv").string() + " > " + (dir / "log").string() + " 2>&1";
  int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0);
  std::ifstream in(dir / "m.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "stage,rank,rows_in,rows_out,seconds");
  fs::remove_all(dir);
}

}  // namespace
}  // namespace hptmt
