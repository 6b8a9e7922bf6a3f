// Copyright 2026 The Contrastive Authors.
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

#include <sys/wait.h>

#include <cstdio>

#include <gtest/gtest.h>
#include <httplib.h>

#include "contrastive/cli.hpp"
#include "test_support.hpp"

namespace contrastive {
namespace {

using testing::slurp;
using testing::TempDir;

struct Outcome {
  int code = -1;
  std::string out;
};

/// Runs the installed binary; stderr is discarded.
Outcome run_binary(const std::string& args) {
  const std::string cmd = std::string(CONTRASTIVE_CLI_PATH) + " " + args + " 2>/dev/null";
  Outcome o;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return o;
  char buf[4096];
  while (const auto n = std::fread(buf, 1, sizeof buf, p)) o.out.append(buf, n);
  const int status = ::pclose(p);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string common_args(const std::filesystem::path& out) {
  return "--data " + testing::data_file("winogrande_synthetic.jsonl").string() + " --templates " +
         testing::catalog_path().string() + " --out " + out.string();
}

TEST(Cli, RunHappyPath) {
  TempDir dir;
  const auto o = run_binary("--log-level off run --task winogrande --mode zeroshot --seed 3 " + common_args(dir / "r"));
  ASSERT_EQ(o.code, kExitOk);
  const auto summary = nlohmann::json::parse(o.out);
  EXPECT_EQ(summary["n_predicted"], 20);
  for (const char* f : {"report.jsonl", "report.txt", "trace.jsonl", "instances.jsonl", "timing.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "r" / f)) << f;
  }
}

TEST(Cli, UsageErrors) {
  TempDir dir;
  EXPECT_EQ(run_binary("run --bogus " + common_args(dir.path())).code, kExitUsage);
  EXPECT_EQ(run_binary("run --task winogrande").code, kExitUsage);
  EXPECT_EQ(run_binary("").code, kExitUsage);
  EXPECT_EQ(run_cli({"contrastive", "run", "--mode", "sideways", "--data", "x", "--templates", "y", "--out", "z"}),
            kExitUsage);
  EXPECT_EQ(run_cli({"contrastive", "--log-level", "off", "run", "--task", "wsc", "--labels", "l", "--data", "x",
                     "--templates", "y", "--out", "z"}),
            kExitUsage);
  EXPECT_EQ(run_cli({"contrastive", "--log-level", "off", "run", "--backend", "http://127.0.0.1:1", "--stub-marker",
                     "x", "--data", "x", "--templates", "y", "--out", "z"}),
            kExitUsage);
}

TEST(Cli, DataErrors) {
  TempDir dir;
  testing::write_text(dir / "empty.jsonl", "");
  EXPECT_EQ(run_cli({"contrastive", "--log-level", "off", "run", "--data", (dir / "empty.jsonl").string(),
                     "--templates", testing::catalog_path().string(), "--out", (dir / "o").string()}),
            kExitData);
}

TEST(Cli, ServerDownIsBackendError) {
  int port = 0;
  {
    httplib::Server s;
    port = s.bind_to_any_port("127.0.0.1");
  }
  TempDir dir;
  const auto o = run_binary("--log-level off run --backend http://127.0.0.1:" + std::to_string(port) +
                            " --retries 0 " + common_args(dir.path()));
  EXPECT_EQ(o.code, kExitBackend);
}

TEST(Cli, FlipEvalAndInspect) {
  TempDir dir;
  const auto o = run_binary("--log-level off flip-eval " + common_args(dir.path()));
  ASSERT_EQ(o.code, kExitOk);
  const auto drop = nlohmann::json::parse(slurp(dir / "flip_drop.json"));
  EXPECT_EQ(drop["type"], "flip_drop");
  EXPECT_EQ(drop["n_compared"], 20);
  const auto shown = run_binary("inspect syn-03 --out " + (dir / "flip").string());
  ASSERT_EQ(shown.code, kExitOk);
  EXPECT_EQ(nlohmann::json::parse(shown.out)["id"], "syn-03");
  EXPECT_EQ(run_binary("inspect nope --out " + (dir / "flip").string()).code, kExitData);
}

TEST(Cli, AbstractEvalWritesFourRegimes) {
  TempDir dir;
  const auto o = run_binary("--log-level off abstract-eval --data " + testing::data_file("geese.jsonl").string() +
                            " --templates " + testing::catalog_path().string() + " --out " + dir.path().string());
  ASSERT_EQ(o.code, kExitOk);
  std::istringstream lines(slurp(dir / "abstraction.jsonl"));
  std::vector<std::string> regimes;
  for (std::string line; std::getline(lines, line);) regimes.push_back(nlohmann::json::parse(line)["regime"]);
  EXPECT_EQ(regimes, (std::vector<std::string>{"none", "context-only-abstracted", "abstract-full", "abstract-after"}));
}

TEST(Cli, CsqaAndPiqa) {
  TempDir dir;
  auto o = run_binary("--log-level off csqa --data " + testing::data_file("csqa_small.jsonl").string() +
                      " --templates " + testing::catalog_path().string() + " --out " + (dir / "c").string());
  ASSERT_EQ(o.code, kExitOk);
  EXPECT_TRUE(nlohmann::json::parse(o.out).contains("csqa_vote_accuracy"));
  o = run_binary("--log-level off run --task piqa --data " + testing::data_file("piqa_small.jsonl").string() +
                 " --labels " + testing::data_file("piqa_small_labels.lst").string() + " --templates " +
                 testing::catalog_path().string() + " --out " + (dir / "p").string());
  ASSERT_EQ(o.code, kExitOk);
  EXPECT_EQ(nlohmann::json::parse(o.out)["n_predicted"], 3);
}

TEST(Cli, ExpandCatalog) {
  TempDir dir;
  const auto src = testing::source_dir() / "data" / "catalog_source.jsonl";
  const auto o = run_binary("expand-catalog --source " + src.string());
  ASSERT_EQ(o.code, kExitOk);
  EXPECT_EQ(o.out, slurp(testing::catalog_path()));
  ASSERT_EQ(run_binary("expand-catalog --source " + src.string() + " --out " + dir.path().string()).code, kExitOk);
  EXPECT_EQ(slurp(dir / "catalog.jsonl"), o.out);
}

}  // namespace
}  // namespace contrastive
