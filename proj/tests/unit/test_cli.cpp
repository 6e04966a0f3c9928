// Copyright 2026 The archgen Authors.
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

#include <sstream>

#include "archgen/cli.hpp"
#include "archgen/corpus.hpp"
#include "archgen/reporting.hpp"
#include "test_util.hpp"

namespace archgen {
namespace {

using testing::TempDir;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// Small models so the pipeline runs in seconds.
void write_tiny_config(const std::filesystem::path& p) {
  testing::write_text(p, R"({
    "gpt": {"n_layers": 1, "n_heads": 2, "d_model": 16, "d_ff": 32, "context_len": 6, "epochs": 1, "lr": 0.003},
    "fcn": {"hidden": [16], "epochs": 2},
    "ga": {"population": 6, "generations": 2}
  })");
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({"search"}).code, kExitUsage);  // --out is required
  EXPECT_EQ(cli({"--threads", "0", "report", "x"}).code, kExitUsage);
  EXPECT_EQ(cli({"--config", "/nonexistent/config.json", "report", "x"}).code, kExitUsage);
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
}

TEST(Cli, DataErrorsExitTwo) {
  TempDir dir;
  const auto missing = cli({"report", (dir / "no_run").string()});
  EXPECT_EQ(missing.code, kExitData);
  EXPECT_NE(missing.err.find("no_run"), std::string::npos);
  testing::write_text(dir / "arch.json", "{\"blocks\": 3}");
  EXPECT_EQ(cli({"eval", "--arch", (dir / "arch.json").string()}).code, kExitData);
  testing::write_text(dir / "bad.jsonl", "{\"id\": \"a\"}\nnot json\n");
  EXPECT_EQ(cli({"correlate", "--corpus", (dir / "bad.jsonl").string()}).code, kExitData);
}

TEST(Cli, EvalPrintsRecord) {
  TempDir dir;
  Rng rng(3);
  write_architecture(dir / "a.json", sample_architecture(rng, {}));
  const auto r = cli({"eval", "--arch", (dir / "a.json").string(), "--mode", "cheap"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = Json::parse(r.out);
  EXPECT_EQ(j.at("mode"), "cheap");
  EXPECT_GE(j.at("fitness").get<double>(), 0.0);
  EXPECT_LE(j.at("fitness").get<double>(), 1.0);
}

TEST(Cli, PipelineAndBitwiseRerun) {
  TempDir dir;
  const auto p = [&](const std::string& f) { return (dir / f).string(); };
  write_tiny_config(dir / "cfg.json");
  const std::vector<std::string> base{"--config", p("cfg.json"), "--seed", "4", "--log-level", "error"};
  auto with = [&](std::vector<std::string> rest) {
    auto a = base;
    a.insert(a.end(), rest.begin(), rest.end());
    return cli(a);
  };
  auto r = with({"build-corpus", "--source", "teacher", "--count", "40", "--out", p("pre.jsonl")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(read_corpus(dir / "pre.jsonl").size(), 40u);
  r = with({"pretrain", "--corpus", p("pre.jsonl"), "--out", p("gpt.bin")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "gpt.bin.report.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "gpt.bin.manifest.json"));
  r = with({"train-fcn", "--corpus", p("pre.jsonl"), "--gpt", p("gpt.bin"), "--out", p("fcn.bin")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  r = with({"search", "--gpt", p("gpt.bin"), "--fcn", p("fcn.bin"), "--out", p("run")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* f : {kResultFile, kGenerationsFile, kBestArchFile, kManifestFile})
    EXPECT_TRUE(std::filesystem::exists(dir / "run" / f)) << f;

  r = cli({"report", p("run")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("best fitness"), std::string::npos);

  r = cli({"rerun", p("run/manifest.json"), "--out", p("run2")});
  ASSERT_EQ(r.code, kExitOk) << r.out << r.err;
  EXPECT_NE(r.out.find("bitwise identical"), std::string::npos);
  EXPECT_EQ(testing::read_text(dir / "run" / kResultFile), testing::read_text(dir / "run2" / kResultFile));

  r = cli({"rerun", p("gpt.bin.manifest.json"), "--out", p("gpt2.bin")});
  ASSERT_EQ(r.code, kExitOk) << r.out << r.err;

  // A changed input makes the rerun refuse to start.
  testing::write_text(dir / "pre.jsonl", testing::read_text(dir / "pre.jsonl") + "\n");
  r = cli({"rerun", p("gpt.bin.manifest.json"), "--out", p("gpt3.bin")});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("changed"), std::string::npos);
}

TEST(Cli, VocabularyMismatchIsRejected) {
  TempDir dir;
  const auto p = [&](const std::string& f) { return (dir / f).string(); };
  write_tiny_config(dir / "cfg.json");
  for (const char* seed : {"1", "2"}) {
    const std::string s(seed);
    ASSERT_EQ(cli({"--config", p("cfg.json"), "--seed", s, "build-corpus", "--count", "20", "--out", p("c" + s)}).code,
              kExitOk);
    ASSERT_EQ(cli({"--config", p("cfg.json"), "--seed", s, "pretrain", "--corpus", p("c" + s), "--out", p("g" + s)}).code,
              kExitOk);
  }
  ASSERT_EQ(cli({"--config", p("cfg.json"), "train-fcn", "--corpus", p("c1"), "--gpt", p("g1"), "--out", p("f1")}).code,
            kExitOk);
  const auto r = cli({"--config", p("cfg.json"), "search", "--gpt", p("g2"), "--fcn", p("f1"), "--out", p("run")});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("vocab"), std::string::npos);
}

}  // namespace
}  // namespace archgen
