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

#include "archgen/checkpoint.hpp"
#include "archgen/config.hpp"
#include "archgen/errors.hpp"
#include "archgen/evolution.hpp"
#include "archgen/reporting.hpp"
#include "mock_guidance.hpp"
#include "test_util.hpp"

namespace archgen {
namespace {

using testing::TempDir;

GptConfig tiny_gpt(int vocab) {
  GptConfig c;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_model = 16;
  c.d_ff = 32;
  c.context_len = 6;
  c.vocab_size = vocab;
  c.seed = 5;
  return c;
}

TEST(Checkpoint, GptRoundTripIsBitExact) {
  TempDir dir;
  const auto vocab = testing::sample_vocabulary(1);
  const GptModel<float> m(tiny_gpt(vocab.size()));
  save_gpt(dir / "g.bin", m, vocab);
  const auto back = load_gpt<float>(dir / "g.bin");
  EXPECT_EQ(back.model.parameters(), m.parameters());
  EXPECT_EQ(back.model.config().d_model, 16);
  EXPECT_EQ(back.model.config().n_layers, 2);
  EXPECT_EQ(back.vocab.hash(), vocab.hash());
  EXPECT_EQ(back.vocab.size(), vocab.size());
  EXPECT_TRUE(back.vocab.frozen());
  for (TokenId t = Vocabulary::kNumSpecial; t < vocab.size(); ++t) EXPECT_EQ(back.vocab.key(t), vocab.key(t));
}

TEST(Checkpoint, PrecisionConversion) {
  TempDir dir;
  const auto vocab = testing::sample_vocabulary(2);
  const GptModel<double> m(tiny_gpt(vocab.size()));
  save_gpt(dir / "g.bin", m, vocab);
  const auto f = load_gpt<float>(dir / "g.bin");
  ASSERT_EQ(f.model.parameters().size(), m.parameters().size());
  EXPECT_TRUE(f.model.parameters().cast<double>().isApprox(m.parameters(), 1e-6));
  const auto header = read_checkpoint_header(dir / "g.bin");
  EXPECT_EQ(header.at("type"), "gpt");
  EXPECT_EQ(header.at("scalar"), "float64");
}

TEST(Checkpoint, FcnRoundTrip) {
  TempDir dir;
  const auto vocab = testing::sample_vocabulary(3);
  FcnConfig c;
  c.context_len = 4;
  c.vocab_size = vocab.size();
  c.hidden = {8};
  FcnModel<float> m(c);
  m.parameters().setLinSpaced(-1.0f, 1.0f);
  save_fcn(dir / "f.bin", m, vocab);
  const auto back = load_fcn<float>(dir / "f.bin");
  EXPECT_EQ(back.model.parameters(), m.parameters());
  EXPECT_EQ(back.model.config().hidden, std::vector<int>{8});
  EXPECT_EQ(back.vocab.hash(), vocab.hash());
  EXPECT_THROW(load_gpt<float>(dir / "f.bin"), DataError);
}

TEST(Checkpoint, BadFilesAreDataErrors) {
  TempDir dir;
  const auto vocab = testing::sample_vocabulary(4);
  save_gpt(dir / "g.bin", GptModel<float>(tiny_gpt(vocab.size())), vocab);
  const auto bytes = testing::read_text(dir / "g.bin");
  testing::write_text(dir / "truncated.bin", bytes.substr(0, bytes.size() - 9));
  testing::write_text(dir / "foreign.bin", "PK\x03\x04 this is a zip file, honestly");
  testing::write_text(dir / "empty.bin", "");
  auto flipped = bytes;
  flipped[20] = '!';  // inside the JSON header
  testing::write_text(dir / "header.bin", flipped);
  EXPECT_THROW(load_gpt<float>(dir / "truncated.bin"), DataError);
  EXPECT_THROW(load_gpt<float>(dir / "foreign.bin"), DataError);
  EXPECT_THROW(load_gpt<float>(dir / "empty.bin"), DataError);
  EXPECT_THROW(load_gpt<float>(dir / "header.bin"), DataError);
  EXPECT_THROW(load_gpt<float>(dir / "missing.bin"), DataError);
}

TEST(Checkpoint, FileDigest) {
  TempDir dir;
  testing::write_text(dir / "a", "");
  testing::write_text(dir / "b", "a");
  EXPECT_EQ(file_digest(dir / "a"), "cbf29ce484222325");  // FNV-1a offset basis
  EXPECT_EQ(file_digest(dir / "b"), "af63dc4c8601ec8c");
  EXPECT_THROW(file_digest(dir / "nope"), DataError);
}

TEST(Config, DefaultsAndOverlay) {
  const auto c = config_from_json(Json::parse(R"({"ga": {"population": 12}, "gpt": {"context_len": 7}})"));
  EXPECT_EQ(c.ga.population, 12);
  EXPECT_EQ(c.ga.generations, 20);
  EXPECT_EQ(c.gpt.context_len, 7);
  EXPECT_EQ(c.fcn.context_len, 7);
  EXPECT_EQ(c.evaluator.kind, "surrogate");
  const auto back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST(Config, UnknownKeysAreRejected) {
  EXPECT_THROW(config_from_json(Json::parse(R"({"optimizer": {}})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"ga": {"popsize": 3}})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"evaluator": {"kind": "oracle"}})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"evaluator": {"mode": "medium"}})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"corpus": {"source": "imagenet"}})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse("[1, 2]")), ConfigError);
}

TEST(Config, LoadFileWithComments) {
  TempDir dir;
  testing::write_text(dir / "c.json", "{\n  // smaller run\n  \"ga\": {\"generations\": 3}\n}\n");
  EXPECT_EQ(load_config(dir / "c.json").ga.generations, 3);
  testing::write_text(dir / "bad.json", "{\"ga\": ");
  EXPECT_THROW(load_config(dir / "bad.json"), ConfigError);
  EXPECT_THROW(load_config(dir / "none.json"), ConfigError);
}

TEST(Config, RepositoryDefaultsParse) {
  const auto c = load_config(std::filesystem::path(ARCHGEN_SOURCE_DIR) / "configs" / "default.json");
  EXPECT_NO_THROW(c.ga.check());
  auto gpt = c.gpt;
  gpt.vocab_size = 100;  // filled in from the corpus
  EXPECT_NO_THROW(gpt.check());
}

TEST(Config, MakeEvaluator) {
  EvaluatorConfig c;
  EXPECT_EQ(make_evaluator(c)->name(), "surrogate");
  c.kind = "tabular";
  EXPECT_THROW(make_evaluator(c), ConfigError);
  c.table = testing::data_path("nasbench_50.jsonl").string();
  c.kind = "external";
  EXPECT_THROW(make_evaluator(c), ConfigError);  // no command
}

SearchResult small_run() {
  GaConfig cfg;
  cfg.population = 6;
  cfg.generations = 3;
  cfg.seed = 9;
  SurrogateEvaluator ev(teacher_from_json(Json::object()), SurrogateMode::kFull);
  return run_search(cfg, {}, ev);
}

TEST(Reporting, LoadRunMatchesResult) {
  TempDir dir;
  const auto r = small_run();
  write_search_outputs(dir.path(), r);
  std::ostringstream out;
  const auto s = report(dir.path(), out);
  EXPECT_EQ(s.best_so_far.size(), 4u);
  EXPECT_EQ(s.evaluations, r.evaluations);
  EXPECT_DOUBLE_EQ(s.best_so_far.back(), r.best.score());
  EXPECT_NE(out.str().find("best fitness"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "best_fitness.tsv"));
  const auto tsv = testing::read_text(dir / "best_fitness.tsv");
  EXPECT_EQ(std::count(tsv.begin(), tsv.end(), '\n'), 5);
}

TEST(Reporting, BrokenRunsAreReportErrors) {
  const auto r = small_run();
  {
    TempDir dir;
    EXPECT_THROW(load_run(dir / "absent"), ReportError);
    write_search_outputs(dir.path(), r);
    std::filesystem::remove(dir / kGenerationsFile);
    EXPECT_THROW(load_run(dir.path()), ReportError);
  }
  {
    TempDir dir;
    write_search_outputs(dir.path(), r);
    testing::write_text(dir / kResultFile, "{\"best\": ");
    EXPECT_THROW(load_run(dir.path()), ReportError);
  }
  {
    TempDir dir;
    write_search_outputs(dir.path(), r);
    auto j = testing::load_json(dir / kResultFile);
    j["evaluations"] = r.evaluations + 1;
    testing::write_text(dir / kResultFile, j.dump());
    EXPECT_THROW(load_run(dir.path()), ReportError);
  }
  {
    TempDir dir;
    write_search_outputs(dir.path(), r);
    const auto text = testing::read_text(dir / kGenerationsFile);
    testing::write_text(dir / kGenerationsFile, text.substr(0, text.find('\n') + 1));
    EXPECT_THROW(load_run(dir.path()), ReportError);
  }
}

TEST(Reporting, ManifestRoundTrip) {
  TempDir dir;
  testing::write_text(dir / "in.txt", "hello");
  RunManifest m;
  m.tool_version = "0.1.0";
  m.command = "search";
  m.argv = {"search", "--out", "x"};
  m.cwd = dir.path().string();
  m.config = Json{{"ga", {{"population", 3}}}};
  m.seeds = Json{{"master", 4}};
  m.inputs = {make_artifact("corpus", dir / "in.txt")};
  m.started_at = utc_timestamp();
  m.finished_at = m.started_at;
  write_manifest(dir / "m.json", m);
  const auto back = read_manifest(dir / "m.json");
  EXPECT_EQ(manifest_to_json(back), manifest_to_json(m));
  EXPECT_EQ(back.inputs.at(0).digest, file_digest(dir / "in.txt"));
  EXPECT_EQ(m.started_at.size(), 20u);
  EXPECT_EQ(m.started_at.back(), 'Z');
}

}  // namespace
}  // namespace archgen
