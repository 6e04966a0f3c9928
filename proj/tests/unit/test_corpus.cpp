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

#include <map>

#include "archgen/corpus.hpp"
#include "archgen/errors.hpp"
#include "archgen/teacher.hpp"
#include "test_util.hpp"

namespace archgen {
namespace {

using testing::data_path;
using testing::TempDir;
using testing::write_text;

std::string op_of(const LayerDescriptor& l) {
  if (l.category == LayerCategory::kOther && l.name == "maxpool_same") return "maxpool3x3";
  if (l.category == LayerCategory::kConv && l.kernel == Pair2{3, 3}) return "conv3x3-bn-relu";
  if (l.category == LayerCategory::kConv && l.kernel == Pair2{1, 1}) return "conv1x1-bn-relu";
  return "?";
}

TEST(Nasbench, FixtureRetainsExactlyTheAccurateRecords) {
  const auto expected = testing::load_json(data_path("nasbench_50.expected.json"));
  NasbenchStats stats;
  const auto records = load_nasbench(data_path("nasbench_50.jsonl"), 0.90, &stats);
  EXPECT_EQ(stats.total, 50u);
  ASSERT_EQ(records.size(), expected["retained"].get<std::size_t>());
  EXPECT_EQ(stats.retained, records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& want = expected["records"][i];
    const auto& rec = records[i];
    EXPECT_EQ(rec.source, CorpusSource::kNasbench);
    ASSERT_TRUE(rec.fitness);
    EXPECT_GE(*rec.fitness, 0.90);
    EXPECT_EQ(*rec.fitness, want["accuracy"].get<double>());
    EXPECT_NO_THROW(validate(rec.arch, std::nullopt));
    const auto cell_ops = want["cell_ops"].get<std::vector<std::string>>();
    if (cell_ops.empty()) continue;
    // Block 0 is the stem; block 1 is the first cell.
    std::vector<std::string> got;
    for (const auto& l : rec.arch.blocks.at(1).layers) got.push_back(op_of(l));
    EXPECT_EQ(got, cell_ops) << "line " << want["line"];
  }
}

TEST(Nasbench, LowerThresholdKeepsEverything) {
  EXPECT_EQ(load_nasbench(data_path("nasbench_50.jsonl"), 0.0).size(), 50u);
}

TEST(Nasbench, LinearCellFlattensToOneLayer) {
  const auto layers = flatten_cell({{0, 1, 0}, {0, 0, 1}, {0, 0, 0}}, {"input", "conv3x3-bn-relu", "output"},
                                   {16, 8, 8}, 32);
  ASSERT_EQ(layers.size(), 1u);
  EXPECT_EQ(layers[0].out_size, (Shape3{32, 8, 8}));
}

TEST(Nasbench, TiesBreakByVertexIndex) {
  // 0 -> {1, 2} -> 3: vertices 1 and 2 are both ready after the input.
  const std::vector<std::vector<int>> adj{{0, 1, 1, 0}, {0, 0, 0, 1}, {0, 0, 0, 1}, {0, 0, 0, 0}};
  const auto layers = flatten_cell(adj, {"input", "maxpool3x3", "conv1x1-bn-relu", "output"}, {8, 8, 8}, 8);
  ASSERT_EQ(layers.size(), 2u);
  EXPECT_EQ(op_of(layers[0]), "maxpool3x3");
  EXPECT_EQ(op_of(layers[1]), "conv1x1-bn-relu");
}

TEST(Nasbench, CycleIsGraphError) {
  const std::vector<std::vector<int>> adj{{0, 1, 0, 0}, {0, 0, 1, 0}, {0, 1, 0, 1}, {0, 0, 0, 0}};
  EXPECT_THROW(flatten_cell(adj, {"input", "conv3x3-bn-relu", "conv3x3-bn-relu", "output"}, {8, 8, 8}, 8),
               GraphError);
}

TEST(Nasbench, MalformedRecordsCarryLineNumbers) {
  TempDir dir;
  const std::string good = R"({"adjacency": [0,1,0,0], "ops": ["input","output"], "val_accuracy": 0.95})";
  auto expect_line = [&](const std::string& bad, std::size_t line) {
    write_text(dir / "nb.jsonl", good + "\n\n" + bad + "\n");
    try {
      load_nasbench(dir / "nb.jsonl");
      ADD_FAILURE() << bad;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), line) << bad;
    }
  };
  expect_line("{broken", 3);
  expect_line(R"({"adjacency": [0,1,0], "ops": ["input","output"], "val_accuracy": 0.95})", 3);
  expect_line(R"({"adjacency": [0,1,0,0], "ops": ["conv3x3-bn-relu","output"], "val_accuracy": 0.95})", 3);
  expect_line(R"({"adjacency": [0,1,0,0], "ops": ["input","output"], "val_accuracy": 1.5})", 3);
  expect_line(R"({"adjacency": [0,2,0,0], "ops": ["input","output"], "val_accuracy": 0.95})", 3);
  expect_line(R"({"ops": ["input","output"], "val_accuracy": 0.95})", 3);
  EXPECT_THROW(load_nasbench(dir / "absent.jsonl"), DataError);
}

TEST(FinetuneCorpus, CountsDepthAndDeterminism) {
  const auto a = build_finetune_corpus(default_library(), 36, 4);
  ASSERT_EQ(a.size(), 36u);
  const auto b = build_finetune_corpus(default_library(), 36, 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(architecture_hash(a[i].arch), architecture_hash(b[i].arch));
    EXPECT_EQ(a[i].source, CorpusSource::kFinetuneLibrary);
  }
  const auto many = build_finetune_corpus(default_library(), 500, 5);
  for (const auto& r : many) {
    EXPECT_NO_THROW(validate(r.arch));
    for (auto k : r.arch.kinds()) EXPECT_TRUE(in_library(k));
  }
  EXPECT_THROW(build_finetune_corpus(default_library(), 0, 1), ConfigError);
}

TEST(TeacherCorpus, AbsorbingChainGivesSingleKind) {
  auto t = MarkovTeacher::uniform();
  const int a = kind_index(BlockKind::kBasicblock);
  t.transition.row(a).setZero();
  t.transition(a, a) = 1.0;
  t.initial.setZero();
  t.initial(a) = 1.0;
  for (const auto& r : generate_teacher_corpus(t, 20, 3))
    for (auto k : r.arch.kinds()) EXPECT_EQ(k, BlockKind::kBasicblock);
  EXPECT_TRUE(generate_teacher_corpus(t, 0, 3).empty());
}

TEST(TeacherCorpus, BigramFrequenciesTrackTheTeacher) {
  const auto t = MarkovTeacher::peaked(all_library_kinds(), 0.7, 0);
  const auto records = generate_teacher_corpus(t, 1000, 12);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(kLibrarySize, kLibrarySize);
  for (const auto& r : records) {
    const auto k = r.arch.kinds();
    for (std::size_t i = 0; i + 1 < k.size(); ++i) counts(kind_index(k[i]), kind_index(k[i + 1])) += 1;
  }
  // Total variation between the empirical and teacher bigram distributions.
  const Eigen::MatrixXd empirical = counts / counts.sum();
  Eigen::VectorXd row_mass = counts.rowwise().sum() / counts.sum();
  const Eigen::MatrixXd model = row_mass.asDiagonal() * t.transition;
  EXPECT_LT(0.5 * (empirical - model).cwiseAbs().sum(), 0.05);
}

TEST(TeacherCorpus, InvalidMatrixIsConfigError) {
  auto t = MarkovTeacher::uniform();
  t.transition(0, 0) += 0.2;
  EXPECT_THROW(generate_teacher_corpus(t, 5, 1), ConfigError);
}

TEST(TrainingPairs, OnePairPerTokenWithPadding) {
  Rng rng(1);
  std::vector<CorpusRecord> records;
  for (int i = 0; i < 10; ++i)
    records.push_back({std::to_string(i), CorpusSource::kSynthetic, std::nullopt, sample_architecture(rng, {})});
  auto vocab = build_vocabulary(records);
  vocab.freeze();
  std::size_t total = 0;
  for (const auto& r : records) total += r.arch.layer_count();
  const auto pairs = make_training_pairs(records, vocab, 10, 1);
  EXPECT_EQ(pairs.size(), total);
  const auto& first = pairs.front();
  ASSERT_EQ(first.context.size(), 10u);
  for (auto t : first.context) EXPECT_EQ(t, Vocabulary::kPad);
  EXPECT_TRUE(vocab.is_layer(first.target));
  // The second pair sees the first token at the last context slot.
  EXPECT_EQ(pairs[1].context.back(), first.target);
}

TEST(TrainingPairs, UnknownLayerAndSingleToken) {
  const std::vector<TokenId> one{7};
  const auto ctx = context_window(one, 0, 4);
  EXPECT_EQ(ctx, (std::vector<TokenId>{0, 0, 0, 0}));
  EXPECT_EQ(context_window(one, 1, 3), (std::vector<TokenId>{0, 0, 7}));
  Rng rng(2);
  std::vector<CorpusRecord> a{{"a", CorpusSource::kSynthetic, std::nullopt, sample_architecture(rng, {})}};
  std::vector<CorpusRecord> b{{"b", CorpusSource::kSynthetic, std::nullopt, sample_architecture(rng, {})}};
  auto vocab = build_vocabulary(a);
  vocab.freeze();
  EXPECT_THROW(make_training_pairs(b, vocab), UnknownLayerError);
}

TEST(CorpusFile, RoundTripAndErrors) {
  TempDir dir;
  auto records = build_finetune_corpus(default_library(), 5, 9);
  records[2].fitness = 0.75;
  write_corpus(dir / "c.jsonl", records);
  const auto back = read_corpus(dir / "c.jsonl");
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].id, records[i].id);
    EXPECT_EQ(back[i].fitness, records[i].fitness);
    EXPECT_EQ(architecture_hash(back[i].arch), architecture_hash(records[i].arch));
  }
  write_text(dir / "bad.jsonl", testing::read_text(dir / "c.jsonl") + "{\"id\": 3}\n");
  try {
    read_corpus(dir / "bad.jsonl");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 6u);
  }
}

}  // namespace
}  // namespace archgen
