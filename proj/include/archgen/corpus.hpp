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

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "archgen/architecture.hpp"
#include "archgen/rng.hpp"
#include "archgen/serialize.hpp"
#include "archgen/teacher.hpp"
#include "archgen/vocab.hpp"

namespace archgen {

enum class CorpusSource { kNasbench, kFinetuneLibrary, kSynthetic };

const char* to_string(CorpusSource s);
CorpusSource corpus_source_from_string(const std::string& s);

struct CorpusRecord {
  std::string id;
  CorpusSource source = CorpusSource::kSynthetic;
  std::optional<double> fitness;
  Architecture arch;
};

/// Distribution of randomly generated architectures.
struct ArchSampling {
  DepthBounds depth{};
  std::vector<int> width_choices{16, 32, 64};
  Shape3 input_shape{3, 32, 32};
  int num_classes = 10;
};

/// Depth uniform in the bounds; kinds uniform over the library, or drawn from
/// `kind_sampler` when given; widths uniform over the choices.
Architecture sample_architecture(Rng& rng, const ArchSampling& sampling,
                                 const MarkovTeacher* kind_sampler = nullptr);

struct NasbenchStats {
  std::size_t total = 0;
  std::size_t retained = 0;
};

/// Reads the line-delimited benchmark interchange format
/// {adjacency, ops, val_accuracy}; keeps records with accuracy >= min_accuracy.
std::vector<CorpusRecord> load_nasbench(const std::filesystem::path& path,
                                        double min_accuracy = 0.90,
                                        NasbenchStats* stats = nullptr);

/// Flattens one benchmark cell into a layer sequence (deterministic
/// topological order, ties by vertex index). Exposed for tests.
std::vector<LayerDescriptor> flatten_cell(const std::vector<std::vector<int>>& adjacency,
                                          const std::vector<std::string>& ops, Shape3 in,
                                          int channels);

std::vector<CorpusRecord> build_finetune_corpus(const BlockLibrary& lib, std::size_t count,
                                                std::uint64_t seed,
                                                const ArchSampling& sampling = {},
                                                const MarkovTeacher* kind_sampler = nullptr);

std::vector<CorpusRecord> generate_teacher_corpus(const MarkovTeacher& teacher,
                                                  std::size_t n_archs, std::uint64_t seed,
                                                  const ArchSampling& sampling = {});

struct TrainingPair {
  std::vector<TokenId> context;  // length k, left-padded with PAD
  TokenId target = 0;
};

/// Left-padded context window preceding position `t`.
std::vector<TokenId> context_window(std::span<const TokenId> tokens, std::size_t t, int k);

/// One pair per stride-th position of every record's token sequence.
std::vector<TrainingPair> make_training_pairs(const std::vector<CorpusRecord>& records,
                                              const Vocabulary& vocab, int k = 10,
                                              int stride = 1);

Vocabulary build_vocabulary(const std::vector<CorpusRecord>& records,
                            Canonicalization mode = Canonicalization::kFull);

Json record_to_json(const CorpusRecord& r);
CorpusRecord record_from_json(const Json& j);

void write_corpus(const std::filesystem::path& path, const std::vector<CorpusRecord>& records);
/// Throws ParseError with the 1-based line number of a malformed record.
std::vector<CorpusRecord> read_corpus(const std::filesystem::path& path);

}  // namespace archgen
