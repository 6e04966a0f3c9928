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

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "archgen/architecture.hpp"
#include "archgen/corpus.hpp"
#include "archgen/evaluation.hpp"
#include "archgen/reconstructor.hpp"
#include "archgen/rng.hpp"
#include "archgen/serialize.hpp"

namespace archgen {

struct GaConfig {
  int population = 30;
  int generations = 20;
  double crossover_rate = 0.9;
  double mutation_rate = 0.3;
  DepthBounds depth{};
  int elitism_count = 1;
  int tournament_size = 2;
  double rate_ori = 0.4;  // elimination rate at generation 0
  EliminationUnit elimination_unit = EliminationUnit::kBlock;
  double temperature = 0.0;  // GPT sampling temperature during reconstruction
  std::vector<int> width_choices{16, 32, 64};
  Shape3 input_shape{3, 32, 32};
  int num_classes = 10;
  int threads = 1;
  std::uint64_t seed = 0;

  void check() const;
  ArchSampling sampling() const;
  /// iter_max follows the generation count.
  EliminationSchedule schedule() const;
};

Json ga_config_to_json(const GaConfig& c);
GaConfig ga_config_from_json(const Json& j, GaConfig base = {});

struct Individual {
  std::uint64_t id = 0;
  Architecture arch;
  std::optional<FitnessRecord> fitness;
  std::optional<ReconstructionTrace> trace;
  std::vector<std::uint64_t> parents;

  double score() const { return fitness ? fitness->fitness : 0.0; }
};

Json individual_to_json(const Individual& ind);
Individual individual_from_json(const Json& j);

std::vector<Individual> init_population(const GaConfig& cfg, Rng& rng);

/// Single-point crossover with independent cut points in [0, depth]. Depth
/// is pulled back into bounds by trimming or repeating tail blocks, then
/// shapes are re-chained.
std::pair<Architecture, Architecture> crossover(const Architecture& a, const Architecture& b,
                                                const GaConfig& cfg, Rng& rng);

enum class MutationKind { kInsert, kDelete, kReplace };
const char* to_string(MutationKind m);

/// One insert, delete or kind replacement. Actions that would break the
/// depth bounds or alter more than one kind after re-chaining are redrawn.
Architecture mutate(const Architecture& arch, const GaConfig& cfg, Rng& rng,
                    MutationKind* applied = nullptr);

/// Predictor, selector and vocabulary driving reconstruction. Without it
/// (or with rate_ori = 0) the search is a plain GA.
struct Guidance {
  const LayerPredictor* predictor = nullptr;
  const BlockSelector* selector = nullptr;
  const Vocabulary* vocab = nullptr;

  bool active() const { return predictor && selector && vocab; }
};

struct GenerationLog {
  int generation = 0;
  double rate = 0.0;
  double best = 0.0;       // best in this population
  double best_so_far = 0.0;
  double mean = 0.0;
  std::size_t evaluations = 0;  // cumulative evaluator calls
  std::size_t cache_hits = 0;   // cumulative
  std::size_t errors = 0;       // cumulative
  std::size_t eliminated = 0;   // blocks replaced this generation
};

Json generation_log_to_json(const GenerationLog& g);
GenerationLog generation_log_from_json(const Json& j);

struct SearchResult {
  std::vector<Individual> best_per_generation;
  Individual best;
  std::vector<std::vector<double>> history;  // fitness of every member per generation
  std::vector<GenerationLog> logs;
  std::uint64_t seed = 0;
  GaConfig config;
  std::size_t evaluations = 0;
  std::size_t cache_hits = 0;
};

Json search_result_to_json(const SearchResult& r);
SearchResult search_result_from_json(const Json& j);

struct SearchHooks {
  std::function<void(const GenerationLog&)> on_generation;
};

/// Generation t (0..G): reconstruct non-elites at rate(t), evaluate the
/// unevaluated (cached on architecture_hash), record, then, for t < G,
/// carry the elites and breed the rest by tournament, crossover and
/// mutation. Evaluator exceptions score 0 with the error flag set.
SearchResult run_search(const GaConfig& cfg, const Guidance& guidance, Evaluator& evaluator,
                        const SearchHooks& hooks = {});

struct RandomSearchResult {
  Individual best;
  std::size_t evaluations = 0;
};

/// `budget` architectures drawn like the initial population.
RandomSearchResult random_search(const GaConfig& cfg, std::size_t budget, Evaluator& evaluator);

}  // namespace archgen
