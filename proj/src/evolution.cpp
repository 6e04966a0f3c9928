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

#include "archgen/evolution.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "archgen/errors.hpp"
#include "archgen/hash.hpp"
#include "archgen/parallel.hpp"

namespace archgen {

namespace {

// Sub-stream tags for derive_seed.
constexpr std::uint64_t kInitStream = 0x494e4954;
constexpr std::uint64_t kVaryStream = 0x56415259;
constexpr std::uint64_t kReconStream = 0x5245434f;
constexpr std::uint64_t kEvalStream = 0x4556414c;
constexpr std::uint64_t kRandomStream = 0x52414e44;

constexpr int kMaxRedraws = 64;

}  // namespace

void GaConfig::check() const {
  if (population < 1) throw ConfigError("population must be >= 1");
  if (generations < 0) throw ConfigError("generations must be >= 0");
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(crossover_rate) || !unit(mutation_rate) || !unit(rate_ori))
    throw ConfigError("rates must lie in [0, 1]");
  if (depth.min < 1 || depth.max < depth.min) throw ConfigError("invalid depth bounds");
  if (elitism_count < 0 || elitism_count >= population)
    throw ConfigError("elitism_count must lie in [0, population)");
  if (tournament_size < 1) throw ConfigError("tournament_size must be >= 1");
  if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
  if (width_choices.empty()) throw ConfigError("width_choices must not be empty");
  for (int w : width_choices)
    if (w <= 0) throw ConfigError("width choices must be positive");
  if (input_shape.c <= 0 || input_shape.h <= 0 || input_shape.w <= 0)
    throw ConfigError("input_shape must be positive");
  if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

ArchSampling GaConfig::sampling() const {
  return ArchSampling{depth, width_choices, input_shape, num_classes};
}

EliminationSchedule GaConfig::schedule() const {
  return EliminationSchedule{rate_ori, std::max(generations, 1)};
}

Json ga_config_to_json(const GaConfig& c) {
  return Json{{"population", c.population},
              {"generations", c.generations},
              {"crossover_rate", c.crossover_rate},
              {"mutation_rate", c.mutation_rate},
              {"depth_min", c.depth.min},
              {"depth_max", c.depth.max},
              {"elitism_count", c.elitism_count},
              {"tournament_size", c.tournament_size},
              {"rate_ori", c.rate_ori},
              {"elimination_unit", to_string(c.elimination_unit)},
              {"temperature", c.temperature},
              {"width_choices", c.width_choices},
              {"input_shape", c.input_shape},
              {"num_classes", c.num_classes},
              {"threads", c.threads},
              {"seed", c.seed}};
}

GaConfig ga_config_from_json(const Json& j, GaConfig c) {
  if (!j.is_object()) throw ConfigError("ga config must be an object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "population") c.population = v.get<int>();
      else if (key == "generations") c.generations = v.get<int>();
      else if (key == "crossover_rate") c.crossover_rate = v.get<double>();
      else if (key == "mutation_rate") c.mutation_rate = v.get<double>();
      else if (key == "depth_min") c.depth.min = v.get<int>();
      else if (key == "depth_max") c.depth.max = v.get<int>();
      else if (key == "elitism_count") c.elitism_count = v.get<int>();
      else if (key == "tournament_size") c.tournament_size = v.get<int>();
      else if (key == "rate_ori") c.rate_ori = v.get<double>();
      else if (key == "elimination_unit") c.elimination_unit = elimination_unit_from_string(v.get<std::string>());
      else if (key == "temperature") c.temperature = v.get<double>();
      else if (key == "width_choices") c.width_choices = v.get<std::vector<int>>();
      else if (key == "input_shape") c.input_shape = v.get<Shape3>();
      else if (key == "num_classes") c.num_classes = v.get<int>();
      else if (key == "threads") c.threads = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else throw ConfigError("unknown ga key '" + key + "'");
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad ga config: ") + e.what());
  }
  c.check();
  return c;
}

Json individual_to_json(const Individual& ind) {
  Json j{{"id", ind.id}, {"arch", architecture_to_json(ind.arch)}, {"parents", ind.parents}};
  j["fitness"] = ind.fitness ? fitness_record_to_json(*ind.fitness, false) : Json(nullptr);
  j["trace"] = ind.trace ? trace_to_json(*ind.trace) : Json(nullptr);
  return j;
}

Individual individual_from_json(const Json& j) {
  try {
    Individual ind;
    ind.id = j.at("id").get<std::uint64_t>();
    ind.arch = architecture_from_json(j.at("arch"));
    ind.parents = j.at("parents").get<std::vector<std::uint64_t>>();
    if (!j.at("fitness").is_null()) ind.fitness = fitness_record_from_json(j["fitness"]);
    if (!j.at("trace").is_null()) ind.trace = trace_from_json(j["trace"]);
    return ind;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed individual: ") + e.what());
  }
}

std::vector<Individual> init_population(const GaConfig& cfg, Rng& rng) {
  std::vector<Individual> pop;
  pop.reserve(static_cast<std::size_t>(cfg.population));
  const auto sampling = cfg.sampling();
  for (int i = 0; i < cfg.population; ++i) {
    Individual ind;
    ind.id = static_cast<std::uint64_t>(i);
    ind.arch = sample_architecture(rng, sampling);
    pop.push_back(std::move(ind));
  }
  return pop;
}

namespace {

Architecture rebuild(std::vector<Block> blocks, const GaConfig& cfg) {
  return rechain(std::move(blocks), cfg.input_shape, cfg.num_classes);
}

// An empty child (head cut at 0, tail cut at the end) starts from `seed`.
std::vector<Block> bound_depth(std::vector<Block> blocks, const DepthBounds& depth, const Block& seed) {
  const auto lo = static_cast<std::size_t>(depth.min);
  const auto hi = static_cast<std::size_t>(depth.max);
  if (blocks.size() > hi) blocks.resize(hi);
  if (blocks.empty()) blocks.push_back(seed);
  while (blocks.size() < lo) {
    Block tail = blocks.back();
    blocks.push_back(std::move(tail));
  }
  return blocks;
}

}  // namespace

std::pair<Architecture, Architecture> crossover(const Architecture& a, const Architecture& b,
                                                const GaConfig& cfg, Rng& rng) {
  const std::size_t ca = uniform_index(rng, a.blocks.size() + 1);
  const std::size_t cb = uniform_index(rng, b.blocks.size() + 1);
  std::vector<Block> c1(a.blocks.begin(), a.blocks.begin() + static_cast<std::ptrdiff_t>(ca));
  c1.insert(c1.end(), b.blocks.begin() + static_cast<std::ptrdiff_t>(cb), b.blocks.end());
  std::vector<Block> c2(b.blocks.begin(), b.blocks.begin() + static_cast<std::ptrdiff_t>(cb));
  c2.insert(c2.end(), a.blocks.begin() + static_cast<std::ptrdiff_t>(ca), a.blocks.end());
  return {rebuild(bound_depth(std::move(c1), cfg.depth, a.blocks.front()), cfg),
          rebuild(bound_depth(std::move(c2), cfg.depth, b.blocks.front()), cfg)};
}

const char* to_string(MutationKind m) {
  switch (m) {
    case MutationKind::kInsert: return "insert";
    case MutationKind::kDelete: return "delete";
    case MutationKind::kReplace: return "replace";
  }
  return "?";
}

Architecture mutate(const Architecture& arch, const GaConfig& cfg, Rng& rng, MutationKind* applied) {
  const std::size_t d = arch.blocks.size();
  const auto parent_kinds = arch.kinds();
  const auto& lib = default_library();
  Architecture last;
  MutationKind last_kind = MutationKind::kReplace;
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    const auto action = static_cast<MutationKind>(uniform_index(rng, 3));
    if (action == MutationKind::kInsert && static_cast<int>(d) >= cfg.depth.max) continue;
    if (action == MutationKind::kDelete && static_cast<int>(d) <= cfg.depth.min) continue;

    std::vector<Block> blocks = arch.blocks;
    auto expected = parent_kinds;
    const int width = cfg.width_choices[uniform_index(rng, cfg.width_choices.size())];
    if (action == MutationKind::kDelete) {
      const std::size_t pos = uniform_index(rng, d);
      blocks.erase(blocks.begin() + static_cast<std::ptrdiff_t>(pos));
      expected.erase(expected.begin() + static_cast<std::ptrdiff_t>(pos));
    } else {
      const std::size_t pos = uniform_index(rng, action == MutationKind::kInsert ? d + 1 : d);
      auto kind = kind_from_index(static_cast<int>(uniform_index(rng, kLibrarySize)));
      if (action == MutationKind::kReplace) {
        // Uniform over the other library kinds.
        auto idx = static_cast<int>(uniform_index(rng, kLibrarySize - 1));
        if (idx >= kind_index(parent_kinds[pos])) ++idx;
        kind = kind_from_index(idx);
      }
      const Shape3 in = pos == 0 ? cfg.input_shape : blocks[pos - 1].out_size();
      auto fresh = lib.instantiate(kind, width, in);
      if (!fresh) continue;
      if (action == MutationKind::kInsert) {
        blocks.insert(blocks.begin() + static_cast<std::ptrdiff_t>(pos), std::move(*fresh));
        expected.insert(expected.begin() + static_cast<std::ptrdiff_t>(pos), kind);
      } else {
        blocks[pos] = std::move(*fresh);
        expected[pos] = kind;
      }
    }
    last = rebuild(std::move(blocks), cfg);
    last_kind = action;
    if (last.kinds() == expected) break;
  }
  if (last.blocks.empty()) last = arch;  // every draw was infeasible
  if (applied) *applied = last_kind;
  return last;
}

Json generation_log_to_json(const GenerationLog& g) {
  return Json{{"generation", g.generation}, {"rate", g.rate},
              {"best", g.best},             {"best_so_far", g.best_so_far},
              {"mean", g.mean},             {"evaluations", g.evaluations},
              {"cache_hits", g.cache_hits}, {"errors", g.errors},
              {"eliminated", g.eliminated}};
}

GenerationLog generation_log_from_json(const Json& j) {
  try {
    GenerationLog g;
    g.generation = j.at("generation").get<int>();
    g.rate = j.at("rate").get<double>();
    g.best = j.at("best").get<double>();
    g.best_so_far = j.at("best_so_far").get<double>();
    g.mean = j.at("mean").get<double>();
    g.evaluations = j.at("evaluations").get<std::size_t>();
    g.cache_hits = j.at("cache_hits").get<std::size_t>();
    g.errors = j.at("errors").get<std::size_t>();
    g.eliminated = j.at("eliminated").get<std::size_t>();
    return g;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed generation log: ") + e.what());
  }
}

Json search_result_to_json(const SearchResult& r) {
  Json per_gen = Json::array();
  for (const auto& ind : r.best_per_generation) per_gen.push_back(individual_to_json(ind));
  Json logs = Json::array();
  for (const auto& g : r.logs) logs.push_back(generation_log_to_json(g));
  return Json{{"seed", r.seed},
              {"config", ga_config_to_json(r.config)},
              {"evaluations", r.evaluations},
              {"cache_hits", r.cache_hits},
              {"best", individual_to_json(r.best)},
              {"best_per_generation", per_gen},
              {"history", r.history},
              {"logs", logs}};
}

SearchResult search_result_from_json(const Json& j) {
  try {
    SearchResult r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config = ga_config_from_json(j.at("config"));
    r.evaluations = j.at("evaluations").get<std::size_t>();
    r.cache_hits = j.at("cache_hits").get<std::size_t>();
    r.best = individual_from_json(j.at("best"));
    for (const auto& ind : j.at("best_per_generation")) r.best_per_generation.push_back(individual_from_json(ind));
    r.history = j.at("history").get<std::vector<std::vector<double>>>();
    for (const auto& g : j.at("logs")) r.logs.push_back(generation_log_from_json(g));
    return r;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed search result: ") + e.what());
  }
}

namespace {

FitnessRecord error_record(const Architecture& arch, std::uint64_t key, const std::string& what) {
  FitnessRecord r;
  r.key = key;
  r.param_count = param_count(arch);
  r.error = true;
  r.error_message = what;
  r.mode = "error";
  return r;
}

FitnessRecord guarded(Evaluator& ev, const EvalRequest& req, std::uint64_t key) {
  try {
    auto rec = ev.evaluate(req);
    rec.key = key;
    return rec;
  } catch (const std::exception& e) {
    return error_record(*req.arch, key, e.what());
  }
}

/// Scores the population members without fitness. Returns evaluator calls.
class FitnessCache {
 public:
  FitnessCache(Evaluator& ev, const GaConfig& cfg) : ev_(ev), cfg_(cfg) {}

  void score(std::vector<Individual>& pop) {
    std::vector<std::size_t> pending;
    std::vector<std::uint64_t> keys(pop.size());
    std::unordered_map<std::uint64_t, std::size_t> first_miss;
    std::vector<std::size_t> misses;  // indices into pop, one per distinct key
    for (std::size_t i = 0; i < pop.size(); ++i) {
      if (pop[i].fitness) continue;
      keys[i] = architecture_hash(pop[i].arch);
      pending.push_back(i);
      if (cache_.count(keys[i]) || first_miss.count(keys[i])) continue;
      first_miss.emplace(keys[i], i);
      misses.push_back(i);
    }

    std::vector<EvalRequest> requests;
    for (auto i : misses) {
      const auto* trace = pop[i].trace ? &*pop[i].trace : nullptr;
      requests.push_back({&pop[i].arch, trace, derive_seed(cfg_.seed, kEvalStream, keys[i])});
    }
    std::vector<FitnessRecord> records(misses.size());
    if (ev_.batched()) {
      records = ev_.evaluate_batch(requests);
      for (std::size_t m = 0; m < misses.size(); ++m) records[m].key = keys[misses[m]];
    } else {
      const int threads = ev_.concurrent() ? cfg_.threads : 1;
      parallel_for(misses.size(), threads, [&](std::size_t m) {
        records[m] = guarded(ev_, requests[m], keys[misses[m]]);
      });
    }
    for (std::size_t m = 0; m < misses.size(); ++m) {
      if (records[m].error) ++errors_;
      cache_.emplace(keys[misses[m]], records[m]);
    }
    evaluations_ += misses.size();
    cache_hits_ += pending.size() - misses.size();
    for (auto i : pending) pop[i].fitness = cache_.at(keys[i]);
  }

  std::size_t evaluations() const { return evaluations_; }
  std::size_t cache_hits() const { return cache_hits_; }
  std::size_t errors() const { return errors_; }

 private:
  Evaluator& ev_;
  const GaConfig& cfg_;
  std::unordered_map<std::uint64_t, FitnessRecord> cache_;
  std::size_t evaluations_ = 0;
  std::size_t cache_hits_ = 0;
  std::size_t errors_ = 0;
};

/// Indices sorted by descending fitness, lower index first on ties.
std::vector<std::size_t> ranking(const std::vector<Individual>& pop) {
  std::vector<std::size_t> order(pop.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pop[a].score() > pop[b].score(); });
  return order;
}

std::size_t tournament(const std::vector<Individual>& pop, int size, Rng& rng) {
  std::size_t best = uniform_index(rng, pop.size());
  for (int i = 1; i < size; ++i) {
    const std::size_t c = uniform_index(rng, pop.size());
    if (pop[c].score() > pop[best].score()) best = c;
  }
  return best;
}

}  // namespace

SearchResult run_search(const GaConfig& cfg, const Guidance& guidance, Evaluator& evaluator,
                        const SearchHooks& hooks) {
  cfg.check();
  const auto schedule = cfg.schedule();
  ReconstructOptions ropt;
  ropt.unit = cfg.elimination_unit;
  ropt.width_choices = cfg.width_choices;

  SearchResult result;
  result.seed = cfg.seed;
  result.config = cfg;

  Rng init_rng(derive_seed(cfg.seed, kInitStream));
  auto pop = init_population(cfg, init_rng);
  std::uint64_t next_id = pop.size();
  std::size_t elites = 0;  // leading members carried unchanged
  FitnessCache cache(evaluator, cfg);
  double best_so_far = -1.0;

  for (int t = 0; t <= cfg.generations; ++t) {
    const double rate = cfg.generations == 0 ? 0.0 : elimination_rate(schedule, t);
    std::vector<std::size_t> eliminated(pop.size(), 0);
    if (guidance.active() && rate > 0.0) {
      parallel_for(pop.size() - elites, cfg.threads, [&](std::size_t j) {
        const std::size_t i = elites + j;
        Rng rng(derive_seed(cfg.seed, (kReconStream << 32) | static_cast<std::uint64_t>(t), i));
        auto rec = reconstruct(pop[i].arch, *guidance.predictor, *guidance.selector, *guidance.vocab,
                               rate, rng, ropt);
        if (!rec.trace.empty()) {
          pop[i].arch = std::move(rec.arch);
          pop[i].fitness.reset();
          eliminated[i] = rec.trace.eliminated.size();
        }
        pop[i].trace = std::move(rec.trace);
      });
    }
    cache.score(pop);

    GenerationLog log;
    log.generation = t;
    log.rate = rate;
    std::vector<double> fit;
    for (const auto& ind : pop) fit.push_back(ind.score());
    const auto order = ranking(pop);
    log.best = pop[order[0]].score();
    log.mean = std::accumulate(fit.begin(), fit.end(), 0.0) / static_cast<double>(fit.size());
    if (log.best > best_so_far) {
      best_so_far = log.best;
      result.best = pop[order[0]];
    }
    log.best_so_far = best_so_far;
    log.evaluations = cache.evaluations();
    log.cache_hits = cache.cache_hits();
    log.errors = cache.errors();
    log.eliminated = std::accumulate(eliminated.begin(), eliminated.end(), std::size_t{0});
    result.history.push_back(std::move(fit));
    result.best_per_generation.push_back(pop[order[0]]);
    result.logs.push_back(log);
    if (hooks.on_generation) hooks.on_generation(log);
    if (t == cfg.generations) break;

    Rng rng(derive_seed(cfg.seed, kVaryStream, static_cast<std::uint64_t>(t)));
    std::vector<Individual> next;
    next.reserve(pop.size());
    elites = static_cast<std::size_t>(cfg.elitism_count);
    for (std::size_t e = 0; e < elites; ++e) next.push_back(pop[order[e]]);
    while (next.size() < pop.size()) {
      const auto& p1 = pop[tournament(pop, cfg.tournament_size, rng)];
      const auto& p2 = pop[tournament(pop, cfg.tournament_size, rng)];
      Architecture c1 = p1.arch, c2 = p2.arch;
      if (bernoulli(rng, cfg.crossover_rate)) std::tie(c1, c2) = crossover(p1.arch, p2.arch, cfg, rng);
      for (Architecture* c : {&c1, &c2}) {
        if (bernoulli(rng, cfg.mutation_rate)) *c = mutate(*c, cfg, rng);
        if (next.size() == pop.size()) break;
        Individual child;
        child.id = next_id++;
        child.arch = std::move(*c);
        child.parents = {p1.id, p2.id};
        next.push_back(std::move(child));
      }
    }
    pop = std::move(next);
  }
  result.evaluations = cache.evaluations();
  result.cache_hits = cache.cache_hits();
  return result;
}

RandomSearchResult random_search(const GaConfig& cfg, std::size_t budget, Evaluator& evaluator) {
  cfg.check();
  Rng rng(derive_seed(cfg.seed, kRandomStream));
  const auto sampling = cfg.sampling();
  std::vector<Individual> pop(budget);
  for (std::size_t i = 0; i < budget; ++i) {
    pop[i].id = i;
    pop[i].arch = sample_architecture(rng, sampling);
  }
  FitnessCache cache(evaluator, cfg);
  cache.score(pop);
  RandomSearchResult r;
  r.evaluations = cache.evaluations();
  if (!pop.empty()) r.best = pop[ranking(pop)[0]];
  return r;
}

}  // namespace archgen
