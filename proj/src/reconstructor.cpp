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

#include "archgen/reconstructor.hpp"

#include <algorithm>

#include "archgen/corpus.hpp"
#include "archgen/errors.hpp"

namespace archgen {

void EliminationSchedule::check() const {
  if (!(rate_ori >= 0.0 && rate_ori <= 1.0)) throw ConfigError("rate_ori must lie in [0, 1]");
  if (iter_max < 1) throw ConfigError("iter_max must be >= 1");
}

double elimination_rate(const EliminationSchedule& schedule, int t) {
  schedule.check();
  if (t < 0 || t > schedule.iter_max)
    throw ConfigError("iteration " + std::to_string(t) + " outside [0, " +
                      std::to_string(schedule.iter_max) + "]");
  return schedule.rate_ori - static_cast<double>(t) / schedule.iter_max * schedule.rate_ori;
}

const char* to_string(EliminationUnit u) {
  return u == EliminationUnit::kBlock ? "block" : "layer";
}

EliminationUnit elimination_unit_from_string(const std::string& s) {
  if (s == "block") return EliminationUnit::kBlock;
  if (s == "layer") return EliminationUnit::kLayer;
  throw ConfigError("unknown elimination unit '" + s + "'");
}

Json trace_to_json(const ReconstructionTrace& t) {
  Json kinds = Json::array();
  for (auto k : t.selected_kinds) kinds.push_back(to_string(k));
  return Json{{"eliminated", t.eliminated},
              {"predicted_tokens", t.predicted_tokens},
              {"selected_kinds", kinds},
              {"repairs", t.repairs}};
}

ReconstructionTrace trace_from_json(const Json& j) {
  try {
    ReconstructionTrace t;
    t.eliminated = j.at("eliminated").get<std::vector<std::size_t>>();
    t.predicted_tokens = j.at("predicted_tokens").get<std::vector<TokenId>>();
    for (const auto& k : j.at("selected_kinds")) t.selected_kinds.push_back(block_kind_from_string(k.get<std::string>()));
    t.repairs = j.at("repairs").get<std::vector<RepairAction>>();
    if (t.predicted_tokens.size() != t.eliminated.size() ||
        t.selected_kinds.size() != t.eliminated.size())
      throw DataError("trace lists differ in length");
    return t;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed trace: ") + e.what());
  }
}

namespace {

int refill_width(const Vocabulary& vocab, TokenId token, int eliminated_width,
                 const std::vector<int>& choices) {
  auto valid = [&](int w) { return std::find(choices.begin(), choices.end(), w) != choices.end(); };
  if (vocab.is_layer(token)) {
    const int c = vocab.prototype(token).out_size.c;
    if (valid(c)) return c;
  }
  if (valid(eliminated_width)) return eliminated_width;
  return choices.front();
}

}  // namespace

Reconstruction reconstruct(const Architecture& arch, const LayerPredictor& predictor,
                           const BlockSelector& selector, const Vocabulary& vocab, double rate_t,
                           Rng& rng, const ReconstructOptions& options) {
  if (!(rate_t >= 0.0 && rate_t <= 1.0)) throw ConfigError("elimination rate must lie in [0, 1]");
  if (options.width_choices.empty()) throw ConfigError("width_choices must not be empty");
  Reconstruction out{arch, {}};
  const std::size_t depth = arch.blocks.size();

  // Draws happen up front so the rng advances by a fixed amount per block.
  std::vector<bool> eliminate(depth, false);
  for (std::size_t i = 0; i < depth; ++i) {
    if (options.unit == EliminationUnit::kBlock) {
      eliminate[i] = bernoulli(rng, rate_t);
    } else {
      bool any = false;
      for (std::size_t l = 0; l < arch.blocks[i].layers.size(); ++l) any = bernoulli(rng, rate_t) || any;
      eliminate[i] = any;
    }
  }
  if (std::none_of(eliminate.begin(), eliminate.end(), [](bool b) { return b; })) return out;

  const auto& lib = default_library();
  auto& trace = out.trace;
  std::vector<Block> rebuilt;
  rebuilt.reserve(depth);
  Shape3 shape = arch.input_shape;
  for (std::size_t i = 0; i < depth; ++i) {
    const Block& original = arch.blocks[i];
    if (!eliminate[i]) {
      if (original.in_size() == shape) {
        rebuilt.push_back(original);
      } else {
        std::optional<Block> block;
        if (in_library(original.kind)) block = lib.instantiate(original.kind, original.width, shape);
        RepairKind how = RepairKind::kReshape;
        if (!block) {
          block = lib.instantiate(BlockKind::kConv, shape.c, shape);
          how = RepairKind::kFallback;
        } else if (block->width != original.width) {
          how = RepairKind::kWidth;
        }
        trace.repairs.push_back({i, how, original.kind, block->kind, original.width, block->width});
        rebuilt.push_back(std::move(*block));
      }
      shape = rebuilt.back().out_size();
      continue;
    }

    const auto prefix = encode_layers_lenient(rebuilt, vocab);
    const auto context = context_window(prefix, prefix.size(), predictor.context_len());
    const TokenId token = predictor.predict(context, rng);
    const BlockKind kind = selector.select(context, token);
    if (!in_library(kind)) throw LabelError("selector returned a kind outside the library");
    const int width = refill_width(vocab, token, original.width, options.width_choices);
    trace.eliminated.push_back(i);
    trace.predicted_tokens.push_back(token);
    trace.selected_kinds.push_back(kind);

    auto block = lib.instantiate(kind, width, shape);
    if (!block) {
      block = lib.instantiate(BlockKind::kConv, shape.c, shape);
      trace.repairs.push_back({i, RepairKind::kFallback, kind, BlockKind::kConv, width, shape.c});
    }
    rebuilt.push_back(std::move(*block));
    shape = rebuilt.back().out_size();
  }
  out.arch.blocks = std::move(rebuilt);
  finalize(out.arch);
  validate(out.arch, std::nullopt);
  return out;
}

}  // namespace archgen
