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

#include <span>
#include <string>
#include <vector>

#include "archgen/architecture.hpp"
#include "archgen/fcn.hpp"
#include "archgen/gpt.hpp"
#include "archgen/rng.hpp"
#include "archgen/vocab.hpp"

namespace archgen {

struct EliminationSchedule {
  double rate_ori = 0.4;
  int iter_max = 20;

  void check() const;
};

/// rate_ori * (1 - t / iter_max). Throws ConfigError outside [0, iter_max].
double elimination_rate(const EliminationSchedule& schedule, int t);

enum class EliminationUnit { kBlock, kLayer };

const char* to_string(EliminationUnit u);
EliminationUnit elimination_unit_from_string(const std::string& s);

struct ReconstructionTrace {
  std::vector<std::size_t> eliminated;  // ascending block indices
  std::vector<TokenId> predicted_tokens;
  std::vector<BlockKind> selected_kinds;
  std::vector<RepairAction> repairs;

  bool empty() const { return eliminated.empty(); }
};

Json trace_to_json(const ReconstructionTrace& t);
ReconstructionTrace trace_from_json(const Json& j);

/// Next-layer oracle used by reconstruction.
class LayerPredictor {
 public:
  virtual ~LayerPredictor() = default;
  virtual TokenId predict(std::span<const TokenId> context, Rng& rng) const = 0;
  virtual int context_len() const = 0;
};

/// Layer-to-block lifting used by reconstruction.
class BlockSelector {
 public:
  virtual ~BlockSelector() = default;
  virtual BlockKind select(std::span<const TokenId> context, TokenId predicted) const = 0;
};

template <typename Scalar>
class GptPredictor final : public LayerPredictor {
 public:
  explicit GptPredictor(const GptModel<Scalar>& model, double temperature = 0.0)
      : model_(model), temperature_(temperature) {}
  TokenId predict(std::span<const TokenId> context, Rng& rng) const override {
    return predict_next(model_, context, temperature_, rng);
  }
  int context_len() const override { return model_.config().context_len; }

 private:
  const GptModel<Scalar>& model_;
  double temperature_;
};

template <typename Scalar>
class FcnSelector final : public BlockSelector {
 public:
  explicit FcnSelector(const FcnModel<Scalar>& model) : model_(model) {}
  BlockKind select(std::span<const TokenId> context, TokenId predicted) const override {
    return fcn_select(model_, context, predicted);
  }

 private:
  const FcnModel<Scalar>& model_;
};

struct ReconstructOptions {
  EliminationUnit unit = EliminationUnit::kBlock;
  std::vector<int> width_choices{16, 32, 64};
};

struct Reconstruction {
  Architecture arch;
  ReconstructionTrace trace;
};

/// Eliminates each block with probability rate_t, then sweeps left to right:
/// an eliminated block is replaced by the kind the selector lifts from the
/// layer the predictor proposes after the already rebuilt prefix. Downstream
/// shapes are re-chained; depth is preserved. The predicted token's output
/// channels become the new width when they are a valid choice, otherwise the
/// eliminated block's width (or the first choice) is kept.
Reconstruction reconstruct(const Architecture& arch, const LayerPredictor& predictor,
                           const BlockSelector& selector, const Vocabulary& vocab, double rate_t,
                           Rng& rng, const ReconstructOptions& options = {});

}  // namespace archgen
