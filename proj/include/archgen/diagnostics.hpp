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
#include <vector>

#include <Eigen/Core>

#include "archgen/corpus.hpp"
#include "archgen/gpt.hpp"
#include "archgen/teacher.hpp"

namespace archgen {

struct NextTokenStats {
  double loss = 0.0;
  double accuracy = 0.0;  // argmax over the whole vocabulary
  std::size_t n = 0;
};

/// Dropout-free evaluation of the last-position prediction.
template <typename Scalar>
NextTokenStats next_token_stats(const GptModel<Scalar>& model, std::span<const TrainingPair> pairs);

/// Share of the most frequent target token.
double majority_baseline(std::span<const TrainingPair> pairs);

/// For every block start in the corpus, the context that precedes it and the
/// kind of the previous block. Tokens are mapped to kinds by how often each
/// token opens a block of each kind.
struct BlockStartProbe {
  std::vector<std::vector<TokenId>> contexts;
  std::vector<BlockKind> previous;
  Eigen::MatrixXd token_kind;  // V x kLibrarySize, rows sum to 1 or are zero

  static BlockStartProbe build(const std::vector<CorpusRecord>& records, const Vocabulary& vocab,
                               int k);
};

/// Mean KL(teacher row of the previous kind || model's next-kind
/// distribution) over the probe's block starts.
template <typename Scalar>
double teacher_kl(const GptModel<Scalar>& model, const BlockStartProbe& probe,
                  const MarkovTeacher& teacher);

}  // namespace archgen
