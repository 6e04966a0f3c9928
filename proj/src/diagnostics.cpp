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

#include "archgen/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "archgen/errors.hpp"

namespace archgen {

template <typename Scalar>
NextTokenStats next_token_stats(const GptModel<Scalar>& model, std::span<const TrainingPair> pairs) {
  NextTokenStats s;
  std::size_t hits = 0;
  for (const auto& p : pairs) {
    const Eigen::VectorXd probs = next_token_distribution(model, p.context);
    Eigen::Index best = 0;
    probs.maxCoeff(&best);
    hits += best == p.target;
    s.loss -= std::log(std::max(probs(p.target), 1e-300));
  }
  s.n = pairs.size();
  if (s.n) {
    s.loss /= static_cast<double>(s.n);
    s.accuracy = static_cast<double>(hits) / static_cast<double>(s.n);
  }
  return s;
}

double majority_baseline(std::span<const TrainingPair> pairs) {
  if (pairs.empty()) return 0.0;
  std::unordered_map<TokenId, std::size_t> counts;
  std::size_t best = 0;
  for (const auto& p : pairs) best = std::max(best, ++counts[p.target]);
  return static_cast<double>(best) / static_cast<double>(pairs.size());
}

BlockStartProbe BlockStartProbe::build(const std::vector<CorpusRecord>& records,
                                       const Vocabulary& vocab, int k) {
  BlockStartProbe probe;
  probe.token_kind = Eigen::MatrixXd::Zero(vocab.size(), kLibrarySize);
  for (const auto& r : records) {
    const auto seq = encode_architecture(r.arch, vocab);
    for (std::size_t b = 0; b < seq.boundaries.size(); ++b) {
      const std::size_t start = seq.boundaries[b];
      const auto kind = r.arch.blocks[b].kind;
      if (!in_library(kind)) throw LabelError("probe needs library block kinds");
      probe.token_kind(seq.tokens[start], kind_index(kind)) += 1.0;
      if (b == 0) continue;
      probe.contexts.push_back(context_window(seq.tokens, start, k));
      probe.previous.push_back(r.arch.blocks[b - 1].kind);
    }
  }
  for (Eigen::Index t = 0; t < probe.token_kind.rows(); ++t) {
    const double s = probe.token_kind.row(t).sum();
    if (s > 0) probe.token_kind.row(t) /= s;
  }
  return probe;
}

template <typename Scalar>
double teacher_kl(const GptModel<Scalar>& model, const BlockStartProbe& probe,
                  const MarkovTeacher& teacher) {
  if (probe.contexts.empty()) throw DataError("probe has no block transitions");
  constexpr double kFloor = 1e-12;
  double total = 0.0;
  for (std::size_t i = 0; i < probe.contexts.size(); ++i) {
    const Eigen::VectorXd probs = next_token_distribution(model, probe.contexts[i]);
    Eigen::VectorXd q = probe.token_kind.transpose() * probs;
    q /= std::max(q.sum(), kFloor);
    const auto p = teacher.transition.row(kind_index(probe.previous[i]));
    double kl = 0.0;
    for (int c = 0; c < kLibrarySize; ++c)
      if (p(c) > 0) kl += p(c) * std::log(p(c) / std::max(q(c), kFloor));
    total += kl;
  }
  return total / static_cast<double>(probe.contexts.size());
}

template NextTokenStats next_token_stats(const GptModel<float>&, std::span<const TrainingPair>);
template NextTokenStats next_token_stats(const GptModel<double>&, std::span<const TrainingPair>);
template double teacher_kl(const GptModel<float>&, const BlockStartProbe&, const MarkovTeacher&);
template double teacher_kl(const GptModel<double>&, const BlockStartProbe&, const MarkovTeacher&);

}  // namespace archgen
