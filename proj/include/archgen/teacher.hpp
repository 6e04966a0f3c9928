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

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "archgen/architecture.hpp"
#include "archgen/rng.hpp"
#include "archgen/serialize.hpp"

namespace archgen {

/// Order-1 Markov chain over library block kinds together with the constants
/// of the surrogate score it induces.
struct MarkovTeacher {
  Eigen::MatrixXd transition;  // row = current kind, column = next kind
  Eigen::VectorXd initial;
  double scale = 1.0;          // logistic slope
  double shift = 3.0;          // logistic offset
  double depth_penalty = 0.1;  // weight of |depth - 15| / 15

  /// Throws ConfigError unless rows (and the initial distribution) are
  /// non-negative and sum to 1 within 1e-9.
  void check() const;

  int num_kinds() const { return static_cast<int>(transition.rows()); }
  double probability(BlockKind from, BlockKind to) const {
    return transition(kind_index(from), kind_index(to));
  }
  BlockKind preferred_successor(BlockKind from) const;

  std::vector<BlockKind> sample_kinds(std::size_t depth, Rng& rng) const;

  /// Each active kind prefers one successor (a seeded cycle over `kinds`)
  /// with mass `peak`; the remaining mass is spread uniformly over the
  /// active kinds. Rows of inactive kinds are uniform over the active ones.
  static MarkovTeacher peaked(std::span<const BlockKind> kinds, double peak, std::uint64_t seed);
  static MarkovTeacher uniform();
};

std::vector<BlockKind> all_library_kinds();

/// {"kinds": "all" | [names], "peak", "seed", "scale", "shift", "depth_penalty"}
/// or an explicit {"transition": [[..]], "initial": [..], ...}.
MarkovTeacher teacher_from_json(const Json& j);
Json teacher_to_json(const MarkovTeacher& t);

}  // namespace archgen
