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

#include "archgen/teacher.hpp"

#include <algorithm>
#include <cmath>

#include "archgen/errors.hpp"

namespace archgen {

namespace {

void check_distribution(const Eigen::Ref<const Eigen::VectorXd>& p, const std::string& what) {
  if ((p.array() < 0.0).any() || !p.allFinite()) {
    throw ConfigError(what + " has negative or non-finite entries");
  }
  if (std::abs(p.sum() - 1.0) > 1e-9) {
    throw ConfigError(what + " does not sum to 1 (sum = " + std::to_string(p.sum()) + ")");
  }
}

}  // namespace

std::vector<BlockKind> all_library_kinds() {
  std::vector<BlockKind> out;
  for (int i = 0; i < kLibrarySize; ++i) out.push_back(kind_from_index(i));
  return out;
}

void MarkovTeacher::check() const {
  if (transition.rows() != kLibrarySize || transition.cols() != kLibrarySize) {
    throw ConfigError("teacher transition matrix must be 15x15");
  }
  if (initial.size() != kLibrarySize) throw ConfigError("teacher initial distribution must have 15 entries");
  for (int r = 0; r < transition.rows(); ++r) {
    check_distribution(transition.row(r).transpose(), "teacher row " + std::to_string(r));
  }
  check_distribution(initial, "teacher initial distribution");
}

BlockKind MarkovTeacher::preferred_successor(BlockKind from) const {
  Eigen::Index best = 0;
  transition.row(kind_index(from)).maxCoeff(&best);
  return kind_from_index(static_cast<int>(best));
}

std::vector<BlockKind> MarkovTeacher::sample_kinds(std::size_t depth, Rng& rng) const {
  std::vector<BlockKind> out;
  out.reserve(depth);
  std::vector<double> row(initial.data(), initial.data() + initial.size());
  for (std::size_t i = 0; i < depth; ++i) {
    const auto k = kind_from_index(static_cast<int>(sample_categorical(row, rng)));
    out.push_back(k);
    const auto r = transition.row(kind_index(k));
    for (int c = 0; c < kLibrarySize; ++c) row[static_cast<std::size_t>(c)] = r(c);
  }
  return out;
}

MarkovTeacher MarkovTeacher::peaked(std::span<const BlockKind> kinds, double peak,
                                    std::uint64_t seed) {
  if (kinds.empty()) throw ConfigError("teacher needs at least one kind");
  if (peak < 0.0 || peak > 1.0) throw ConfigError("teacher peak must lie in [0, 1]");
  std::vector<BlockKind> cycle(kinds.begin(), kinds.end());
  Rng rng(seed);
  std::shuffle(cycle.begin(), cycle.end(), rng);

  const double n = static_cast<double>(cycle.size());
  Eigen::VectorXd base = Eigen::VectorXd::Zero(kLibrarySize);
  for (auto k : cycle) base(kind_index(k)) = 1.0 / n;

  MarkovTeacher t;
  t.transition.resize(kLibrarySize, kLibrarySize);
  for (int r = 0; r < kLibrarySize; ++r) t.transition.row(r) = base.transpose();
  for (std::size_t i = 0; i < cycle.size(); ++i) {
    const int from = kind_index(cycle[i]);
    const int to = kind_index(cycle[(i + 1) % cycle.size()]);
    t.transition.row(from) = (1.0 - peak) * base.transpose();
    t.transition(from, to) += peak;
  }
  t.initial = base;
  return t;
}

MarkovTeacher MarkovTeacher::uniform() {
  MarkovTeacher t;
  t.transition = Eigen::MatrixXd::Constant(kLibrarySize, kLibrarySize, 1.0 / kLibrarySize);
  t.initial = Eigen::VectorXd::Constant(kLibrarySize, 1.0 / kLibrarySize);
  return t;
}

MarkovTeacher teacher_from_json(const Json& j) {
  MarkovTeacher t;
  if (j.contains("transition")) {
    const auto rows = j["transition"].get<std::vector<std::vector<double>>>();
    t.transition.resize(static_cast<Eigen::Index>(rows.size()),
                        rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows[0].size()) throw ConfigError("ragged teacher matrix");
      for (std::size_t c = 0; c < rows[r].size(); ++c) {
        t.transition(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
      }
    }
    const auto init = j.at("initial").get<std::vector<double>>();
    t.initial = Eigen::Map<const Eigen::VectorXd>(init.data(), static_cast<Eigen::Index>(init.size()));
  } else {
    std::vector<BlockKind> kinds;
    const Json& spec = j.contains("kinds") ? j["kinds"] : Json("all");
    if (spec.is_string() && spec.get<std::string>() == "all") {
      kinds = all_library_kinds();
    } else {
      for (const auto& name : spec) {
        const auto k = block_kind_from_string(name.get<std::string>());
        if (!in_library(k)) throw ConfigError("teacher kinds must come from the block library");
        kinds.push_back(k);
      }
    }
    t = MarkovTeacher::peaked(kinds, j.value("peak", 0.7), j.value("seed", std::uint64_t{0}));
  }
  t.scale = j.value("scale", t.scale);
  t.shift = j.value("shift", t.shift);
  t.depth_penalty = j.value("depth_penalty", t.depth_penalty);
  t.check();
  return t;
}

Json teacher_to_json(const MarkovTeacher& t) {
  Json rows = Json::array();
  for (int r = 0; r < t.transition.rows(); ++r) {
    Json row = Json::array();
    for (int c = 0; c < t.transition.cols(); ++c) row.push_back(t.transition(r, c));
    rows.push_back(std::move(row));
  }
  Json init = Json::array();
  for (int i = 0; i < t.initial.size(); ++i) init.push_back(t.initial(i));
  return Json{{"transition", rows}, {"initial", init}, {"scale", t.scale},
              {"shift", t.shift},   {"depth_penalty", t.depth_penalty}};
}

}  // namespace archgen
