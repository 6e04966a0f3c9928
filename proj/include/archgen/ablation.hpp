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
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "archgen/evaluation.hpp"
#include "archgen/evolution.hpp"

namespace archgen {

struct RateAblationRow {
  double rate = 0.0;
  double mean = 0.0;
  int plus = 0;   // improved over rate 0
  int equal = 0;
  int minus = 0;
};

struct RateAblationOptions {
  std::vector<double> rates{0.0, 0.2, 0.4, 0.6, 0.8};
  int n_archs = 15;
  std::uint64_t seed = 0;
  GaConfig ga;  // sampling bounds, widths, elimination unit, temperature
};

/// Reconstructs each seeded initial architecture once per rate and scores
/// it with the full-mode surrogate. The first rate is the reference for
/// the +/=/- counts.
std::vector<RateAblationRow> run_ablation_elimination(const Guidance& guidance,
                                                      const MarkovTeacher& teacher,
                                                      const RateAblationOptions& options);

struct EpochAblationOptions {
  int n_archs = 60;
  std::uint64_t seed = 0;
  double noise = kDefaultCheapNoise;
  ArchSampling sampling{};
  std::vector<std::pair<std::string, std::string>> mode_pairs{{"cheap", "full"}};
};

std::vector<CorrelationRow> run_ablation_epochs(const MarkovTeacher& teacher,
                                                const EpochAblationOptions& options);

void write_rate_table(std::ostream& out, const std::vector<RateAblationRow>& rows);
void write_correlation_table(std::ostream& out, const std::vector<CorrelationRow>& rows);

}  // namespace archgen
