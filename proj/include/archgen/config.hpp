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
#include <memory>
#include <string>

#include "archgen/evaluation.hpp"
#include "archgen/evolution.hpp"
#include "archgen/external.hpp"
#include "archgen/fcn.hpp"
#include "archgen/gpt.hpp"

namespace archgen {

struct CorpusConfig {
  std::string source = "teacher";  // nasbench | finetune | teacher
  std::size_t count = 1000;
  std::uint64_t seed = 0;
  double min_accuracy = 0.90;
  int stride = 1;
  Canonicalization canonicalization = Canonicalization::kFull;
  Json teacher = Json::object();
  /// Draw fine-tuning block kinds from the teacher chain instead of uniformly.
  bool finetune_teacher_kinds = false;
};

struct EvaluatorConfig {
  std::string kind = "surrogate";  // surrogate | tabular | external
  SurrogateMode mode = SurrogateMode::kFull;
  double noise = kDefaultCheapNoise;
  Json teacher = Json::object();
  std::string table;
  ExternalConfig external;
};

struct ArchgenConfig {
  GaConfig ga;
  GptConfig gpt;
  FcnConfig fcn;
  EvaluatorConfig evaluator;
  CorpusConfig corpus;
};

/// Sections ga, gpt, fcn, evaluator, corpus overlaid on the built-in
/// defaults. Unknown sections or keys throw ConfigError.
ArchgenConfig config_from_json(const Json& j);
Json config_to_json(const ArchgenConfig& c);
ArchgenConfig load_config(const std::filesystem::path& path);

MarkovTeacher evaluator_teacher(const EvaluatorConfig& c);
std::unique_ptr<Evaluator> make_evaluator(const EvaluatorConfig& c);

}  // namespace archgen
