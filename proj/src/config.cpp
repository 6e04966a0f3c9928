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

#include "archgen/config.hpp"

#include <fstream>

#include "archgen/errors.hpp"

namespace archgen {

namespace {

CorpusConfig corpus_from_json(const Json& j, CorpusConfig c) {
  if (!j.is_object()) throw ConfigError("corpus section must be an object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "source") c.source = v.get<std::string>();
      else if (key == "count") c.count = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "min_accuracy") c.min_accuracy = v.get<double>();
      else if (key == "stride") c.stride = v.get<int>();
      else if (key == "canonicalization") c.canonicalization = canonicalization_from_string(v.get<std::string>());
      else if (key == "teacher") c.teacher = v;
      else if (key == "finetune_teacher_kinds") c.finetune_teacher_kinds = v.get<bool>();
      else throw ConfigError("unknown corpus key '" + key + "'");
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad corpus config: ") + e.what());
  }
  if (c.source != "teacher" && c.source != "finetune" && c.source != "nasbench")
    throw ConfigError("unknown corpus source '" + c.source + "'");
  if (c.stride < 1) throw ConfigError("stride must be >= 1");
  return c;
}

Json corpus_to_json(const CorpusConfig& c) {
  return Json{{"source", c.source},
              {"count", c.count},
              {"seed", c.seed},
              {"min_accuracy", c.min_accuracy},
              {"stride", c.stride},
              {"canonicalization", to_string(c.canonicalization)},
              {"teacher", c.teacher},
              {"finetune_teacher_kinds", c.finetune_teacher_kinds}};
}

EvaluatorConfig evaluator_from_json(const Json& j, EvaluatorConfig c) {
  if (!j.is_object()) throw ConfigError("evaluator section must be an object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "kind") c.kind = v.get<std::string>();
      else if (key == "mode") c.mode = surrogate_mode_from_string(v.get<std::string>());
      else if (key == "noise") c.noise = v.get<double>();
      else if (key == "teacher") c.teacher = v;
      else if (key == "table") c.table = v.get<std::string>();
      else if (key == "external") c.external = external_config_from_json(v, c.external);
      else throw ConfigError("unknown evaluator key '" + key + "'");
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad evaluator config: ") + e.what());
  }
  if (c.kind != "surrogate" && c.kind != "tabular" && c.kind != "external")
    throw ConfigError("unknown evaluator kind '" + c.kind + "'");
  return c;
}

Json evaluator_to_json(const EvaluatorConfig& c) {
  return Json{{"kind", c.kind},           {"mode", to_string(c.mode)},
              {"noise", c.noise},         {"teacher", c.teacher},
              {"table", c.table},         {"external", external_config_to_json(c.external)}};
}

}  // namespace

ArchgenConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ArchgenConfig c;
  for (const auto& [section, v] : j.items()) {
    if (section == "ga") c.ga = ga_config_from_json(v, c.ga);
    else if (section == "gpt") c.gpt = gpt_config_from_json(v, c.gpt);
    else if (section == "fcn") c.fcn = fcn_config_from_json(v, c.fcn);
    else if (section == "evaluator") c.evaluator = evaluator_from_json(v, c.evaluator);
    else if (section == "corpus") c.corpus = corpus_from_json(v, c.corpus);
    else throw ConfigError("unknown config section '" + section + "'");
  }
  c.fcn.context_len = c.gpt.context_len;
  return c;
}

Json config_to_json(const ArchgenConfig& c) {
  return Json{{"ga", ga_config_to_json(c.ga)},
              {"gpt", gpt_config_to_json(c.gpt)},
              {"fcn", fcn_config_to_json(c.fcn)},
              {"evaluator", evaluator_to_json(c.evaluator)},
              {"corpus", corpus_to_json(c.corpus)}};
}

ArchgenConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in, nullptr, true, true);  // comments allowed
  } catch (const Json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

MarkovTeacher evaluator_teacher(const EvaluatorConfig& c) { return teacher_from_json(c.teacher); }

std::unique_ptr<Evaluator> make_evaluator(const EvaluatorConfig& c) {
  if (c.kind == "surrogate")
    return std::make_unique<SurrogateEvaluator>(evaluator_teacher(c), c.mode, c.noise);
  if (c.kind == "tabular") {
    if (c.table.empty()) throw ConfigError("tabular evaluator needs evaluator.table");
    return std::make_unique<TabularEvaluator>(FitnessTable::load(c.table));
  }
  return std::make_unique<ExternalEvaluator>(c.external);
}

}  // namespace archgen
