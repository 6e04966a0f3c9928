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
#include <ostream>
#include <string>
#include <vector>

#include "archgen/evolution.hpp"
#include "archgen/serialize.hpp"

namespace archgen {

struct ArtifactRef {
  std::string role;
  std::string path;
  std::string digest;  // FNV-1a of the file bytes, 16 hex digits
};

ArtifactRef make_artifact(const std::string& role, const std::filesystem::path& path);

struct RunManifest {
  std::string tool_version;
  std::string command;
  std::vector<std::string> argv;  // full argument list, program name excluded
  std::string cwd;
  Json config;
  Json seeds;
  std::vector<ArtifactRef> inputs;
  std::vector<ArtifactRef> outputs;
  std::string started_at;  // UTC, ISO 8601
  std::string finished_at;
};

Json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const Json& j);
void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

std::string utc_timestamp();

/// Files written by `search` into its run directory.
inline constexpr const char* kResultFile = "result.json";
inline constexpr const char* kGenerationsFile = "generations.jsonl";
inline constexpr const char* kBestArchFile = "best_arch.json";
inline constexpr const char* kManifestFile = "manifest.json";

void write_search_outputs(const std::filesystem::path& dir, const SearchResult& result);

struct RunSummary {
  std::vector<double> best_so_far;  // generation 0..G
  std::vector<double> best;
  std::vector<double> mean;
  std::size_t evaluations = 0;
  std::size_t cache_hits = 0;
  std::size_t errors = 0;
  Individual best_individual;
};

/// Loads and cross-checks a search run directory. Throws ReportError when
/// files are missing, corrupt or disagree on the evaluation budget.
RunSummary load_run(const std::filesystem::path& dir);

/// Human-readable summary to `out`; writes best_fitness.tsv next to the run.
RunSummary report(const std::filesystem::path& dir, std::ostream& out);

}  // namespace archgen
