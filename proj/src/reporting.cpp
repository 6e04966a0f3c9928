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

#include "archgen/reporting.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "archgen/checkpoint.hpp"
#include "archgen/errors.hpp"

namespace archgen {

namespace fs = std::filesystem;

ArtifactRef make_artifact(const std::string& role, const fs::path& path) {
  return ArtifactRef{role, path.string(), file_digest(path)};
}

namespace {

Json artifacts_to_json(const std::vector<ArtifactRef>& refs) {
  Json a = Json::array();
  for (const auto& r : refs) a.push_back(Json{{"role", r.role}, {"path", r.path}, {"digest", r.digest}});
  return a;
}

std::vector<ArtifactRef> artifacts_from_json(const Json& j) {
  std::vector<ArtifactRef> out;
  for (const auto& r : j)
    out.push_back({r.at("role").get<std::string>(), r.at("path").get<std::string>(),
                   r.at("digest").get<std::string>()});
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

}  // namespace

Json manifest_to_json(const RunManifest& m) {
  return Json{{"tool_version", m.tool_version}, {"command", m.command},
              {"argv", m.argv},                 {"cwd", m.cwd},
              {"config", m.config},             {"seeds", m.seeds},
              {"inputs", artifacts_to_json(m.inputs)},
              {"outputs", artifacts_to_json(m.outputs)},
              {"started_at", m.started_at},     {"finished_at", m.finished_at}};
}

RunManifest manifest_from_json(const Json& j) {
  try {
    RunManifest m;
    m.tool_version = j.at("tool_version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.cwd = j.at("cwd").get<std::string>();
    m.config = j.at("config");
    m.seeds = j.at("seeds");
    m.inputs = artifacts_from_json(j.at("inputs"));
    m.outputs = artifacts_from_json(j.at("outputs"));
    m.started_at = j.value("started_at", "");
    m.finished_at = j.value("finished_at", "");
    return m;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
}

void write_manifest(const fs::path& path, const RunManifest& m) {
  write_text(path, manifest_to_json(m).dump(2) + "\n");
}

RunManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  try {
    return manifest_from_json(Json::parse(in));
  } catch (const Json::parse_error& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

void write_search_outputs(const fs::path& dir, const SearchResult& result) {
  fs::create_directories(dir);
  write_text(dir / kResultFile, search_result_to_json(result).dump(1) + "\n");
  std::string lines;
  for (const auto& g : result.logs) lines += generation_log_to_json(g).dump() + "\n";
  write_text(dir / kGenerationsFile, lines);
  write_text(dir / kBestArchFile, architecture_to_json(result.best.arch).dump(1) + "\n");
}

RunSummary load_run(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ReportError("run directory " + dir.string() + " does not exist");
  const auto result_path = dir / kResultFile;
  const auto gens_path = dir / kGenerationsFile;
  if (!fs::exists(result_path)) throw ReportError("no " + std::string(kResultFile) + " in " + dir.string());
  if (!fs::exists(gens_path)) throw ReportError("no " + std::string(kGenerationsFile) + " in " + dir.string());

  SearchResult result;
  try {
    std::ifstream in(result_path);
    result = search_result_from_json(Json::parse(in));
  } catch (const std::exception& e) {
    throw ReportError("corrupt " + result_path.string() + ": " + e.what());
  }
  std::vector<GenerationLog> logs;
  try {
    std::ifstream in(gens_path);
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) logs.push_back(generation_log_from_json(Json::parse(line)));
  } catch (const std::exception& e) {
    throw ReportError("corrupt " + gens_path.string() + ": " + e.what());
  }
  if (logs.empty()) throw ReportError("empty generation log");
  if (logs.size() != result.logs.size())
    throw ReportError("generation log and result disagree on the generation count");
  if (logs.back().evaluations != result.evaluations)
    throw ReportError("evaluation budget mismatch between result and generation log");

  RunSummary s;
  for (const auto& g : logs) {
    s.best_so_far.push_back(g.best_so_far);
    s.best.push_back(g.best);
    s.mean.push_back(g.mean);
  }
  s.evaluations = result.evaluations;
  s.cache_hits = result.cache_hits;
  s.errors = logs.back().errors;
  s.best_individual = result.best;
  return s;
}

RunSummary report(const fs::path& dir, std::ostream& out) {
  auto s = load_run(dir);
  std::ostringstream tsv;
  tsv << "generation\tbest_so_far\tbest\tmean\n" << std::setprecision(17);
  for (std::size_t g = 0; g < s.best_so_far.size(); ++g)
    tsv << g << '\t' << s.best_so_far[g] << '\t' << s.best[g] << '\t' << s.mean[g] << '\n';
  write_text(dir / "best_fitness.tsv", tsv.str());

  const auto& best = s.best_individual;
  out << "generations   " << s.best_so_far.size() - 1 << "\n"
      << "best fitness  " << std::setprecision(6) << best.score() << "\n"
      << "parameters    " << param_count(best.arch) << "\n"
      << "budget        " << s.evaluations << " evaluator calls, " << s.cache_hits
      << " cache hits, " << s.errors << " errors\n"
      << "best-so-far  ";
  for (double v : s.best_so_far) out << ' ' << std::setprecision(4) << v;
  out << "\n\n";
  for (std::size_t i = 0; i < best.arch.blocks.size(); ++i) {
    const auto& b = best.arch.blocks[i];
    const auto in = b.in_size(), o = b.out_size();
    out << std::setw(3) << i << "  " << std::left << std::setw(22) << to_string(b.kind) << std::right
        << " w=" << std::setw(3) << b.width << "  " << in.c << 'x' << in.h << 'x' << in.w << " -> "
        << o.c << 'x' << o.h << 'x' << o.w << '\n';
  }
  out << "head  FC " << best.arch.head.in_size.c << " -> " << best.arch.num_classes << '\n';
  return s;
}

}  // namespace archgen
