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

#include "archgen/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "archgen/errors.hpp"
#include "archgen/hash.hpp"
#include "archgen/rng.hpp"

namespace archgen {

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::kSurrogate: return "surrogate";
    case Provenance::kTabular: return "tabular";
    case Provenance::kExternal: return "external";
  }
  return "?";
}

const char* to_string(SurrogateMode m) { return m == SurrogateMode::kCheap ? "cheap" : "full"; }

SurrogateMode surrogate_mode_from_string(const std::string& s) {
  if (s == "cheap") return SurrogateMode::kCheap;
  if (s == "full") return SurrogateMode::kFull;
  throw ConfigError("unknown surrogate mode '" + s + "'");
}

Json fitness_record_to_json(const FitnessRecord& r, bool timing) {
  Json j{{"fitness", r.fitness},   {"param_count", r.param_count},
         {"provenance", to_string(r.provenance)}, {"mode", r.mode},
         {"error", r.error},       {"key", hex64(r.key)}};
  if (timing) j["wall_ms"] = r.wall_ms;
  if (r.error) j["error_message"] = r.error_message;
  return j;
}

FitnessRecord fitness_record_from_json(const Json& j) {
  try {
    FitnessRecord r;
    r.fitness = j.at("fitness").get<double>();
    r.param_count = j.at("param_count").get<std::int64_t>();
    const auto p = j.at("provenance").get<std::string>();
    if (p == "surrogate") r.provenance = Provenance::kSurrogate;
    else if (p == "tabular") r.provenance = Provenance::kTabular;
    else if (p == "external") r.provenance = Provenance::kExternal;
    else throw DataError("unknown provenance '" + p + "'");
    r.mode = j.value("mode", "");
    r.wall_ms = j.value("wall_ms", 0.0);
    r.error = j.value("error", false);
    r.error_message = j.value("error_message", "");
    r.key = std::stoull(j.at("key").get<std::string>(), nullptr, 16);
    return r;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed fitness record: ") + e.what());
  } catch (const std::logic_error& e) {
    throw DataError(std::string("malformed fitness key: ") + e.what());
  }
}

std::vector<FitnessRecord> Evaluator::evaluate_batch(std::span<const EvalRequest> requests) {
  std::vector<FitnessRecord> out;
  out.reserve(requests.size());
  for (const auto& r : requests) out.push_back(evaluate(r));
  return out;
}

// ---------------------------------------------------------------- surrogate

double surrogate_base(const MarkovTeacher& teacher, const Architecture& arch) {
  const auto kinds = arch.kinds();
  for (auto k : kinds)
    if (kind_index(k) < 0 || kind_index(k) >= teacher.num_kinds())
      throw EvalError(EvalError::Code::kUnknownKind,
                      std::string("block kind ") + to_string(k) + " outside the teacher alphabet");
  if (kinds.size() < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < kinds.size(); ++i)
    sum += std::log(teacher.probability(kinds[i], kinds[i + 1]));
  return sum / static_cast<double>(kinds.size() - 1);
}

double surrogate_noise_unit(std::uint64_t arch_hash) {
  return static_cast<double>(splitmix64(arch_hash) >> 11) * 0x1.0p-53;
}

FitnessRecord surrogate_fitness(const MarkovTeacher& teacher, const Architecture& arch,
                                SurrogateMode mode, double noise) {
  const auto start = std::chrono::steady_clock::now();
  const double base = surrogate_base(teacher, arch);
  const double z = teacher.scale * base + teacher.shift;
  // exp(-inf) is inf and 1/inf is 0, so zero-probability transitions score 0.
  double f = 1.0 / (1.0 + std::exp(-z));
  const double depth = static_cast<double>(arch.blocks.size());
  f -= teacher.depth_penalty * std::abs(depth - 15.0) / 15.0;
  f = std::clamp(f, 0.0, 1.0);

  FitnessRecord rec;
  rec.key = architecture_hash(arch);
  if (mode == SurrogateMode::kCheap)
    f = std::clamp(f + noise * (2.0 * surrogate_noise_unit(rec.key) - 1.0), 0.0, 1.0);
  rec.fitness = f;
  rec.param_count = param_count(arch);
  rec.provenance = Provenance::kSurrogate;
  rec.mode = to_string(mode);
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

SurrogateEvaluator::SurrogateEvaluator(MarkovTeacher teacher, SurrogateMode mode, double noise)
    : teacher_(std::move(teacher)), mode_(mode), noise_(noise) {
  teacher_.check();
  if (!(noise_ >= 0.0)) throw ConfigError("surrogate noise must be >= 0");
}

FitnessRecord SurrogateEvaluator::evaluate(const EvalRequest& request) {
  return surrogate_fitness(teacher_, *request.arch, mode_, noise_);
}

// ---------------------------------------------------------------- tabular

FitnessTable FitnessTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open table " + path.string());
  FitnessTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = Json::parse(line);
      const auto& kh = j.at("key_hash");
      const std::uint64_t key = kh.is_string() ? std::stoull(kh.get<std::string>(), nullptr, 16)
                                               : kh.get<std::uint64_t>();
      TableEntry e{j.at("accuracy").get<double>(), j.value("params", std::int64_t{0})};
      if (!(e.accuracy >= 0.0 && e.accuracy <= 1.0)) throw ParseError("accuracy outside [0, 1]", line_no);
      table.insert(key, e);
    } catch (const Json::exception& e) {
      throw ParseError(e.what(), line_no);
    } catch (const std::logic_error& e) {
      throw ParseError(std::string("bad key_hash: ") + e.what(), line_no);
    }
  }
  return table;
}

void FitnessTable::save(const std::filesystem::path& path) const {
  std::vector<std::uint64_t> keys;
  for (const auto& [k, v] : entries_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write table " + path.string());
  for (auto k : keys) {
    const auto& e = entries_.at(k);
    out << Json{{"key_hash", hex64(k)}, {"accuracy", e.accuracy}, {"params", e.params}}.dump() << '\n';
  }
}

std::optional<TableEntry> FitnessTable::find(std::uint64_t key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

FitnessRecord tabular_fitness(const FitnessTable& table, const Architecture& arch) {
  FitnessRecord rec;
  rec.key = architecture_hash(arch);
  auto hit = table.find(rec.key);
  if (!hit) throw EvalError(EvalError::Code::kNotInTable, "architecture " + hex64(rec.key) + " not in table");
  rec.fitness = hit->accuracy;
  rec.param_count = hit->params ? hit->params : param_count(arch);
  rec.provenance = Provenance::kTabular;
  rec.mode = "table";
  return rec;
}

FitnessRecord TabularEvaluator::evaluate(const EvalRequest& request) {
  return tabular_fitness(table_, *request.arch);
}

// ---------------------------------------------------------------- statistics

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ConfigError("incomplete_beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - incomplete_beta(b, a, 1.0 - x);

  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  // Modified Lentz evaluation of the continued fraction.
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-15;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + num * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + num / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + num * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + num / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(log_front) * h / a;
}

double student_t_two_sided(double t, double df) {
  if (!(df > 0.0)) throw ConfigError("degrees of freedom must be > 0");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ReportError("correlation inputs differ in length");
  const std::size_t n = x.size();
  if (n < 3) throw ReportError("correlation needs at least 3 samples");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw ReportError("zero-variance fitness vector");
  Correlation c;
  c.n = n;
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(n - 2);
  const double denom = 1.0 - c.r * c.r;
  c.p_value = denom <= 0.0 ? 0.0
                           : student_t_two_sided(c.r * std::sqrt(df / denom), df);
  return c;
}

std::vector<CorrelationRow> correlation_report(
    const ModalScorer& score, std::span<const Architecture> archs,
    std::span<const std::pair<std::string, std::string>> mode_pairs) {
  if (archs.size() < 3) throw ReportError("correlation needs at least 3 architectures");
  std::vector<CorrelationRow> rows;
  for (const auto& [ma, mb] : mode_pairs) {
    std::vector<double> xa, xb;
    for (const auto& a : archs) {
      xa.push_back(score(a, ma));
      xb.push_back(score(a, mb));
    }
    rows.push_back({ma + "-" + mb, pearson(xa, xb)});
  }
  return rows;
}

ModalScorer surrogate_scorer(const MarkovTeacher& teacher, double noise) {
  return [teacher, noise](const Architecture& a, const std::string& mode) {
    return surrogate_fitness(teacher, a, surrogate_mode_from_string(mode), noise).fitness;
  };
}

}  // namespace archgen
