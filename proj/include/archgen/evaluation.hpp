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
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "archgen/architecture.hpp"
#include "archgen/reconstructor.hpp"
#include "archgen/serialize.hpp"
#include "archgen/teacher.hpp"

namespace archgen {

enum class Provenance { kSurrogate, kTabular, kExternal };
enum class SurrogateMode { kCheap, kFull };

const char* to_string(Provenance p);
const char* to_string(SurrogateMode m);
SurrogateMode surrogate_mode_from_string(const std::string& s);

struct FitnessRecord {
  double fitness = 0.0;
  std::int64_t param_count = 0;
  Provenance provenance = Provenance::kSurrogate;
  std::string mode;  // "cheap" | "full" | "e<epochs>/<scope>"
  double wall_ms = 0.0;
  bool error = false;
  std::string error_message;
  std::uint64_t key = 0;  // architecture_hash
};

/// `timing` = false drops wall_ms so stored results stay reproducible.
Json fitness_record_to_json(const FitnessRecord& r, bool timing = true);
FitnessRecord fitness_record_from_json(const Json& j);

struct EvalRequest {
  const Architecture* arch = nullptr;
  const ReconstructionTrace* trace = nullptr;  // may be null
  std::uint64_t seed = 0;
};

class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual FitnessRecord evaluate(const EvalRequest& request) = 0;
  /// Default runs the requests one after another. Errors propagate.
  virtual std::vector<FitnessRecord> evaluate_batch(std::span<const EvalRequest> requests);
  /// True when evaluate() may be called from several threads at once.
  virtual bool concurrent() const { return false; }
  /// True when evaluate_batch() runs requests itself and reports failures
  /// as error-flagged records instead of throwing.
  virtual bool batched() const { return false; }
  virtual std::string name() const = 0;

  FitnessRecord evaluate(const Architecture& arch) { return evaluate(EvalRequest{&arch}); }
};

inline constexpr double kDefaultCheapNoise = 0.03;

/// Mean log transition probability over adjacent blocks. Depth < 2 gives 0.
double surrogate_base(const MarkovTeacher& teacher, const Architecture& arch);

/// clamp(logistic(a * base + b) - penalty * |depth - 15| / 15). Cheap mode
/// adds noise * (2u - 1) with u drawn from the architecture hash.
FitnessRecord surrogate_fitness(const MarkovTeacher& teacher, const Architecture& arch,
                                SurrogateMode mode, double noise = kDefaultCheapNoise);

/// u in [0, 1) used by cheap mode.
double surrogate_noise_unit(std::uint64_t arch_hash);

class SurrogateEvaluator final : public Evaluator {
 public:
  SurrogateEvaluator(MarkovTeacher teacher, SurrogateMode mode, double noise = kDefaultCheapNoise);
  using Evaluator::evaluate;
  FitnessRecord evaluate(const EvalRequest& request) override;
  bool concurrent() const override { return true; }
  std::string name() const override { return "surrogate"; }
  const MarkovTeacher& teacher() const { return teacher_; }

 private:
  MarkovTeacher teacher_;
  SurrogateMode mode_;
  double noise_;
};

struct TableEntry {
  double accuracy = 0.0;
  std::int64_t params = 0;
};

/// Accuracy table keyed by architecture_hash, read from lines of
/// {"key_hash": "<16 hex digits>", "accuracy": x, "params": n}.
class FitnessTable {
 public:
  static FitnessTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  void insert(std::uint64_t key, TableEntry entry) { entries_[key] = entry; }
  std::optional<TableEntry> find(std::uint64_t key) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::uint64_t, TableEntry> entries_;
};

/// Throws EvalError(kNotInTable) on a miss.
FitnessRecord tabular_fitness(const FitnessTable& table, const Architecture& arch);

class TabularEvaluator final : public Evaluator {
 public:
  explicit TabularEvaluator(FitnessTable table) : table_(std::move(table)) {}
  using Evaluator::evaluate;
  FitnessRecord evaluate(const EvalRequest& request) override;
  bool concurrent() const override { return true; }
  std::string name() const override { return "tabular"; }

 private:
  FitnessTable table_;
};

struct Correlation {
  double r = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// Pearson r with the two-sided Student-t p-value (n - 2 degrees of
/// freedom). Throws ReportError for n < 3, size mismatch or zero variance.
Correlation pearson(std::span<const double> x, std::span<const double> y);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Two-sided p-value of Student's t with `df` degrees of freedom.
double student_t_two_sided(double t, double df);

struct CorrelationRow {
  std::string label;  // "<mode a>-<mode b>"
  Correlation corr;
};

using ModalScorer = std::function<double(const Architecture&, const std::string& mode)>;

std::vector<CorrelationRow> correlation_report(
    const ModalScorer& score, std::span<const Architecture> archs,
    std::span<const std::pair<std::string, std::string>> mode_pairs);

/// Scorer over the surrogate with modes "cheap" and "full".
ModalScorer surrogate_scorer(const MarkovTeacher& teacher, double noise = kDefaultCheapNoise);

}  // namespace archgen
