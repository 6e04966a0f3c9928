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

#include "archgen/ablation.hpp"

#include <iomanip>

#include "archgen/errors.hpp"

namespace archgen {

std::vector<RateAblationRow> run_ablation_elimination(const Guidance& guidance,
                                                      const MarkovTeacher& teacher,
                                                      const RateAblationOptions& options) {
  if (!guidance.active()) throw ConfigError("rate ablation needs a predictor, selector and vocabulary");
  if (options.rates.empty() || options.n_archs < 1) throw ConfigError("empty rate ablation");
  options.ga.check();
  const auto sampling = options.ga.sampling();
  Rng rng(derive_seed(options.seed, 0x41424c));
  std::vector<Architecture> initial;
  for (int i = 0; i < options.n_archs; ++i) initial.push_back(sample_architecture(rng, sampling));

  ReconstructOptions ropt;
  ropt.unit = options.ga.elimination_unit;
  ropt.width_choices = options.ga.width_choices;
  std::vector<RateAblationRow> rows;
  std::vector<double> reference;
  for (std::size_t r = 0; r < options.rates.size(); ++r) {
    RateAblationRow row;
    row.rate = options.rates[r];
    std::vector<double> scores;
    for (std::size_t i = 0; i < initial.size(); ++i) {
      Rng rrng(derive_seed(options.seed, r + 1, i));
      const auto rec = reconstruct(initial[i], *guidance.predictor, *guidance.selector,
                                   *guidance.vocab, row.rate, rrng, ropt);
      scores.push_back(surrogate_fitness(teacher, rec.arch, SurrogateMode::kFull).fitness);
      row.mean += scores.back();
    }
    row.mean /= static_cast<double>(scores.size());
    if (r == 0) reference = scores;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] > reference[i]) ++row.plus;
      else if (scores[i] == reference[i]) ++row.equal;
      else ++row.minus;
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<CorrelationRow> run_ablation_epochs(const MarkovTeacher& teacher,
                                                const EpochAblationOptions& options) {
  Rng rng(derive_seed(options.seed, 0x45504f));
  std::vector<Architecture> archs;
  for (int i = 0; i < options.n_archs; ++i) archs.push_back(sample_architecture(rng, options.sampling));
  return correlation_report(surrogate_scorer(teacher, options.noise), archs, options.mode_pairs);
}

void write_rate_table(std::ostream& out, const std::vector<RateAblationRow>& rows) {
  out << "rate\tmean\t+/=/-\n" << std::setprecision(6) << std::fixed;
  for (const auto& r : rows)
    out << std::setprecision(1) << r.rate << '\t' << std::setprecision(6) << r.mean << '\t' << r.plus
        << '/' << r.equal << '/' << r.minus << '\n';
  out.unsetf(std::ios::floatfield);
}

void write_correlation_table(std::ostream& out, const std::vector<CorrelationRow>& rows) {
  out << "pair\tPCC\tp-value\n";
  for (const auto& r : rows)
    out << r.label << '\t' << std::fixed << std::setprecision(4) << r.corr.r << '\t'
        << std::scientific << std::setprecision(2) << r.corr.p_value << '\n';
  out.unsetf(std::ios::floatfield);
}

}  // namespace archgen
