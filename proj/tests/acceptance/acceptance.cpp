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

// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Arguments select a subset by name;
// --workdir keeps the intermediate artifacts.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "archgen/ablation.hpp"
#include "archgen/checkpoint.hpp"
#include "archgen/cli.hpp"
#include "archgen/corpus.hpp"
#include "archgen/diagnostics.hpp"
#include "archgen/errors.hpp"
#include "archgen/evolution.hpp"
#include "archgen/reconstructor.hpp"
#include "archgen/reporting.hpp"

namespace fs = std::filesystem;
using namespace archgen;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

Outcome round_trip() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  Vocabulary vocab;
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = sample_architecture(rng, {});
    const auto back = decode_architecture(encode_architecture(a, vocab), vocab, a.input_shape, a.num_classes);
    if (key_sequence(back) != key_sequence(a) || back.kinds() != a.kinds()) ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 10.0,
          "1000 architectures, " + std::to_string(mismatches) + " mismatches, " + fmt(secs, 3) + " s"};
}

int enumerate_windows(int size, int kernel, int stride, int pad_lo, int pad_hi, int dilation) {
  int count = 0;
  for (int start = -pad_lo; start + dilation * (kernel - 1) <= size - 1 + pad_hi; start += stride) ++count;
  return count;
}

Outcome shape_oracle() {
  int cases = 0, mismatches = 0;
  auto check = [&](LayerCategory cat, Shape3 in, Pair2 k, Pair2 s, Padding4 p, int d) {
    LayerDescriptor l;
    l.category = cat;
    l.in_size = in;
    l.kernel = k;
    l.stride = s;
    l.padding = p;
    l.dilation = d;
    l.bias_used = false;
    if (cat == LayerCategory::kConv) {
      l.groups = 1;
      l.out_size = {5, 1, 1};
    } else {
      l.pool_type = PoolType::kMax;
      l.out_size = {in.c, 1, 1};
    }
    ++cases;
    const int h = enumerate_windows(in.h, k[0], s[0], p.top, p.bottom, d);
    const int w = enumerate_windows(in.w, k[1], s[1], p.left, p.right, d);
    if (h <= 0 || w <= 0) {
      try {
        infer_out_size(l);
        ++mismatches;
      } catch (const ShapeError&) {
      }
      return;
    }
    const Shape3 want{cat == LayerCategory::kConv ? 5 : in.c, h, w};
    if (infer_out_size(l) != want) ++mismatches;
  };
  for (int size = 1; size <= 16; ++size)
    for (int k = 1; k <= 5; ++k)
      for (int s = 1; s <= 3; ++s)
        for (int d = 1; d <= 3; ++d) {
          const int ws = 17 - size, wk = 6 - k, wst = 4 - s;
          for (int lo = 0; lo <= 2; ++lo)
            for (int hi = 0; hi <= 2; ++hi) {
              check(LayerCategory::kConv, {3, size, ws}, {k, wk}, {s, wst}, {lo, hi, hi, lo}, d);
              check(LayerCategory::kConv, {3, ws, size}, {wk, k}, {wst, s}, {hi, lo, lo, hi}, d);
            }
          check(LayerCategory::kPool, {4, size, ws}, {k, wk}, {s, wst}, {}, d);
          check(LayerCategory::kPool, {4, ws, size}, {wk, k}, {wst, s}, {}, d);
        }
  return {cases >= 10000 && mismatches == 0,
          std::to_string(cases) + " cases, " + std::to_string(mismatches) + " mismatches"};
}

Outcome schedule() {
  const auto sched = GaConfig{}.schedule();
  double worst = 0.0;
  for (int t = 0; t <= sched.iter_max; ++t) {
    const double want = 0.4 * (1.0 - static_cast<double>(t) / 20.0);
    worst = std::max(worst, std::abs(elimination_rate(sched, t) - want));
  }
  const bool ends = elimination_rate(sched, 0) == 0.4 && elimination_rate(sched, sched.iter_max) == 0.0;
  return {sched.iter_max == 20 && ends && worst <= 1e-12,
          "21 points, max deviation " + fmt(worst, 3) + ", rate(0)=" + fmt(elimination_rate(sched, 0)) +
              ", rate(20)=" + fmt(elimination_rate(sched, sched.iter_max))};
}

GptConfig tiny_gpt(int layers, std::uint64_t seed) {
  GptConfig c;
  c.n_layers = layers;
  c.n_heads = 2;
  c.context_len = 4;
  c.vocab_size = 7;
  c.d_model = 8;
  c.d_ff = 16;
  c.dropout = 0.0;
  c.seed = seed;
  return c;
}

void jitter(GptModeld& m, std::uint64_t seed) {
  Rng rng(seed);
  for (Eigen::Index i = 0; i < m.parameters().size(); ++i) m.parameters()(i) += 0.3 * (uniform01(rng) - 0.5);
}

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  GptModeld m(tiny_gpt(2, 13));
  jitter(m, 17);
  const std::vector<TrainingPair> batch{
      {{0, 4, 2, 3}, 4}, {{4, 6, 3, 2}, 1}, {{0, 0, 0, 3}, 2}, {{1, 2, 5, 4}, 6}, {{6, 5, 4, 3}, 0}};
  const auto lg = backward(m, std::span<const TrainingPair>(batch));
  const double h = 1e-4;
  double worst = 0.0;
  std::string worst_slot;
  for (const auto& slot : m.slots()) {
    for (Eigen::Index i = slot.offset; i < slot.offset + slot.size(); ++i) {
      const double saved = m.parameters()(i);
      m.parameters()(i) = saved + h;
      const double up = loss(m, std::span<const TrainingPair>(batch));
      m.parameters()(i) = saved - h;
      const double down = loss(m, std::span<const TrainingPair>(batch));
      m.parameters()(i) = saved;
      const double fd = (up - down) / (2 * h);
      const double an = lg.gradient(i);
      const double rel = std::abs(an - fd) / std::max(1e-6, std::abs(an) + std::abs(fd));
      if (rel > worst) {
        worst = rel;
        worst_slot = slot.name;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 120.0, std::to_string(m.slots().size()) + " parameter groups, max rel error " +
                                            fmt(worst, 3) + " (" + worst_slot + "), " + fmt(secs, 3) + " s"};
}

Outcome causal_mask() {
  GptModeld m(tiny_gpt(2, 3));
  jitter(m, 3);
  Rng rng(5);
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<TokenId> a(4);
    for (auto& t : a) t = static_cast<TokenId>(uniform_index(rng, 7));
    const std::size_t j = uniform_index(rng, 4);
    auto b = a;
    for (std::size_t i = j; i < 4; ++i) b[i] = static_cast<TokenId>(uniform_index(rng, 7));
    const auto la = forward(m, std::span<const TokenId>(a));
    const auto lb = forward(m, std::span<const TokenId>(b));
    bool same = true;
    for (std::size_t t = 0; t < j; ++t)
      for (int v = 0; v < 7; ++v) same = same && la(t, v) == lb(t, v);
    violations += !same;
  }
  return {violations == 0, "1000 trials, " + std::to_string(violations) + " past-position changes"};
}

Outcome learning() {
  const std::vector<BlockKind> kinds{BlockKind::kConvNormActivation, BlockKind::kConv,
                                     BlockKind::kSqueezeExcitation,  BlockKind::kInception,
                                     BlockKind::kBatchNormal,        BlockKind::kRelu,
                                     BlockKind::kInvertedResidual,   BlockKind::kStem};
  const auto teacher = MarkovTeacher::peaked(kinds, 0.7, 1);
  const auto records = generate_teacher_corpus(teacher, 1000, 3);
  auto vocab = build_vocabulary(records);
  vocab.freeze();
  GptConfig cfg;
  cfg.vocab_size = vocab.size();
  cfg.epochs = 50;
  cfg.seed = 7;
  const auto pairs = make_training_pairs(records, vocab, cfg.context_len, 1);
  const auto probe = BlockStartProbe::build(records, vocab, cfg.context_len);
  const double majority = majority_baseline(pairs);
  GptModelf model(cfg);
  std::vector<double> kl{teacher_kl(model, probe, teacher)};
  double accuracy = 0.0;
  TrainOptions<float> opt;
  opt.on_epoch = [&](int e, const GptModelf& m, const TrainReport&) {
    if (e == 1 || e == 10 || e == 50) kl.push_back(teacher_kl(m, probe, teacher));
    if (e == 50) accuracy = next_token_stats(m, std::span<const TrainingPair>(pairs)).accuracy;
  };
  const auto t0 = std::chrono::steady_clock::now();
  train(model, std::span<const TrainingPair>(pairs), cfg, TrainPhase::kPretrain, opt);
  const double secs = seconds_since(t0);
  bool monotone = kl.size() == 4;
  for (std::size_t i = 1; monotone && i < kl.size(); ++i) monotone = kl[i] < kl[i - 1];
  const double lift = accuracy - majority;
  return {lift >= 0.20 && monotone && secs < 900.0,
          "accuracy " + fmt(accuracy) + " vs majority " + fmt(majority) + " (+" + fmt(100 * lift, 3) +
              " points), KL init/1/10/50 " + fmt(kl[0]) + "/" + (kl.size() > 1 ? fmt(kl[1]) : "?") + "/" +
              (kl.size() > 2 ? fmt(kl[2]) : "?") + "/" + (kl.size() > 3 ? fmt(kl[3]) : "?") + ", " +
              fmt(secs, 4) + " s"};
}

Outcome fidelity_correlation() {
  const Correlation fixture = pearson(std::vector<double>{1, 2, 3, 4, 5}, std::vector<double>{2, 4, 5, 4, 5});
  EpochAblationOptions opt;
  opt.n_archs = 60;
  opt.seed = 1;
  const auto rows = run_ablation_epochs(teacher_from_json(Json::object()), opt);
  const auto& c = rows.at(0).corr;
  const bool fixture_ok = std::abs(fixture.r - 0.7746) < 1e-3;
  return {fixture_ok && c.n == 60 && c.r > 0.5 && c.p_value < 0.05,
          "cheap vs full over " + std::to_string(c.n) + " architectures: r " + fmt(c.r) + ", p " +
              fmt(c.p_value, 3) + "; fixture r " + fmt(fixture.r, 7)};
}

// Guided pipeline shared by rate-ablation, search and determinism. Built through the
// command line so it exercises the same path a user follows.
class Pipeline {
 public:
  explicit Pipeline(fs::path dir) : dir_(std::move(dir)) {}

  const fs::path& dir() const { return dir_; }

  void ensure() {
    if (ready_) return;
    fs::create_directories(dir_);
    const auto p = [&](const char* f) { return (dir_ / f).string(); };
    if (!fs::exists(dir_ / "fcn.bin")) {
      run({"--seed", "1", "build-corpus", "--source", "teacher", "--count", "1000", "--out", p("pre.jsonl")});
      run({"--seed", "2", "build-corpus", "--source", "finetune", "--teacher-kinds", "--count", "300", "--out",
           p("ft.jsonl")});
      run({"pretrain", "--corpus", p("pre.jsonl"), "--vocab-corpus", p("ft.jsonl"), "--epochs", "20", "--out",
           p("gpt.bin")});
      run({"train-fcn", "--corpus", p("ft.jsonl"), "--gpt", p("gpt.bin"), "--out", p("fcn.bin")});
    }
    gpt_ = std::make_unique<GptCheckpoint<float>>(load_gpt<float>(dir_ / "gpt.bin"));
    fcn_ = std::make_unique<FcnCheckpoint<float>>(load_fcn<float>(dir_ / "fcn.bin"));
    predictor_ = std::make_unique<GptPredictor<float>>(gpt_->model, 0.0);
    selector_ = std::make_unique<FcnSelector<float>>(fcn_->model);
    ready_ = true;
  }

  Guidance guidance() const { return {predictor_.get(), selector_.get(), &gpt_->vocab}; }

  static void run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    auto full = args;
    full.insert(full.begin(), {"--log-level", "warn"});
    const int code = run_cli(full, out, err);
    if (code != kExitOk) throw std::runtime_error("archgen command failed: " + err.str());
  }

 private:
  fs::path dir_;
  bool ready_ = false;
  std::unique_ptr<GptCheckpoint<float>> gpt_;
  std::unique_ptr<FcnCheckpoint<float>> fcn_;
  std::unique_ptr<GptPredictor<float>> predictor_;
  std::unique_ptr<FcnSelector<float>> selector_;
};

Outcome rate_ablation(Pipeline& pipe) {
  pipe.ensure();
  const auto teacher = teacher_from_json(Json::object());
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RateAblationOptions opt;
    opt.rates = {0.0, 0.4};
    opt.seed = seed;
    opt.ga.seed = seed;
    const auto rows = run_ablation_elimination(pipe.guidance(), teacher, opt);
    const auto& base = rows.at(0);
    const auto& guided = rows.at(1);
    pass = pass && guided.mean > base.mean && guided.plus >= 13;
    detail += (seed > 1 ? "; " : "") + std::string("seed ") + std::to_string(seed) + " " + fmt(base.mean, 3) +
              "->" + fmt(guided.mean, 3) + " " + std::to_string(guided.plus) + "/" + std::to_string(guided.equal) +
              "/" + std::to_string(guided.minus);
  }
  return {pass, detail};
}

Outcome search(Pipeline& pipe) {
  pipe.ensure();
  SurrogateEvaluator evaluator(teacher_from_json(Json::object()), SurrogateMode::kFull);
  int beats_random = 0;
  double guided_mean = 0.0, plain_mean = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    GaConfig cfg;
    cfg.seed = seed;
    const auto guided = run_search(cfg, pipe.guidance(), evaluator);
    GaConfig plain = cfg;
    plain.rate_ori = 0.0;
    const auto baseline = run_search(plain, pipe.guidance(), evaluator);
    const std::size_t budget = static_cast<std::size_t>(cfg.population) * (cfg.generations + 1);
    const auto random = random_search(cfg, budget, evaluator);
    beats_random += guided.best.score() > random.best.score();
    guided_mean += guided.best.score() / 10.0;
    plain_mean += baseline.best.score() / 10.0;
  }
  return {beats_random >= 8 && guided_mean > plain_mean,
          "beats equal-budget random search in " + std::to_string(beats_random) + "/10 seeds; mean best " +
              fmt(guided_mean) + " vs " + fmt(plain_mean) + " at rate 0"};
}

Outcome determinism(Pipeline& pipe) {
  pipe.ensure();
  const auto run_dir = pipe.dir() / "det_run";
  const auto rerun_dir = pipe.dir() / "det_rerun";
  fs::remove_all(run_dir);
  fs::remove_all(rerun_dir);
  Pipeline::run({"--threads", "1", "--seed", "7", "search", "--gpt", (pipe.dir() / "gpt.bin").string(), "--fcn",
                 (pipe.dir() / "fcn.bin").string(), "--out", run_dir.string()});
  std::ostringstream out, err;
  const int code = run_cli({"rerun", (run_dir / kManifestFile).string(), "--out", rerun_dir.string()}, out, err);
  bool same_files = true;
  for (const char* f : {kResultFile, kGenerationsFile, kBestArchFile})
    same_files = same_files && file_digest(run_dir / f) == file_digest(rerun_dir / f);
  return {code == kExitOk && same_files,
          "rerun exit " + std::to_string(code) + ", outputs " + (same_files ? "bitwise identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> only;
  std::optional<fs::path> workdir;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--workdir" && i + 1 < argc) workdir = argv[++i];
    else only.push_back(a);
  }
  const bool keep = workdir.has_value();
  if (!workdir) workdir = fs::temp_directory_path() / ("archgen_acceptance_" + std::to_string(std::random_device{}()));
  Pipeline pipe(*workdir / "pipeline");

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"round-trip", round_trip},
      {"shape-oracle", shape_oracle},
      {"schedule", schedule},
      {"gradient-check", gradient_check},
      {"causal-mask", causal_mask},
      {"learning", learning},
      {"rate-ablation", [&] { return rate_ablation(pipe); }},
      {"fidelity-correlation", fidelity_correlation},
      {"search", [&] { return search(pipe); }},
      {"determinism", [&] { return determinism(pipe); }},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  if (!keep) {
    std::error_code ec;
    fs::remove_all(*workdir, ec);
  }
  return failures == 0 ? 0 : 1;
}
