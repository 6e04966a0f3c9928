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

#include "archgen/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <limits>
#include <sstream>

#include "archgen/ablation.hpp"
#include "archgen/checkpoint.hpp"
#include "archgen/config.hpp"
#include "archgen/corpus.hpp"
#include "archgen/errors.hpp"
#include "archgen/evolution.hpp"
#include "archgen/fcn.hpp"
#include "archgen/gpt.hpp"
#include "archgen/log.hpp"
#include "archgen/reconstructor.hpp"
#include "archgen/reporting.hpp"

namespace archgen {

namespace fs = std::filesystem;

Architecture read_architecture(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open architecture " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error&) {
    // A corpus file: take its first record.
    try {
      j = Json::parse(text.substr(0, text.find('\n')));
    } catch (const Json::parse_error& e) {
      throw ParseError(e.what(), 1);
    }
  }
  try {
    return architecture_from_json(j.contains("arch") ? j["arch"] : j);
  } catch (const Json::exception& e) {
    throw DataError("malformed architecture in " + path.string() + ": " + e.what());
  }
}

void write_architecture(const fs::path& path, const Architecture& arch) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << architecture_to_json(arch).dump(1) << '\n';
}

fs::path manifest_path_for(const std::string& command, const fs::path& out) {
  if (command == "search") return out / kManifestFile;
  return fs::path(out.string() + ".manifest.json");
}

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string log_level = "info";
};

class Session {
 public:
  Session(const Globals& g, std::vector<std::string> argv, std::string command)
      : globals_(g) {
    cfg_ = g.config_path.empty() ? ArchgenConfig{} : load_config(g.config_path);
    if (g.seed) {
      cfg_.ga.seed = cfg_.gpt.seed = cfg_.fcn.seed = cfg_.corpus.seed = *g.seed;
    }
    cfg_.ga.threads = g.threads;
    cfg_.ga.check();
    manifest_.tool_version = kToolVersion;
    manifest_.command = std::move(command);
    manifest_.argv = std::move(argv);
    manifest_.cwd = fs::current_path().string();
    manifest_.started_at = utc_timestamp();
    if (!g.config_path.empty()) input("config", g.config_path);
  }

  ArchgenConfig& cfg() { return cfg_; }
  void input(const std::string& role, const fs::path& p) { manifest_.inputs.push_back(make_artifact(role, p)); }
  void output(const std::string& role, const fs::path& p) { manifest_.outputs.push_back(make_artifact(role, p)); }

  void finish(const fs::path& manifest_path) {
    manifest_.config = config_to_json(cfg_);
    manifest_.seeds = Json{{"ga", cfg_.ga.seed}, {"gpt", cfg_.gpt.seed}, {"fcn", cfg_.fcn.seed},
                           {"corpus", cfg_.corpus.seed}};
    manifest_.finished_at = utc_timestamp();
    write_manifest(manifest_path, manifest_);
  }

 private:
  Globals globals_;
  ArchgenConfig cfg_;
  RunManifest manifest_;
};

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

Json train_report_json(const TrainReport& r) {
  return Json{{"phase", to_string(r.phase)},
              {"epoch_loss", r.epoch_loss},
              {"epoch_accuracy", r.epoch_accuracy},
              {"checkpoint_id", r.checkpoint_id}};
}

std::vector<CorpusRecord> read_corpora(Session& s, const std::vector<std::string>& paths, const std::string& role) {
  std::vector<CorpusRecord> all;
  for (const auto& p : paths) {
    s.input(role, p);
    auto recs = read_corpus(p);
    all.insert(all.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  return all;
}

double final_loss(const TrainReport& r) {
  return r.epoch_loss.empty() ? std::numeric_limits<double>::quiet_NaN() : r.epoch_loss.back();
}

TrainOptions<float> progress(const std::string& phase, const fs::path& out, int checkpoint_every,
                             const Vocabulary& vocab) {
  TrainOptions<float> opt;
  opt.on_epoch = [phase](int e, const GptModelf&, const TrainReport& r) {
    std::ostringstream m;
    m << phase << " epoch " << e << " loss " << r.epoch_loss.back() << " acc " << r.epoch_accuracy.back();
    log_info(m.str());
  };
  if (checkpoint_every > 0) {
    opt.checkpoint_every = checkpoint_every;
    opt.on_checkpoint = [out, &vocab](int e, const GptModelf& m) {
      save_gpt(fs::path(out.string() + ".e" + std::to_string(e)), m, vocab);
    };
  }
  return opt;
}

// ---------------------------------------------------------------- commands

struct CorpusArgs {
  std::string source;
  std::string in;
  std::string out;
  std::optional<std::size_t> count;
  std::optional<double> min_accuracy;
  bool teacher_kinds = false;
};

int cmd_build_corpus(Session& s, const CorpusArgs& a, std::ostream& out) {
  auto& c = s.cfg().corpus;
  if (!a.source.empty()) c.source = a.source;
  if (a.count) c.count = *a.count;
  if (a.min_accuracy) c.min_accuracy = *a.min_accuracy;
  if (a.teacher_kinds) c.finetune_teacher_kinds = true;
  std::vector<CorpusRecord> records;
  if (c.source == "nasbench") {
    if (a.in.empty()) throw ConfigError("--in is required for --source nasbench");
    s.input("nasbench", a.in);
    NasbenchStats stats;
    records = load_nasbench(a.in, c.min_accuracy, &stats);
    out << "nasbench records " << stats.total << ", retained " << stats.retained << '\n';
  } else if (c.source == "finetune") {
    const auto teacher = teacher_from_json(c.teacher);
    records = build_finetune_corpus(default_library(), c.count, c.seed, s.cfg().ga.sampling(),
                                    c.finetune_teacher_kinds ? &teacher : nullptr);
  } else if (c.source == "teacher") {
    records = generate_teacher_corpus(teacher_from_json(c.teacher), c.count, c.seed, s.cfg().ga.sampling());
  } else {
    throw ConfigError("unknown corpus source '" + c.source + "'");
  }
  write_corpus(a.out, records);
  s.output("corpus", a.out);
  const auto vocab = build_vocabulary(records, c.canonicalization);
  out << "wrote " << records.size() << " records to " << a.out << " (" << vocab.layer_count()
      << " distinct layer structures)\n";
  s.finish(manifest_path_for("build-corpus", a.out));
  return kExitOk;
}

struct TrainArgs {
  std::vector<std::string> corpus;
  std::vector<std::string> vocab_corpus;
  std::string from;
  std::string out;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<int> batch;
  bool freeze_embeddings = false;
  int checkpoint_every = 0;
};

int cmd_pretrain(Session& s, const TrainArgs& a, std::ostream& out) {
  auto& g = s.cfg().gpt;
  if (a.epochs) g.epochs = *a.epochs;
  if (a.lr) g.lr = *a.lr;
  if (a.batch) g.batch_size = *a.batch;
  const auto records = read_corpora(s, a.corpus, "corpus");
  auto vocab_records = records;
  const auto extra = read_corpora(s, a.vocab_corpus, "vocab_corpus");
  vocab_records.insert(vocab_records.end(), extra.begin(), extra.end());
  auto vocab = build_vocabulary(vocab_records, s.cfg().corpus.canonicalization);
  vocab.freeze();
  g.vocab_size = vocab.size();
  const auto pairs = make_training_pairs(records, vocab, g.context_len, s.cfg().corpus.stride);
  log_info("pretrain: " + std::to_string(pairs.size()) + " pairs, vocabulary " + std::to_string(vocab.size()));
  GptModelf model(g);
  auto report = train(model, pairs, g, TrainPhase::kPretrain, progress("pretrain", a.out, a.checkpoint_every, vocab));
  save_gpt(a.out, model, vocab);
  report.checkpoint_id = file_digest(a.out);
  write_json(a.out + ".report.json", train_report_json(report));
  s.output("checkpoint", a.out);
  s.output("report", a.out + ".report.json");
  out << "pretrained " << g.epochs << " epochs, final loss " << final_loss(report) << ", checkpoint "
      << report.checkpoint_id << '\n';
  s.finish(manifest_path_for("pretrain", a.out));
  return kExitOk;
}

int cmd_finetune(Session& s, const TrainArgs& a, std::ostream& out) {
  s.input("checkpoint", a.from);
  auto ckpt = load_gpt<float>(a.from);
  GptConfig g = ckpt.model.config();
  // Training knobs come from the config's gpt section; sizes from the checkpoint.
  g.lr = s.cfg().gpt.lr;
  g.batch_size = s.cfg().gpt.batch_size;
  g.epochs = s.cfg().gpt.epochs;
  g.dropout = s.cfg().gpt.dropout;
  g.seed = s.cfg().gpt.seed;
  g.freeze_embeddings = s.cfg().gpt.freeze_embeddings || a.freeze_embeddings;
  if (a.epochs) g.epochs = *a.epochs;
  if (a.lr) g.lr = *a.lr;
  if (a.batch) g.batch_size = *a.batch;
  const auto records = read_corpora(s, a.corpus, "corpus");
  std::vector<TrainingPair> pairs;
  try {
    pairs = make_training_pairs(records, ckpt.vocab, g.context_len, s.cfg().corpus.stride);
  } catch (const UnknownLayerError& e) {
    throw UnknownLayerError(std::string(e.what()) +
                            " (build the pretraining vocabulary with --vocab-corpus covering this corpus)");
  }
  ckpt.model.mutable_config() = g;
  auto report = train(ckpt.model, pairs, g, TrainPhase::kFinetune, progress("finetune", a.out, a.checkpoint_every, ckpt.vocab));
  save_gpt(a.out, ckpt.model, ckpt.vocab);
  report.checkpoint_id = file_digest(a.out);
  write_json(a.out + ".report.json", train_report_json(report));
  s.output("checkpoint", a.out);
  s.output("report", a.out + ".report.json");
  out << "fine-tuned " << g.epochs << " epochs, final loss " << final_loss(report) << ", checkpoint "
      << report.checkpoint_id << '\n';
  s.finish(manifest_path_for("finetune", a.out));
  return kExitOk;
}

struct FcnArgs {
  std::vector<std::string> corpus;
  std::string gpt;
  std::string out;
  std::optional<int> epochs;
  std::optional<double> lr;
};

int cmd_train_fcn(Session& s, const FcnArgs& a, std::ostream& out) {
  s.input("gpt", a.gpt);
  const auto gpt = load_gpt<float>(a.gpt);
  auto f = s.cfg().fcn;
  if (a.epochs) f.epochs = *a.epochs;
  if (a.lr) f.lr = *a.lr;
  f.context_len = gpt.model.config().context_len;
  f.vocab_size = gpt.vocab.size();
  const auto records = read_corpora(s, a.corpus, "corpus");
  const auto examples = make_fcn_examples(records, gpt.vocab, f.context_len);
  TrainReport report;
  const auto model = fcn_train<float>(examples, f, &report);
  save_fcn(a.out, model, gpt.vocab);
  s.output("checkpoint", a.out);
  out << "trained FCN on " << examples.size() << " examples, accuracy " << fcn_accuracy(model, examples) << '\n';
  s.finish(manifest_path_for("train-fcn", a.out));
  return kExitOk;
}

struct Models {
  // Heap-held so the predictor's references survive moves of Models.
  std::unique_ptr<GptCheckpoint<float>> gpt;
  std::unique_ptr<FcnCheckpoint<float>> fcn;
  std::unique_ptr<GptPredictor<float>> predictor;
  std::unique_ptr<FcnSelector<float>> selector;

  Guidance guidance() const {
    if (!predictor) return {};
    return Guidance{predictor.get(), selector.get(), &gpt->vocab};
  }
};

Models load_models(Session& s, const std::string& gpt, const std::string& fcn, double temperature) {
  if (gpt.empty() || fcn.empty()) throw ConfigError("both --gpt and --fcn checkpoints are required");
  Models m;
  s.input("gpt", gpt);
  s.input("fcn", fcn);
  m.gpt = std::make_unique<GptCheckpoint<float>>(load_gpt<float>(gpt));
  m.fcn = std::make_unique<FcnCheckpoint<float>>(load_fcn<float>(fcn));
  if (m.gpt->vocab.hash() != m.fcn->vocab.hash())
    throw DataError("GPT and FCN checkpoints were built on different vocabularies");
  m.predictor = std::make_unique<GptPredictor<float>>(m.gpt->model, temperature);
  m.selector = std::make_unique<FcnSelector<float>>(m.fcn->model);
  return m;
}

struct ReconArgs {
  std::string arch, gpt, fcn, out, trace;
  double rate = 0.4;
  std::optional<double> temperature;
};

int cmd_reconstruct(Session& s, const ReconArgs& a, std::ostream& out) {
  if (!(a.rate >= 0.0 && a.rate <= 1.0)) throw ConfigError("--rate must lie in [0, 1]");
  s.input("arch", a.arch);
  const auto arch = read_architecture(a.arch);
  const double temperature = a.temperature.value_or(s.cfg().ga.temperature);
  const auto models = load_models(s, a.gpt, a.fcn, temperature);
  ReconstructOptions opt;
  opt.unit = s.cfg().ga.elimination_unit;
  opt.width_choices = s.cfg().ga.width_choices;
  Rng rng(derive_seed(s.cfg().ga.seed, 0x5245434f4e));
  const auto g = models.guidance();
  const auto rec = reconstruct(arch, *g.predictor, *g.selector, *g.vocab, a.rate, rng, opt);
  write_architecture(a.out, rec.arch);
  s.output("arch", a.out);
  if (!a.trace.empty()) {
    write_json(a.trace, trace_to_json(rec.trace));
    s.output("trace", a.trace);
  }
  out << "eliminated " << rec.trace.eliminated.size() << " of " << arch.blocks.size() << " blocks\n"
      << describe(rec.arch) << '\n';
  s.finish(manifest_path_for("reconstruct", a.out));
  return kExitOk;
}

struct SearchArgs {
  std::string gpt, fcn, evaluator, out;
  bool no_gpt = false;
  std::optional<int> population, generations;
  std::optional<double> rate;
};

int cmd_search(Session& s, const SearchArgs& a, std::ostream& out) {
  auto& cfg = s.cfg();
  if (!a.evaluator.empty()) cfg.evaluator.kind = a.evaluator;
  if (a.population) cfg.ga.population = *a.population;
  if (a.generations) cfg.ga.generations = *a.generations;
  if (a.rate) cfg.ga.rate_ori = *a.rate;
  cfg.ga.check();
  Models models;
  if (!a.no_gpt) models = load_models(s, a.gpt, a.fcn, cfg.ga.temperature);
  if (cfg.evaluator.kind == "tabular" && !cfg.evaluator.table.empty()) s.input("table", cfg.evaluator.table);
  auto evaluator = make_evaluator(cfg.evaluator);
  SearchHooks hooks;
  hooks.on_generation = [](const GenerationLog& g) {
    std::ostringstream m;
    m << "generation " << g.generation << " rate " << g.rate << " best " << g.best << " mean " << g.mean
      << " evaluations " << g.evaluations;
    log_info(m.str());
  };
  const auto result = run_search(cfg.ga, models.guidance(), *evaluator, hooks);
  const fs::path dir = a.out;
  write_search_outputs(dir, result);
  for (const char* f : {kResultFile, kGenerationsFile, kBestArchFile}) s.output(f, dir / f);
  out << "best fitness " << result.best.score() << " after " << result.evaluations << " evaluations\n"
      << describe(result.best.arch) << '\n';
  s.finish(manifest_path_for("search", dir));
  return kExitOk;
}

struct EvalArgs {
  std::string arch, evaluator, mode;
};

int cmd_eval(Session& s, const EvalArgs& a, std::ostream& out) {
  auto& e = s.cfg().evaluator;
  if (!a.evaluator.empty()) e.kind = a.evaluator;
  if (!a.mode.empty()) e.mode = surrogate_mode_from_string(a.mode);
  const auto arch = read_architecture(a.arch);
  validate(arch, std::nullopt);
  auto evaluator = make_evaluator(e);
  const auto rec = evaluator->evaluate(arch);
  out << fitness_record_to_json(rec).dump() << '\n';
  return rec.error ? kExitData : kExitOk;
}

struct CorrelateArgs {
  std::string corpus, modes = "cheap,full", out;
  std::optional<std::size_t> limit;
};

std::vector<std::pair<std::string, std::string>> parse_mode_pairs(const std::string& spec) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ';')) {
    const auto comma = item.find(',');
    if (comma == std::string::npos) throw ConfigError("mode pair '" + item + "' must look like a,b");
    pairs.emplace_back(item.substr(0, comma), item.substr(comma + 1));
    surrogate_mode_from_string(pairs.back().first);
    surrogate_mode_from_string(pairs.back().second);
  }
  if (pairs.empty()) throw ConfigError("no mode pairs given");
  return pairs;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  out << text;
  if (path.empty()) return;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path);
  f << text;
}

int cmd_correlate(Session& s, const CorrelateArgs& a, std::ostream& out) {
  const auto records = read_corpora(s, {a.corpus}, "corpus");
  std::vector<Architecture> archs;
  for (const auto& r : records) {
    if (a.limit && archs.size() >= *a.limit) break;
    archs.push_back(r.arch);
  }
  const auto pairs = parse_mode_pairs(a.modes);
  const auto rows = correlation_report(surrogate_scorer(evaluator_teacher(s.cfg().evaluator), s.cfg().evaluator.noise),
                                       archs, pairs);
  std::ostringstream text;
  write_correlation_table(text, rows);
  emit(text.str(), a.out, out);
  if (!a.out.empty()) {
    s.output("table", a.out);
    s.finish(manifest_path_for("correlate", a.out));
  }
  return kExitOk;
}

struct AblateArgs {
  std::string gpt, fcn, out;
  int archs = 0;
  std::vector<double> rates;
};

int cmd_ablate_rates(Session& s, const AblateArgs& a, std::ostream& out) {
  const auto models = load_models(s, a.gpt, a.fcn, s.cfg().ga.temperature);
  RateAblationOptions opt;
  if (a.archs > 0) opt.n_archs = a.archs;
  if (!a.rates.empty()) opt.rates = a.rates;
  opt.seed = s.cfg().ga.seed;
  opt.ga = s.cfg().ga;
  const auto rows = run_ablation_elimination(models.guidance(), evaluator_teacher(s.cfg().evaluator), opt);
  std::ostringstream text;
  write_rate_table(text, rows);
  emit(text.str(), a.out, out);
  if (!a.out.empty()) {
    s.output("table", a.out);
    s.finish(manifest_path_for("ablate-rates", a.out));
  }
  return kExitOk;
}

int cmd_ablate_epochs(Session& s, const AblateArgs& a, std::ostream& out) {
  EpochAblationOptions opt;
  if (a.archs > 0) opt.n_archs = a.archs;
  opt.seed = s.cfg().ga.seed;
  opt.noise = s.cfg().evaluator.noise;
  opt.sampling = s.cfg().ga.sampling();
  const auto rows = run_ablation_epochs(evaluator_teacher(s.cfg().evaluator), opt);
  std::ostringstream text;
  write_correlation_table(text, rows);
  emit(text.str(), a.out, out);
  if (!a.out.empty()) {
    s.output("table", a.out);
    s.finish(manifest_path_for("ablate-epochs", a.out));
  }
  return kExitOk;
}

int cmd_report(const std::string& dir, std::ostream& out) {
  report(dir, out);
  return kExitOk;
}

int cmd_rerun(const std::string& manifest_path, const std::string& new_out, std::ostream& out,
              std::ostream& err) {
  const auto m = read_manifest(manifest_path);
  const fs::path cwd = m.cwd;
  if (!fs::is_directory(cwd)) throw DataError("manifest working directory " + m.cwd + " is gone");
  for (const auto& in : m.inputs) {
    const fs::path p = fs::path(in.path).is_absolute() ? fs::path(in.path) : cwd / in.path;
    if (!fs::exists(p)) throw DataError("input " + in.path + " is missing");
    if (file_digest(p) != in.digest) throw DataError("input " + in.path + " changed since the recorded run");
  }
  auto argv = m.argv;
  std::string out_value;
  for (std::size_t i = 0; i < argv.size(); ++i) {
    if (argv[i] == "--out" && i + 1 < argv.size()) {
      if (!new_out.empty()) argv[i + 1] = new_out;
      out_value = argv[i + 1];
    } else if (argv[i].rfind("--out=", 0) == 0) {
      if (!new_out.empty()) argv[i] = "--out=" + new_out;
      out_value = argv[i].substr(6);
    }
  }
  if (out_value.empty()) throw DataError("manifest command has no --out");

  const auto saved = fs::current_path();
  fs::current_path(cwd);
  int code;
  RunManifest again;
  try {
    code = run_cli(argv, out, err);
    if (code == kExitOk) again = read_manifest(manifest_path_for(m.command, out_value));
  } catch (...) {
    fs::current_path(saved);
    throw;
  }
  fs::current_path(saved);
  if (code != kExitOk) return code;

  bool identical = again.outputs.size() == m.outputs.size();
  for (const auto& before : m.outputs) {
    auto it = std::find_if(again.outputs.begin(), again.outputs.end(),
                           [&](const ArtifactRef& r) { return r.role == before.role; });
    const bool same = it != again.outputs.end() && it->digest == before.digest;
    identical = identical && same;
    out << (same ? "identical " : "DIFFERS   ") << before.role << ' ' << before.digest;
    if (it != again.outputs.end() && !same) out << " -> " << it->digest;
    out << '\n';
  }
  out << (identical ? "rerun is bitwise identical\n" : "rerun differs\n");
  return identical ? kExitOk : kExitInternal;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"archgen: evolutionary architecture search guided by a layer-token GPT", "archgen"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  Globals g;
  app.add_option("--config", g.config_path, "JSON config with sections ga, gpt, fcn, evaluator, corpus")
      ->envname("ARCHGEN_CONFIG");
  app.add_option("--seed", g.seed, "Master seed applied to every section")->envname("ARCHGEN_SEED");
  app.add_option("--threads", g.threads, "Worker threads for reconstruction and evaluation")
      ->envname("ARCHGEN_THREADS")
      ->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "error | warn | info | debug")
      ->envname("ARCHGEN_LOG_LEVEL")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));

  auto sub = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    s->fallthrough();
    return s;
  };

  CorpusArgs corpus_args;
  auto* build = sub("build-corpus", "Generate or ingest an architecture corpus");
  build->add_option("--source", corpus_args.source, "nasbench | finetune | teacher")
      ->check(CLI::IsMember({"nasbench", "finetune", "teacher"}));
  build->add_option("--in", corpus_args.in, "NAS-Bench interchange file (nasbench source)");
  build->add_option("--out", corpus_args.out, "Output corpus (JSON lines)")->required();
  build->add_option("--count", corpus_args.count, "Architectures to generate");
  build->add_option("--min-accuracy", corpus_args.min_accuracy, "nasbench accuracy filter");
  build->add_flag("--teacher-kinds", corpus_args.teacher_kinds, "Draw fine-tuning block kinds from the teacher");

  TrainArgs pre_args;
  auto* pretrain = sub("pretrain", "Pre-train the GPT on a corpus");
  pretrain->add_option("--corpus", pre_args.corpus, "Training corpus (repeatable)")->required();
  pretrain->add_option("--vocab-corpus", pre_args.vocab_corpus, "Extra corpora whose layers join the vocabulary");
  pretrain->add_option("--out", pre_args.out, "Output checkpoint")->required();
  pretrain->add_option("--epochs", pre_args.epochs);
  pretrain->add_option("--lr", pre_args.lr);
  pretrain->add_option("--batch", pre_args.batch);
  pretrain->add_option("--checkpoint-every", pre_args.checkpoint_every, "Also save <out>.e<epoch> every N epochs");

  TrainArgs fine_args;
  auto* finetune = sub("finetune", "Fine-tune a pre-trained GPT");
  finetune->add_option("--from", fine_args.from, "Pre-trained checkpoint")->required();
  finetune->add_option("--corpus", fine_args.corpus, "Fine-tuning corpus (repeatable)")->required();
  finetune->add_option("--out", fine_args.out, "Output checkpoint")->required();
  finetune->add_option("--epochs", fine_args.epochs);
  finetune->add_option("--lr", fine_args.lr);
  finetune->add_option("--batch", fine_args.batch);
  finetune->add_flag("--freeze-embeddings", fine_args.freeze_embeddings, "Keep token and position embeddings fixed");
  finetune->add_option("--checkpoint-every", fine_args.checkpoint_every);

  FcnArgs fcn_args;
  auto* train_fcn = sub("train-fcn", "Train the block selector");
  train_fcn->add_option("--corpus", fcn_args.corpus, "Block corpus (repeatable)")->required();
  train_fcn->add_option("--gpt", fcn_args.gpt, "GPT checkpoint providing the vocabulary")->required();
  train_fcn->add_option("--out", fcn_args.out, "Output checkpoint")->required();
  train_fcn->add_option("--epochs", fcn_args.epochs);
  train_fcn->add_option("--lr", fcn_args.lr);

  ReconArgs recon_args;
  auto* recon = sub("reconstruct", "Eliminate and refill blocks of one architecture");
  recon->add_option("--arch", recon_args.arch)->required();
  recon->add_option("--gpt", recon_args.gpt)->required();
  recon->add_option("--fcn", recon_args.fcn)->required();
  recon->add_option("--rate", recon_args.rate, "Elimination rate");
  recon->add_option("--temperature", recon_args.temperature);
  recon->add_option("--out", recon_args.out)->required();
  recon->add_option("--trace", recon_args.trace);

  SearchArgs search_args;
  auto* search = sub("search", "Run the evolutionary search");
  search->add_option("--gpt", search_args.gpt);
  search->add_option("--fcn", search_args.fcn);
  search->add_flag("--no-gpt", search_args.no_gpt, "Plain GA without reconstruction");
  search->add_option("--evaluator", search_args.evaluator)->check(CLI::IsMember({"surrogate", "tabular", "external"}));
  search->add_option("--population", search_args.population);
  search->add_option("--generations", search_args.generations);
  search->add_option("--rate", search_args.rate, "Initial elimination rate");
  search->add_option("--out", search_args.out, "Run directory")->required();

  EvalArgs eval_args;
  auto* eval = sub("eval", "Score one architecture");
  eval->add_option("--arch", eval_args.arch)->required();
  eval->add_option("--evaluator", eval_args.evaluator)->check(CLI::IsMember({"surrogate", "tabular", "external"}));
  eval->add_option("--mode", eval_args.mode)->check(CLI::IsMember({"cheap", "full"}));

  CorrelateArgs corr_args;
  auto* correlate = sub("correlate", "Correlate surrogate modes over a corpus");
  correlate->add_option("--corpus", corr_args.corpus)->required();
  correlate->add_option("--modes", corr_args.modes, "Pairs like cheap,full (';' separates pairs)");
  correlate->add_option("--limit", corr_args.limit, "Use at most N architectures");
  correlate->add_option("--out", corr_args.out);

  AblateArgs rate_args;
  auto* ablate_rates = sub("ablate-rates", "Mean fitness per elimination rate");
  ablate_rates->add_option("--gpt", rate_args.gpt)->required();
  ablate_rates->add_option("--fcn", rate_args.fcn)->required();
  ablate_rates->add_option("--archs", rate_args.archs, "Initial architectures (default 15)");
  ablate_rates->add_option("--rates", rate_args.rates, "Rates (default 0 0.2 0.4 0.6 0.8)");
  ablate_rates->add_option("--out", rate_args.out);

  AblateArgs epoch_args;
  auto* ablate_epochs = sub("ablate-epochs", "Cheap-versus-full surrogate correlation");
  ablate_epochs->add_option("--archs", epoch_args.archs, "Architectures (default 60)");
  ablate_epochs->add_option("--out", epoch_args.out);

  std::string report_dir;
  auto* report_cmd = sub("report", "Summarize a search run directory");
  report_cmd->add_option("run_dir", report_dir)->required();

  std::string manifest_path, rerun_out;
  auto* rerun = sub("rerun", "Re-execute a command from its manifest and compare outputs");
  rerun->add_option("manifest", manifest_path)->required();
  rerun->add_option("--out", rerun_out, "Write outputs here instead of the recorded location");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    set_log_level(log_level_from_string(g.log_level));
    set_log_sink(&err);
    auto session = [&](const char* name) { return Session(g, args, name); };
    if (build->parsed()) { auto s = session("build-corpus"); return cmd_build_corpus(s, corpus_args, out); }
    if (pretrain->parsed()) { auto s = session("pretrain"); return cmd_pretrain(s, pre_args, out); }
    if (finetune->parsed()) { auto s = session("finetune"); return cmd_finetune(s, fine_args, out); }
    if (train_fcn->parsed()) { auto s = session("train-fcn"); return cmd_train_fcn(s, fcn_args, out); }
    if (recon->parsed()) { auto s = session("reconstruct"); return cmd_reconstruct(s, recon_args, out); }
    if (search->parsed()) { auto s = session("search"); return cmd_search(s, search_args, out); }
    if (eval->parsed()) { auto s = session("eval"); return cmd_eval(s, eval_args, out); }
    if (correlate->parsed()) { auto s = session("correlate"); return cmd_correlate(s, corr_args, out); }
    if (ablate_rates->parsed()) { auto s = session("ablate-rates"); return cmd_ablate_rates(s, rate_args, out); }
    if (ablate_epochs->parsed()) { auto s = session("ablate-epochs"); return cmd_ablate_epochs(s, epoch_args, out); }
    if (!g.config_path.empty()) load_config(g.config_path);  // validate even when unused
    if (report_cmd->parsed()) return cmd_report(report_dir, out);
    if (rerun->parsed()) return cmd_rerun(manifest_path, rerun_out, out, err);
    err << "no command given\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ProtocolError& e) {
    err << "protocol error: " << e.what() << '\n';
    return kExitData;
  } catch (const EvalError& e) {
    err << "evaluation error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace archgen
