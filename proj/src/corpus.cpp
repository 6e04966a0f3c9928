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

#include "archgen/corpus.hpp"

#include <fstream>
#include <set>

#include "archgen/errors.hpp"

namespace archgen {

namespace {

constexpr int kNasbenchMaxVertices = 7;
constexpr int kNasbenchMaxEdges = 9;
constexpr int kNasbenchStemChannels = 128;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

Block cell_block(std::vector<LayerDescriptor> layers) {
  Block b;
  b.kind = BlockKind::kCell;
  b.layers = std::move(layers);
  b.width = b.out_size().c;
  return b;
}

}  // namespace

const char* to_string(CorpusSource s) {
  switch (s) {
    case CorpusSource::kNasbench: return "nasbench";
    case CorpusSource::kFinetuneLibrary: return "finetune_library";
    case CorpusSource::kSynthetic: return "synthetic";
  }
  return "?";
}

CorpusSource corpus_source_from_string(const std::string& s) {
  if (s == "nasbench") return CorpusSource::kNasbench;
  if (s == "finetune_library") return CorpusSource::kFinetuneLibrary;
  if (s == "synthetic") return CorpusSource::kSynthetic;
  throw EncodingError("unknown corpus source '" + s + "'");
}

Architecture sample_architecture(Rng& rng, const ArchSampling& sampling,
                                 const MarkovTeacher* kind_sampler) {
  if (sampling.width_choices.empty()) throw ConfigError("width_choices must not be empty");
  const auto span = static_cast<std::size_t>(sampling.depth.max - sampling.depth.min + 1);
  const std::size_t depth = static_cast<std::size_t>(sampling.depth.min) + uniform_index(rng, span);
  std::vector<BlockKind> kinds;
  if (kind_sampler) {
    kinds = kind_sampler->sample_kinds(depth, rng);
  } else {
    for (std::size_t i = 0; i < depth; ++i) {
      kinds.push_back(kind_from_index(static_cast<int>(uniform_index(rng, kLibrarySize))));
    }
  }
  std::vector<BlockSpec> specs;
  specs.reserve(depth);
  for (auto k : kinds) {
    specs.push_back({k, sampling.width_choices[uniform_index(rng, sampling.width_choices.size())]});
  }
  return assemble(specs, sampling.input_shape, sampling.num_classes);
}

std::vector<LayerDescriptor> flatten_cell(const std::vector<std::vector<int>>& adjacency,
                                          const std::vector<std::string>& ops, Shape3 in,
                                          int channels) {
  const std::size_t n = ops.size();
  std::vector<int> indegree(n, 0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      if (adjacency[r][c]) ++indegree[c];
    }
  }
  // Kahn's algorithm, always releasing the lowest ready vertex.
  std::set<std::size_t> ready;
  for (std::size_t v = 0; v < n; ++v) {
    if (indegree[v] == 0) ready.insert(v);
  }
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const std::size_t v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    for (std::size_t c = 0; c < n; ++c) {
      if (adjacency[v][c] && --indegree[c] == 0) ready.insert(c);
    }
  }
  if (order.size() != n) throw GraphError("cell graph contains a cycle");

  std::vector<LayerDescriptor> layers;
  Shape3 shape = in;
  for (std::size_t v : order) {
    const std::string& op = ops[v];
    if (op == "input" || op == "output") continue;
    LayerDescriptor l;
    if (op == "conv3x3-bn-relu") {
      l = make_conv(shape, channels, {3, 3}, {1, 1}, uniform_padding(1));
    } else if (op == "conv1x1-bn-relu") {
      l = make_conv(shape, channels, {1, 1}, {1, 1}, uniform_padding(0));
    } else if (op == "maxpool3x3") {
      l = make_other("maxpool_same", shape, {3.0});
    } else {
      throw EncodingError("unknown cell op '" + op + "'");
    }
    shape = l.out_size;
    layers.push_back(std::move(l));
  }
  return layers;
}

std::vector<CorpusRecord> load_nasbench(const std::filesystem::path& path, double min_accuracy,
                                        NasbenchStats* stats) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<CorpusRecord> out;
  NasbenchStats local;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<int> flat;
    std::vector<std::string> ops;
    double accuracy = 0.0;
    try {
      const Json j = Json::parse(line);
      flat = j.at("adjacency").get<std::vector<int>>();
      ops = j.at("ops").get<std::vector<std::string>>();
      accuracy = j.at("val_accuracy").get<double>();
    } catch (const Json::exception& e) {
      throw ParseError(e.what(), lineno);
    }
    const std::size_t n = ops.size();
    if (n < 2 || n > kNasbenchMaxVertices) throw ParseError("vertex count out of range", lineno);
    if (flat.size() != n * n) throw ParseError("adjacency size does not match ops", lineno);
    if (ops.front() != "input" || ops.back() != "output") {
      throw ParseError("first op must be input and last op output", lineno);
    }
    if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw ParseError("accuracy outside [0, 1]", lineno);
    std::vector<std::vector<int>> adj(n, std::vector<int>(n, 0));
    int edges = 0;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        const int v = flat[r * n + c];
        if (v != 0 && v != 1) throw ParseError("adjacency entries must be 0 or 1", lineno);
        adj[r][c] = v;
        edges += v;
      }
    }
    if (edges > kNasbenchMaxEdges) throw ParseError("more than 9 edges", lineno);
    ++local.total;
    if (accuracy < min_accuracy) continue;

    // Fixed macro skeleton: conv stem, three stacks of three cells with
    // channel doubling and 2x2 max-pool downsampling in between, then global
    // average pooling.
    const auto& lib = default_library();
    Architecture arch;
    arch.input_shape = {3, 32, 32};
    arch.num_classes = 10;
    Shape3 shape = arch.input_shape;
    arch.blocks.push_back(*lib.instantiate(BlockKind::kConvNormActivation, kNasbenchStemChannels, shape));
    shape = arch.blocks.back().out_size();
    for (int stack = 0; stack < 3; ++stack) {
      if (stack > 0) {
        arch.blocks.push_back(*lib.instantiate(BlockKind::kMaxpool, shape.c, shape));
        shape = arch.blocks.back().out_size();
      }
      const int channels = kNasbenchStemChannels << stack;
      for (int cell = 0; cell < 3; ++cell) {
        auto layers = flatten_cell(adj, ops, shape, channels);
        if (layers.empty()) continue;
        arch.blocks.push_back(cell_block(std::move(layers)));
        shape = arch.blocks.back().out_size();
      }
    }
    arch.blocks.push_back(
        cell_block({make_pool(PoolType::kAvg, shape, {shape.h, shape.w}, {shape.h, shape.w})}));
    finalize(arch);

    CorpusRecord rec;
    rec.id = "nb-" + std::to_string(lineno);
    rec.source = CorpusSource::kNasbench;
    rec.fitness = accuracy;
    rec.arch = std::move(arch);
    out.push_back(std::move(rec));
    ++local.retained;
  }
  if (stats) *stats = local;
  return out;
}

std::vector<CorpusRecord> build_finetune_corpus(const BlockLibrary& lib, std::size_t count,
                                                std::uint64_t seed, const ArchSampling& sampling,
                                                const MarkovTeacher* kind_sampler) {
  if (count < 1) throw ConfigError("fine-tune corpus needs count >= 1");
  if (lib.size() != static_cast<std::size_t>(kLibrarySize)) throw ConfigError("unexpected library size");
  Rng rng(seed);
  std::vector<CorpusRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    CorpusRecord rec;
    rec.id = "ft-" + std::to_string(i);
    rec.source = CorpusSource::kFinetuneLibrary;
    rec.arch = sample_architecture(rng, sampling, kind_sampler);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<CorpusRecord> generate_teacher_corpus(const MarkovTeacher& teacher, std::size_t n_archs,
                                                  std::uint64_t seed, const ArchSampling& sampling) {
  teacher.check();
  Rng rng(seed);
  std::vector<CorpusRecord> out;
  out.reserve(n_archs);
  for (std::size_t i = 0; i < n_archs; ++i) {
    CorpusRecord rec;
    rec.id = "tc-" + std::to_string(i);
    rec.source = CorpusSource::kSynthetic;
    rec.arch = sample_architecture(rng, sampling, &teacher);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<TokenId> context_window(std::span<const TokenId> tokens, std::size_t t, int k) {
  std::vector<TokenId> ctx(static_cast<std::size_t>(k), Vocabulary::kPad);
  for (int j = 0; j < k; ++j) {
    const auto back = static_cast<std::ptrdiff_t>(k - j);
    const auto src = static_cast<std::ptrdiff_t>(t) - back;
    if (src >= 0) ctx[static_cast<std::size_t>(j)] = tokens[static_cast<std::size_t>(src)];
  }
  return ctx;
}

std::vector<TrainingPair> make_training_pairs(const std::vector<CorpusRecord>& records,
                                              const Vocabulary& vocab, int k, int stride) {
  if (k < 1 || stride < 1) throw ConfigError("window size and stride must be positive");
  std::vector<TrainingPair> pairs;
  for (const auto& rec : records) {
    const auto seq = encode_architecture(rec.arch, vocab);
    for (std::size_t t = 0; t < seq.tokens.size(); t += static_cast<std::size_t>(stride)) {
      pairs.push_back({context_window(seq.tokens, t, k), seq.tokens[t]});
    }
  }
  return pairs;
}

Vocabulary build_vocabulary(const std::vector<CorpusRecord>& records, Canonicalization mode) {
  std::vector<const Architecture*> archs;
  archs.reserve(records.size());
  for (const auto& r : records) archs.push_back(&r.arch);
  return build_vocabulary(archs, mode);
}

Json record_to_json(const CorpusRecord& r) {
  Json j = architecture_to_json(r.arch);
  j["id"] = r.id;
  j["source"] = to_string(r.source);
  if (r.fitness) j["fitness"] = *r.fitness;
  return j;
}

CorpusRecord record_from_json(const Json& j) {
  CorpusRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.source = corpus_source_from_string(j.at("source").get<std::string>());
    if (j.contains("fitness") && !j["fitness"].is_null()) r.fitness = j["fitness"].get<double>();
  } catch (const Json::exception& e) {
    throw EncodingError(std::string("malformed corpus record: ") + e.what());
  }
  r.arch = architecture_from_json(j);
  return r;
}

void write_corpus(const std::filesystem::path& path, const std::vector<CorpusRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

std::vector<CorpusRecord> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<CorpusRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(record_from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw ParseError(e.what(), lineno);
    } catch (const DataError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return out;
}

}  // namespace archgen
