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

#include "archgen/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "archgen/errors.hpp"
#include "archgen/hash.hpp"

namespace archgen {
namespace {

constexpr char kMagic[8] = {'A', 'R', 'C', 'H', 'G', 'E', 'N', '\0'};

template <typename S>
const char* scalar_name() {
  return sizeof(S) == sizeof(float) ? "float32" : "float64";
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw DataError("truncated checkpoint " + path.string());
  return v;
}

Json slots_json(const std::vector<TensorSlot>& slots) {
  Json out = Json::array();
  for (const auto& s : slots)
    out.push_back({{"name", s.name}, {"offset", s.offset}, {"rows", s.rows}, {"cols", s.cols}});
  return out;
}

template <typename S>
void write_container(const std::filesystem::path& path, Json header,
                     const Eigen::Matrix<S, Eigen::Dynamic, 1>& params) {
  header["scalar"] = scalar_name<S>();
  header["param_count"] = params.size();
  header["digest"] = parameter_digest<S>(params);
  const std::string text = header.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(params.size() * static_cast<Eigen::Index>(sizeof(S))));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

struct Container {
  Json header;
  Eigen::VectorXd params;
};

Container read_container(const std::filesystem::path& path, bool with_params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError(path.string() + " is not an archgen checkpoint");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto length = get<std::uint64_t>(in, path);
  if (length > (std::uint64_t{1} << 32)) throw DataError("corrupt checkpoint header length");
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length)))
    throw DataError("truncated checkpoint " + path.string());
  Container c;
  try {
    c.header = Json::parse(text);
  } catch (const Json::exception& e) {
    throw DataError("corrupt checkpoint header: " + std::string(e.what()));
  }
  if (!with_params) return c;
  const auto n = c.header.at("param_count").get<Eigen::Index>();
  const std::string scalar = c.header.at("scalar").get<std::string>();
  c.params.resize(n);
  if (scalar == "float32") {
    Eigen::VectorXf tmp(n);
    if (!in.read(reinterpret_cast<char*>(tmp.data()), static_cast<std::streamsize>(n * 4)))
      throw DataError("truncated checkpoint parameters in " + path.string());
    const auto digest = hex64(fnv1a(std::string_view(reinterpret_cast<const char*>(tmp.data()),
                                                     static_cast<std::size_t>(n) * 4)));
    if (digest != c.header.at("digest").get<std::string>())
      throw DataError("checkpoint digest mismatch in " + path.string());
    c.params = tmp.cast<double>();
  } else if (scalar == "float64") {
    if (!in.read(reinterpret_cast<char*>(c.params.data()), static_cast<std::streamsize>(n * 8)))
      throw DataError("truncated checkpoint parameters in " + path.string());
    const auto digest = hex64(fnv1a(std::string_view(reinterpret_cast<const char*>(c.params.data()),
                                                     static_cast<std::size_t>(n) * 8)));
    if (digest != c.header.at("digest").get<std::string>())
      throw DataError("checkpoint digest mismatch in " + path.string());
  } else {
    throw DataError("unknown checkpoint scalar '" + scalar + "'");
  }
  return c;
}

void expect_type(const Json& header, const char* type, const std::filesystem::path& path) {
  if (header.value("type", std::string()) != type)
    throw DataError(path.string() + " is not a " + type + " checkpoint");
}

}  // namespace

Json vocabulary_to_json(const Vocabulary& vocab) {
  Json layers = Json::array();
  for (TokenId t = Vocabulary::kNumSpecial; t < vocab.size(); ++t) layers.push_back(vocab.prototype(t));
  return Json{{"mode", to_string(vocab.mode())}, {"hash", hex64(vocab.hash())}, {"layers", layers}};
}

Vocabulary vocabulary_from_json(const Json& j) {
  try {
    Vocabulary vocab(canonicalization_from_string(j.at("mode").get<std::string>()));
    for (const auto& layer : j.at("layers")) vocab.add(layer.get<LayerDescriptor>());
    vocab.freeze();
    if (j.contains("hash") && j.at("hash").get<std::string>() != hex64(vocab.hash()))
      throw DataError("vocabulary hash mismatch");
    return vocab;
  } catch (const Json::exception& e) {
    throw DataError(std::string("corrupt vocabulary: ") + e.what());
  }
}

template <typename Scalar>
void save_gpt(const std::filesystem::path& path, const GptModel<Scalar>& model,
              const Vocabulary& vocab) {
  if (model.config().vocab_size != vocab.size())
    throw ConfigError("model vocabulary size differs from the vocabulary");
  Json header{{"type", "gpt"},
              {"config", gpt_config_to_json(model.config())},
              {"vocab_hash", hex64(vocab.hash())},
              {"vocab", vocabulary_to_json(vocab)},
              {"tensors", slots_json(model.slots())}};
  write_container<Scalar>(path, header, model.parameters());
}

template <typename Scalar>
GptCheckpoint<Scalar> load_gpt(const std::filesystem::path& path) {
  auto c = read_container(path, true);
  expect_type(c.header, "gpt", path);
  try {
    GptCheckpoint<Scalar> out{GptModel<Scalar>(gpt_config_from_json(c.header.at("config"))),
                              vocabulary_from_json(c.header.at("vocab"))};
    if (out.model.parameters().size() != c.params.size())
      throw DataError("checkpoint parameter count does not match its config");
    out.model.parameters() = c.params.template cast<Scalar>();
    return out;
  } catch (const ConfigError& e) {
    throw DataError(std::string("corrupt checkpoint config: ") + e.what());
  } catch (const Json::exception& e) {
    throw DataError(std::string("corrupt checkpoint header: ") + e.what());
  }
}

template <typename Scalar>
void save_fcn(const std::filesystem::path& path, const FcnModel<Scalar>& model,
              const Vocabulary& vocab) {
  if (model.config().vocab_size != vocab.size())
    throw ConfigError("selector vocabulary size differs from the vocabulary");
  Json header{{"type", "fcn"},
              {"config", fcn_config_to_json(model.config())},
              {"vocab_hash", hex64(vocab.hash())},
              {"vocab", vocabulary_to_json(vocab)},
              {"tensors", slots_json(model.slots())}};
  write_container<Scalar>(path, header, model.parameters());
}

template <typename Scalar>
FcnCheckpoint<Scalar> load_fcn(const std::filesystem::path& path) {
  auto c = read_container(path, true);
  expect_type(c.header, "fcn", path);
  try {
    FcnCheckpoint<Scalar> out{FcnModel<Scalar>(fcn_config_from_json(c.header.at("config"))),
                              vocabulary_from_json(c.header.at("vocab"))};
    if (out.model.parameters().size() != c.params.size())
      throw DataError("checkpoint parameter count does not match its config");
    out.model.parameters() = c.params.template cast<Scalar>();
    return out;
  } catch (const ConfigError& e) {
    throw DataError(std::string("corrupt checkpoint config: ") + e.what());
  } catch (const Json::exception& e) {
    throw DataError(std::string("corrupt checkpoint header: ") + e.what());
  }
}

Json read_checkpoint_header(const std::filesystem::path& path) {
  return read_container(path, false).header;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return hex64(fnv1a(ss.str()));
}

template void save_gpt(const std::filesystem::path&, const GptModel<float>&, const Vocabulary&);
template void save_gpt(const std::filesystem::path&, const GptModel<double>&, const Vocabulary&);
template GptCheckpoint<float> load_gpt(const std::filesystem::path&);
template GptCheckpoint<double> load_gpt(const std::filesystem::path&);
template void save_fcn(const std::filesystem::path&, const FcnModel<float>&, const Vocabulary&);
template void save_fcn(const std::filesystem::path&, const FcnModel<double>&, const Vocabulary&);
template FcnCheckpoint<float> load_fcn(const std::filesystem::path&);
template FcnCheckpoint<double> load_fcn(const std::filesystem::path&);

}  // namespace archgen
