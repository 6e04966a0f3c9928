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

#include "archgen/fcn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "archgen/errors.hpp"

namespace archgen {

void FcnConfig::check() const {
  if (context_len < 1) throw ConfigError("fcn.context_len must be >= 1");
  if (vocab_size < 1) throw ConfigError("fcn.vocab_size must be >= 1");
  if (hidden.empty()) throw ConfigError("fcn.hidden needs at least one layer");
  for (int h : hidden)
    if (h < 1) throw ConfigError("fcn.hidden widths must be >= 1");
  if (num_classes != kLibrarySize)
    throw ConfigError("fcn.num_classes must equal the library size " +
                      std::to_string(kLibrarySize));
  if (!(lr >= 0.0)) throw ConfigError("fcn.lr must be >= 0");
  if (epochs < 0) throw ConfigError("fcn.epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("fcn.batch_size must be >= 1");
}

Json fcn_config_to_json(const FcnConfig& c) {
  return Json{{"context_len", c.context_len}, {"vocab_size", c.vocab_size},
              {"hidden", c.hidden},           {"num_classes", c.num_classes},
              {"lr", c.lr},                   {"epochs", c.epochs},
              {"batch_size", c.batch_size},   {"seed", c.seed}};
}

FcnConfig fcn_config_from_json(const Json& j, FcnConfig c) {
  if (!j.is_object()) throw ConfigError("fcn config must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "context_len") c.context_len = value.get<int>();
      else if (key == "vocab_size") c.vocab_size = value.get<int>();
      else if (key == "hidden") c.hidden = value.get<std::vector<int>>();
      else if (key == "num_classes") c.num_classes = value.get<int>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw ConfigError("unknown fcn config key '" + key + "'");
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("fcn config: ") + e.what());
  }
  return c;
}

std::vector<FcnExample> make_fcn_examples(const std::vector<CorpusRecord>& records,
                                          const Vocabulary& vocab, int k) {
  std::vector<FcnExample> out;
  for (const auto& r : records) {
    const auto seq = encode_architecture(r.arch, vocab);
    std::size_t block = 0;
    for (std::size_t t = 0; t < seq.tokens.size(); ++t) {
      while (block + 1 < seq.boundaries.size() && seq.boundaries[block + 1] <= t) ++block;
      out.push_back({context_window(seq.tokens, t, k), seq.tokens[t], r.arch.blocks[block].kind});
    }
  }
  return out;
}

template <typename Scalar>
FcnModel<Scalar>::FcnModel(const FcnConfig& config) : config_(config) {
  config_.check();
  Eigen::Index offset = 0;
  auto add = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    slots_.push_back({name, offset, rows, cols});
    offset += rows * cols;
    return static_cast<int>(slots_.size()) - 1;
  };
  Eigen::Index fan_in = static_cast<Eigen::Index>(config_.context_len + 1) * config_.vocab_size;
  for (std::size_t i = 0; i <= config_.hidden.size(); ++i) {
    const Eigen::Index out =
        i < config_.hidden.size() ? config_.hidden[i] : config_.num_classes;
    weights_.push_back(add("w" + std::to_string(i), fan_in, out));
    biases_.push_back(add("b" + std::to_string(i), 1, out));
    fan_in = out;
  }
  params_ = Vector::Zero(offset);

  Rng rng(config_.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < config_.hidden.size(); ++i) {
    // A one-hot input activates k + 1 rows of the first table.
    const double active = i == 0 ? config_.context_len + 1.0
                                 : static_cast<double>(config_.hidden[i - 1]);
    const double stddev = std::sqrt(2.0 / active);
    auto w = view(weights_[i]);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = static_cast<Scalar>(stddev * normal(rng));
  }
}

namespace {

template <typename S>
using FMat = typename FcnModel<S>::Matrix;

template <typename S>
struct FcnPass {
  std::vector<FMat<S>> pre;  // pre-activations of every dense layer
  std::vector<FMat<S>> act;  // rectified hidden activations
};

std::vector<TokenId> fit_context(std::span<const TokenId> context, int k) {
  std::vector<TokenId> out(static_cast<std::size_t>(k), Vocabulary::kPad);
  const std::size_t take = std::min(out.size(), context.size());
  std::copy(context.end() - static_cast<std::ptrdiff_t>(take), context.end(),
            out.end() - static_cast<std::ptrdiff_t>(take));
  return out;
}

// Row indices into the input table for one example.
template <typename S>
void input_rows(const FcnModel<S>& m, std::span<const TokenId> context, TokenId predicted,
                std::vector<Eigen::Index>& rows) {
  const int k = m.config().context_len, V = m.config().vocab_size;
  auto check = [&](TokenId t) {
    if (t < 0 || t >= V)
      throw VocabError("token id " + std::to_string(t) + " outside vocabulary of size " +
                       std::to_string(V));
  };
  rows.clear();
  const auto ctx = fit_context(context, k);
  for (int p = 0; p < k; ++p) {
    check(ctx[static_cast<std::size_t>(p)]);
    rows.push_back(static_cast<Eigen::Index>(p) * V + ctx[static_cast<std::size_t>(p)]);
  }
  check(predicted);
  rows.push_back(static_cast<Eigen::Index>(k) * V + predicted);
}

template <typename S>
void fcn_forward(const FcnModel<S>& m, const std::vector<std::vector<Eigen::Index>>& inputs,
                 FcnPass<S>& pass) {
  const int L = m.num_dense();
  const auto B = static_cast<Eigen::Index>(inputs.size());
  pass.pre.resize(static_cast<std::size_t>(L));
  pass.act.resize(static_cast<std::size_t>(L - 1));
  auto table = m.view(m.weight(0));
  auto& z0 = pass.pre[0];
  z0.resize(B, table.cols());
  for (Eigen::Index b = 0; b < B; ++b) {
    z0.row(b) = m.view(m.bias(0)).row(0);
    for (Eigen::Index r : inputs[static_cast<std::size_t>(b)]) z0.row(b) += table.row(r);
  }
  for (int l = 1; l < L; ++l) {
    pass.act[static_cast<std::size_t>(l - 1)] = pass.pre[static_cast<std::size_t>(l - 1)].cwiseMax(S(0));
    auto& z = pass.pre[static_cast<std::size_t>(l)];
    z.noalias() = pass.act[static_cast<std::size_t>(l - 1)] * m.view(m.weight(l));
    z.rowwise() += m.view(m.bias(l)).row(0);
  }
}

template <typename S>
std::vector<std::vector<Eigen::Index>> batch_inputs(const FcnModel<S>& m,
                                                    std::span<const FcnExample> batch) {
  std::vector<std::vector<Eigen::Index>> inputs(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!in_library(batch[i].label))
      throw LabelError(std::string("label '") + to_string(batch[i].label) +
                       "' is not a library block kind");
    input_rows(m, batch[i].context, batch[i].predicted, inputs[i]);
  }
  return inputs;
}

}  // namespace

template <typename Scalar>
Eigen::VectorXd fcn_logits(const FcnModel<Scalar>& model, std::span<const TokenId> context,
                           TokenId predicted) {
  std::vector<std::vector<Eigen::Index>> inputs(1);
  input_rows(model, context, predicted, inputs[0]);
  FcnPass<Scalar> pass;
  fcn_forward(model, inputs, pass);
  return pass.pre.back().row(0).transpose().template cast<double>();
}

template <typename Scalar>
Eigen::VectorXd fcn_probabilities(const FcnModel<Scalar>& model,
                                  std::span<const TokenId> context, TokenId predicted) {
  Eigen::VectorXd z = fcn_logits(model, context, predicted);
  z.array() -= z.maxCoeff();
  z = z.array().exp().matrix();
  return z / z.sum();
}

template <typename Scalar>
BlockKind fcn_select(const FcnModel<Scalar>& model, std::span<const TokenId> context,
                     TokenId predicted) {
  const Eigen::VectorXd z = fcn_logits(model, context, predicted);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < z.size(); ++i)
    if (z(i) > z(best)) best = i;
  return kind_from_index(static_cast<int>(best));
}

template <typename Scalar>
double fcn_loss_and_gradient(const FcnModel<Scalar>& model, std::span<const FcnExample> batch,
                             typename FcnModel<Scalar>::Vector* gradient) {
  using S = Scalar;
  if (batch.empty()) throw DataError("empty batch");
  const auto inputs = batch_inputs(model, batch);
  FcnPass<S> pass;
  fcn_forward(model, inputs, pass);
  const auto& logits = pass.pre.back();
  const auto B = logits.rows();
  FMat<S> dz(B, logits.cols());
  double total = 0.0;
  for (Eigen::Index b = 0; b < B; ++b) {
    const double mx = static_cast<double>(logits.row(b).maxCoeff());
    const Eigen::RowVectorXd shifted = logits.row(b).template cast<double>().array() - mx;
    const double lse = std::log(shifted.array().exp().sum());
    const int y = kind_index(batch[static_cast<std::size_t>(b)].label);
    total += lse - shifted(y);
    dz.row(b) = (shifted.array() - lse).exp().matrix().template cast<S>();
    dz(b, y) -= S(1);
  }
  dz /= static_cast<S>(B);
  if (gradient) {
    auto& g = *gradient;
    g = FcnModel<S>::Vector::Zero(model.parameters().size());
    for (int l = model.num_dense() - 1; l >= 1; --l) {
      const auto& a = pass.act[static_cast<std::size_t>(l - 1)];
      model.view(g, model.weight(l)).noalias() += a.transpose() * dz;
      model.view(g, model.bias(l)).row(0) += dz.colwise().sum();
      FMat<S> da = dz * model.view(model.weight(l)).transpose();
      dz = (pass.pre[static_cast<std::size_t>(l - 1)].array() > S(0)).select(da, S(0));
    }
    auto table = model.view(g, model.weight(0));
    for (Eigen::Index b = 0; b < B; ++b)
      for (Eigen::Index r : inputs[static_cast<std::size_t>(b)]) table.row(r) += dz.row(b);
    model.view(g, model.bias(0)).row(0) += dz.colwise().sum();
  }
  return total / static_cast<double>(B);
}

template <typename Scalar>
FcnModel<Scalar> fcn_train(std::span<const FcnExample> examples, const FcnConfig& cfg,
                           TrainReport* report) {
  using V = typename FcnModel<Scalar>::Vector;
  const auto start = std::chrono::steady_clock::now();
  FcnModel<Scalar> model(cfg);
  for (const auto& e : examples)
    if (!in_library(e.label))
      throw LabelError(std::string("label '") + to_string(e.label) +
                       "' is not a library block kind");
  TrainReport local;
  TrainReport& rep = report ? *report : local;
  rep = TrainReport{};
  rep.phase = TrainPhase::kSelector;
  if (cfg.epochs > 0 && examples.empty()) throw DataError("no selector training examples");

  V m1 = V::Zero(model.parameters().size()), m2 = m1, grad;
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(cfg.seed, 0x46434e));
  const Scalar lr = static_cast<Scalar>(cfg.lr), b1 = Scalar(0.9), b2 = Scalar(0.999),
               eps = Scalar(1e-8);
  std::uint64_t step = 0;
  std::vector<FcnExample> batch;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(examples[order[i]]);
      const double l = fcn_loss_and_gradient(model, std::span<const FcnExample>(batch), &grad);
      if (!std::isfinite(l) || !grad.allFinite())
        throw TrainingDiverged("selector loss became non-finite at epoch " + std::to_string(epoch));
      loss_sum += l * static_cast<double>(end - begin);
      ++step;
      m1 = b1 * m1 + (Scalar(1) - b1) * grad;
      m2 = b2 * m2 + (Scalar(1) - b2) * grad.cwiseAbs2();
      const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(0.9, static_cast<double>(step)));
      const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(0.999, static_cast<double>(step)));
      model.parameters().array() -= lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
    }
    rep.epoch_loss.push_back(loss_sum / static_cast<double>(examples.size()));
    rep.epoch_accuracy.push_back(fcn_accuracy(model, examples));
  }
  rep.checkpoint_id = parameter_digest<Scalar>(model.parameters());
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return model;
}

template <typename Scalar>
double fcn_accuracy(const FcnModel<Scalar>& model, std::span<const FcnExample> examples) {
  if (examples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& e : examples)
    if (fcn_select(model, e.context, e.predicted) == e.label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

#define ARCHGEN_INSTANTIATE_FCN(S)                                                           \
  template class FcnModel<S>;                                                               \
  template Eigen::VectorXd fcn_logits(const FcnModel<S>&, std::span<const TokenId>, TokenId); \
  template Eigen::VectorXd fcn_probabilities(const FcnModel<S>&, std::span<const TokenId>,  \
                                             TokenId);                                      \
  template BlockKind fcn_select(const FcnModel<S>&, std::span<const TokenId>, TokenId);     \
  template double fcn_loss_and_gradient(const FcnModel<S>&, std::span<const FcnExample>,    \
                                        FcnModel<S>::Vector*);                              \
  template FcnModel<S> fcn_train(std::span<const FcnExample>, const FcnConfig&, TrainReport*); \
  template double fcn_accuracy(const FcnModel<S>&, std::span<const FcnExample>);

ARCHGEN_INSTANTIATE_FCN(float)
ARCHGEN_INSTANTIATE_FCN(double)

}  // namespace archgen
