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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "archgen/errors.hpp"
#include "archgen/gpt.hpp"

namespace archgen {
namespace {

GptConfig tiny_config(int V = 5, int layers = 1, std::uint64_t seed = 7) {
  GptConfig c;
  c.n_layers = layers;
  c.n_heads = 2;
  c.context_len = 4;
  c.vocab_size = V;
  c.d_model = 8;
  c.d_ff = 16;
  c.dropout = 0.0;
  c.seed = seed;
  return c;
}

// Moves every parameter off its initial value so biases and gains matter.
void jitter(GptModeld& m, std::uint64_t seed) {
  Rng rng(seed);
  for (Eigen::Index i = 0; i < m.parameters().size(); ++i)
    m.parameters()(i) += 0.3 * (uniform01(rng) - 0.5);
}

using Table = std::vector<std::vector<double>>;

Table table_of(const GptModeld& m, const std::string& name) {
  auto v = m.view(m.slot_index(name));
  Table t(static_cast<std::size_t>(v.rows()), std::vector<double>(static_cast<std::size_t>(v.cols())));
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index j = 0; j < v.cols(); ++j) t[i][j] = v(i, j);
  return t;
}

std::vector<double> ln_ref(const std::vector<double>& x, const Table& g, const Table& b) {
  double mu = 0, var = 0;
  for (double v : x) mu += v;
  mu /= x.size();
  for (double v : x) var += (v - mu) * (v - mu);
  var /= x.size();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mu) / std::sqrt(var + 1e-5) * g[0][i] + b[0][i];
  return y;
}

std::vector<double> affine_ref(const std::vector<double>& x, const Table& w, const Table& b) {
  std::vector<double> y(b[0]);
  for (std::size_t j = 0; j < y.size(); ++j)
    for (std::size_t i = 0; i < x.size(); ++i) y[j] += x[i] * w[i][j];
  return y;
}

// Straight-line recomputation with scalar loops over named tensors.
Table oracle_logits(const GptModeld& m, const std::vector<TokenId>& ctx) {
  const auto& c = m.config();
  const std::size_t T = ctx.size(), d = c.d_model, H = c.n_heads, dh = d / H;
  auto E = table_of(m, "tok_emb"), P = table_of(m, "pos_emb");
  Table x(T, std::vector<double>(d));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < d; ++i) x[t][i] = (ctx[t] == 0 ? 0.0 : E[ctx[t]][i]) + P[t][i];
  for (int l = 0; l < c.n_layers; ++l) {
    const std::string p = "h" + std::to_string(l) + ".";
    Table qkv(T);
    for (std::size_t t = 0; t < T; ++t)
      qkv[t] = affine_ref(ln_ref(x[t], table_of(m, p + "ln1.g"), table_of(m, p + "ln1.b")),
                          table_of(m, p + "attn.w_qkv"), table_of(m, p + "attn.b_qkv"));
    Table att(T, std::vector<double>(d, 0.0));
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t t = 0; t < T; ++t) {
        std::vector<double> w(T, 0.0);
        double mx = -1e300, z = 0;
        bool any = false;
        for (std::size_t s = 0; s <= t; ++s) {
          if (ctx[s] == 0) continue;
          double dot = 0;
          for (std::size_t i = 0; i < dh; ++i) dot += qkv[t][h * dh + i] * qkv[s][d + h * dh + i];
          w[s] = dot / std::sqrt(static_cast<double>(dh));
          mx = any ? std::max(mx, w[s]) : w[s];
          any = true;
        }
        if (!any) continue;
        for (std::size_t s = 0; s <= t; ++s)
          if (ctx[s] != 0) z += (w[s] = std::exp(w[s] - mx));
        for (std::size_t s = 0; s <= t; ++s)
          if (ctx[s] != 0)
            for (std::size_t i = 0; i < dh; ++i) att[t][h * dh + i] += w[s] / z * qkv[s][2 * d + h * dh + i];
      }
    }
    for (std::size_t t = 0; t < T; ++t) {
      auto y = affine_ref(att[t], table_of(m, p + "attn.w_proj"), table_of(m, p + "attn.b_proj"));
      for (std::size_t i = 0; i < d; ++i) x[t][i] += y[i];
      auto hid = affine_ref(ln_ref(x[t], table_of(m, p + "ln2.g"), table_of(m, p + "ln2.b")),
                            table_of(m, p + "mlp.w_fc"), table_of(m, p + "mlp.b_fc"));
      for (double& v : hid) v = 0.5 * v * (1 + std::tanh(std::sqrt(2 / M_PI) * (v + 0.044715 * v * v * v)));
      auto z = affine_ref(hid, table_of(m, p + "mlp.w_out"), table_of(m, p + "mlp.b_out"));
      for (std::size_t i = 0; i < d; ++i) x[t][i] += z[i];
    }
  }
  Table out(T);
  for (std::size_t t = 0; t < T; ++t)
    out[t] = affine_ref(ln_ref(x[t], table_of(m, "lnf.g"), table_of(m, "lnf.b")), table_of(m, "lm.w"),
                        table_of(m, "lm.b"));
  return out;
}

double ce_oracle(const std::vector<double>& logits, int target) {
  double z = 0;
  for (double v : logits) z += std::exp(v);
  return std::log(z) - logits[static_cast<std::size_t>(target)];
}

TEST(GptForward, MatchesStraightLineOracle) {
  for (int layers : {1, 2}) {
    GptModeld m(tiny_config(5, layers));
    jitter(m, 11);
    for (std::vector<TokenId> ctx : {std::vector<TokenId>{4, 2, 3, 1}, {0, 0, 4, 3}, {1, 1, 1, 1}, {0, 0, 0, 0}}) {
      auto got = forward(m, std::span<const TokenId>(ctx));
      auto want = oracle_logits(m, ctx);
      for (std::size_t t = 0; t < ctx.size(); ++t)
        for (std::size_t v = 0; v < 5; ++v) EXPECT_NEAR(got(t, v), want[t][v], 1e-10);
    }
  }
}

TEST(GptForward, CausalPrefixUnchangedBitwise) {
  GptModeld m(tiny_config(7, 2));
  jitter(m, 3);
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TokenId> a(4), b;
    for (auto& t : a) t = static_cast<TokenId>(uniform_index(rng, 7));
    const std::size_t j = uniform_index(rng, 4);
    b = a;
    for (std::size_t i = j; i < 4; ++i) b[i] = static_cast<TokenId>(uniform_index(rng, 7));
    auto la = forward(m, std::span<const TokenId>(a));
    auto lb = forward(m, std::span<const TokenId>(b));
    for (std::size_t t = 0; t < j; ++t)
      for (int v = 0; v < 7; ++v) ASSERT_EQ(la(t, v), lb(t, v));
  }
}

TEST(GptForward, AllPadContextIsDeterministic) {
  GptModeld m(tiny_config());
  std::vector<TokenId> pad(4, 0);
  auto a = forward(m, std::span<const TokenId>(pad));
  auto b = forward(m, std::span<const TokenId>(pad));
  EXPECT_TRUE(a.row(3).isApprox(b.row(3), 0.0));
  EXPECT_TRUE(a.allFinite());
}

TEST(GptForward, RejectsOutOfRangeToken) {
  GptModeld m(tiny_config());
  std::vector<TokenId> ctx{0, 1, 2, 5};
  EXPECT_THROW(forward(m, std::span<const TokenId>(ctx)), VocabError);
  std::vector<TokenId> neg{0, 1, 2, -1};
  EXPECT_THROW(forward(m, std::span<const TokenId>(neg)), VocabError);
}

TEST(GptForward, SoftmaxSumsToOne) {
  GptModeld m(tiny_config(9, 2));
  jitter(m, 8);
  std::vector<TokenId> ctx{0, 5, 6, 7};
  auto p = next_token_distribution(m, std::span<const TokenId>(ctx));
  EXPECT_NEAR(p.sum(), 1.0, 1e-9);
}

TEST(GptLoss, UniformLogitsGiveLogV) {
  GptConfig c = tiny_config(168);
  GptModeld m(c);
  m.view(m.w_lm()).setZero();
  m.view(m.b_lm()).setZero();
  std::vector<TrainingPair> batch{{{0, 0, 4, 5}, 6}, {{4, 5, 6, 7}, 100}};
  EXPECT_NEAR(loss(m, batch), std::log(168.0), 1e-12);
  EXPECT_NEAR(loss(m, batch), 5.1240, 5e-5);
}

TEST(GptLoss, ConfidentTargetNearZero) {
  GptModeld m(tiny_config(6));
  m.view(m.w_lm()).setZero();
  m.view(m.b_lm()).setZero();
  m.view(m.b_lm())(0, 5) = 100.0;
  std::vector<TrainingPair> batch{{{0, 4, 4, 4}, 5}};
  EXPECT_LT(loss(m, batch), 1e-6);
}

TEST(GptLoss, MatchesHandRolledCrossEntropy) {
  GptModeld m(tiny_config(5, 1, 21));
  jitter(m, 4);
  Rng rng(9);
  std::vector<TrainingPair> batch;
  double want = 0;
  for (int i = 0; i < 16; ++i) {
    TrainingPair p;
    p.context.resize(4);
    for (auto& t : p.context) t = static_cast<TokenId>(uniform_index(rng, 5));
    p.target = static_cast<TokenId>(uniform_index(rng, 5));
    want += ce_oracle(oracle_logits(m, p.context).back(), p.target);
    batch.push_back(p);
  }
  EXPECT_NEAR(loss(m, batch), want / 16, 1e-10);
}

TEST(GptBackward, MatchesCentralFiniteDifferences) {
  GptModeld m(tiny_config(5, 1, 13));
  jitter(m, 17);
  std::vector<TrainingPair> batch{{{0, 4, 2, 3}, 4}, {{4, 4, 3, 2}, 1}, {{0, 0, 0, 3}, 2}, {{1, 2, 3, 4}, 3}};
  auto lg = backward(m, batch);
  const double h = 1e-4;
  for (const auto& slot : m.slots()) {
    double worst = 0;
    for (Eigen::Index i = slot.offset; i < slot.offset + slot.size(); ++i) {
      const double saved = m.parameters()(i);
      m.parameters()(i) = saved + h;
      const double up = loss(m, batch);
      m.parameters()(i) = saved - h;
      const double down = loss(m, batch);
      m.parameters()(i) = saved;
      const double fd = (up - down) / (2 * h);
      const double an = lg.gradient(i);
      worst = std::max(worst, std::abs(an - fd) / std::max(1e-6, std::abs(an) + std::abs(fd)));
    }
    EXPECT_LT(worst, 1e-4) << slot.name;
  }
}

TEST(GptBackward, PadEmbeddingRowHasZeroGradient) {
  GptModeld m(tiny_config(6, 2));
  jitter(m, 2);
  std::vector<TrainingPair> batch{{{0, 0, 4, 5}, 4}, {{0, 4, 5, 3}, 5}};
  auto lg = backward(m, batch);
  auto dE = m.view(lg.gradient, m.tok_emb());
  EXPECT_EQ(dE.row(0).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(dE.row(4).cwiseAbs().maxCoeff(), 0.0);
}

TEST(GptBackward, DropoutGradientMatchesFixedMask) {
  // With a fixed dropout stream the loss is a deterministic function of the
  // parameters, so finite differences still apply.
  GptConfig c = tiny_config(5, 1, 13);
  c.dropout = 0.3;
  GptModeld m(c);
  jitter(m, 5);
  std::vector<TrainingPair> batch{{{0, 4, 2, 3}, 4}, {{4, 4, 3, 2}, 1}};
  auto loss_at = [&] {
    Rng r(77);
    return backward(m, batch, &r).loss;
  };
  Rng r(77);
  auto lg = backward(m, batch, &r);
  const double h = 1e-5;
  for (Eigen::Index i = 0; i < m.parameters().size(); i += 7) {
    const double saved = m.parameters()(i);
    m.parameters()(i) = saved + h;
    const double up = loss_at();
    m.parameters()(i) = saved - h;
    const double down = loss_at();
    m.parameters()(i) = saved;
    const double fd = (up - down) / (2 * h);
    EXPECT_NEAR(lg.gradient(i), fd, 1e-6 + 1e-4 * std::abs(fd));
  }
}

std::vector<TrainingPair> cyclic_pairs(int V, int n) {
  std::vector<TrainingPair> pairs;
  for (int i = 0; i < n; ++i) {
    TrainingPair p;
    for (int j = 0; j < 4; ++j) p.context.push_back(4 + (i + j) % (V - 4));
    p.target = 4 + (i + 4) % (V - 4);
    pairs.push_back(p);
  }
  return pairs;
}

TEST(GptTrain, ZeroLearningRateLeavesParametersUnchanged) {
  GptConfig c = tiny_config(8);
  c.lr = 0.0;
  c.epochs = 3;
  c.batch_size = 4;
  GptModelf m(c);
  const auto before = m.parameters();
  auto pairs = cyclic_pairs(8, 20);
  auto report = train(m, pairs, c, TrainPhase::kPretrain);
  EXPECT_EQ(m.parameters(), before);
  ASSERT_EQ(report.epoch_loss.size(), 3u);
  EXPECT_NEAR(report.epoch_loss[1], report.epoch_loss[0], 1e-6 * report.epoch_loss[0]);
  EXPECT_NEAR(report.epoch_loss[2], report.epoch_loss[0], 1e-6 * report.epoch_loss[0]);
}

TEST(GptTrain, SameSeedIsBitwiseIdentical) {
  GptConfig c = tiny_config(8);
  c.dropout = 0.1;
  c.lr = 1e-2;
  c.epochs = 4;
  c.batch_size = 5;
  auto pairs = cyclic_pairs(8, 30);
  GptModelf a(c), b(c);
  auto ra = train(a, pairs, c, TrainPhase::kPretrain);
  auto rb = train(b, pairs, c, TrainPhase::kPretrain);
  EXPECT_EQ(ra.epoch_loss, rb.epoch_loss);
  EXPECT_EQ(ra.checkpoint_id, rb.checkpoint_id);
  EXPECT_EQ(a.parameters(), b.parameters());
}

TEST(GptTrain, LearnsDeterministicCycle) {
  GptConfig c = tiny_config(10, 2);
  c.lr = 1e-2;
  c.epochs = 60;
  c.batch_size = 8;
  auto pairs = cyclic_pairs(10, 60);
  GptModelf m(c);
  int epochs_seen = 0;
  TrainOptions<float> opts;
  opts.on_epoch = [&](int e, const GptModelf&, const TrainReport& r) {
    epochs_seen = e;
    EXPECT_EQ(r.epoch_loss.size(), static_cast<std::size_t>(e));
    EXPECT_GT(r.epoch_loss.back(), 0.0);
  };
  auto report = train(m, pairs, c, TrainPhase::kPretrain, opts);
  EXPECT_EQ(epochs_seen, 60);
  EXPECT_LT(report.epoch_loss.back(), report.epoch_loss.front() * 0.2);
  Rng rng(1);
  EXPECT_EQ(predict_next(m, std::span<const TokenId>(pairs[3].context), 0.0, rng), pairs[3].target);
}

TEST(GptTrain, NanLossRaisesTrainingDiverged) {
  GptConfig c = tiny_config(8);
  c.epochs = 1;
  GptModelf m(c);
  m.parameters()(3) = std::numeric_limits<float>::quiet_NaN();
  auto pairs = cyclic_pairs(8, 10);
  EXPECT_THROW(train(m, pairs, c, TrainPhase::kPretrain), TrainingDiverged);
}

TEST(GptTrain, FrozenEmbeddingsStayFixed) {
  GptConfig c = tiny_config(8);
  c.lr = 1e-2;
  c.epochs = 2;
  c.freeze_embeddings = true;
  GptModelf m(c);
  const auto emb = m.view(m.tok_emb()).eval();
  const auto before = m.parameters();
  train(m, cyclic_pairs(8, 12), c, TrainPhase::kFinetune);
  EXPECT_EQ(m.view(m.tok_emb()), emb);
  EXPECT_NE(m.parameters(), before);
}

TEST(GptPredict, ArgmaxIgnoresRngAndBreaksTiesLow) {
  GptModeld m(tiny_config(10));
  m.view(m.w_lm()).setZero();
  m.view(m.b_lm()).setZero();
  m.view(m.b_lm())(0, 7) = 3.0;
  std::vector<TokenId> ctx{4, 5};
  Rng r1(1), r2(999);
  EXPECT_EQ(predict_next(m, std::span<const TokenId>(ctx), 0.0, r1), 7);
  EXPECT_EQ(predict_next(m, std::span<const TokenId>(ctx), 0.0, r2), 7);
  m.view(m.b_lm())(0, 5) = 3.0;
  EXPECT_EQ(predict_next(m, std::span<const TokenId>(ctx), 0.0, r1), 5);
  // Specials are never predicted even when they dominate.
  m.view(m.b_lm())(0, 2) = 50.0;
  EXPECT_EQ(predict_next(m, std::span<const TokenId>(ctx), 0.0, r1), 5);
}

TEST(GptPredict, NegativeTemperatureThrows) {
  GptModeld m(tiny_config(6));
  Rng rng(0);
  std::vector<TokenId> ctx{4};
  EXPECT_THROW(predict_next(m, std::span<const TokenId>(ctx), -0.5, rng), ConfigError);
}

TEST(GptPredict, SamplingFrequenciesWithinThreeSigma) {
  GptModeld m(tiny_config(9, 1, 31));
  jitter(m, 31);
  m.view(m.b_lm())(0, 4) += 0.8;
  std::vector<TokenId> ctx{0, 4, 6, 5};
  auto logits = forward(m, std::span<const TokenId>(ctx));
  std::vector<double> prob;
  double z = 0;
  for (int t = 4; t < 9; ++t) z += std::exp(logits(3, t));
  for (int t = 4; t < 9; ++t) prob.push_back(std::exp(logits(3, t)) / z);
  const int n = 100000;
  std::vector<int> counts(5, 0);
  Rng rng(2024);
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(predict_next(m, std::span<const TokenId>(ctx), 1.0, rng) - 4)];
  for (std::size_t k = 0; k < 5; ++k) {
    const double sigma = std::sqrt(n * prob[k] * (1 - prob[k]));
    EXPECT_LE(std::abs(counts[k] - n * prob[k]), 3 * sigma) << "token " << k + 4;
  }
}

TEST(GptConfigTest, RejectsIndivisibleHeads) {
  GptConfig c = tiny_config();
  c.d_model = 9;
  EXPECT_THROW(c.check(), ConfigError);
  EXPECT_THROW(GptModeld{c}, ConfigError);
}

TEST(GptConfigTest, JsonRoundTrip) {
  GptConfig c = tiny_config();
  c.lr = 3e-4;
  auto back = gpt_config_from_json(gpt_config_to_json(c));
  EXPECT_EQ(gpt_config_to_json(back), gpt_config_to_json(c));
  EXPECT_THROW(gpt_config_from_json(Json{{"bogus", 1}}), ConfigError);
}

}  // namespace
}  // namespace archgen
