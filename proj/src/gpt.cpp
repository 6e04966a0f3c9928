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

#include "archgen/gpt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string_view>

#include "archgen/errors.hpp"
#include "archgen/hash.hpp"

namespace archgen {

void GptConfig::check() const {
  if (n_layers < 1) throw ConfigError("gpt.n_layers must be >= 1");
  if (n_heads < 1) throw ConfigError("gpt.n_heads must be >= 1");
  if (d_model < 1 || d_model % n_heads != 0)
    throw ConfigError("gpt.d_model must be a positive multiple of gpt.n_heads");
  if (d_ff < 1) throw ConfigError("gpt.d_ff must be >= 1");
  if (context_len < 1) throw ConfigError("gpt.context_len must be >= 1");
  if (vocab_size < 1) throw ConfigError("gpt.vocab_size must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("gpt.dropout must lie in [0, 1)");
  if (!(lr >= 0.0)) throw ConfigError("gpt.lr must be >= 0");
  if (batch_size < 1) throw ConfigError("gpt.batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("gpt.epochs must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("gpt Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("gpt.adam_eps must be > 0");
}

Json gpt_config_to_json(const GptConfig& c) {
  return Json{{"n_layers", c.n_layers},     {"n_heads", c.n_heads},
              {"context_len", c.context_len}, {"vocab_size", c.vocab_size},
              {"d_model", c.d_model},       {"d_ff", c.d_ff},
              {"dropout", c.dropout},       {"lr", c.lr},
              {"batch_size", c.batch_size}, {"epochs", c.epochs},
              {"seed", c.seed},             {"freeze_embeddings", c.freeze_embeddings},
              {"beta1", c.beta1},           {"beta2", c.beta2},
              {"adam_eps", c.adam_eps}};
}

GptConfig gpt_config_from_json(const Json& j, GptConfig c) {
  if (!j.is_object()) throw ConfigError("gpt config must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "n_layers") c.n_layers = value.get<int>();
      else if (key == "n_heads") c.n_heads = value.get<int>();
      else if (key == "context_len") c.context_len = value.get<int>();
      else if (key == "vocab_size") c.vocab_size = value.get<int>();
      else if (key == "d_model") c.d_model = value.get<int>();
      else if (key == "d_ff") c.d_ff = value.get<int>();
      else if (key == "dropout") c.dropout = value.get<double>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "freeze_embeddings") c.freeze_embeddings = value.get<bool>();
      else if (key == "beta1") c.beta1 = value.get<double>();
      else if (key == "beta2") c.beta2 = value.get<double>();
      else if (key == "adam_eps") c.adam_eps = value.get<double>();
      else throw ConfigError("unknown gpt config key '" + key + "'");
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("gpt config: ") + e.what());
  }
  return c;
}

const char* to_string(TrainPhase p) {
  switch (p) {
    case TrainPhase::kPretrain: return "pretrain";
    case TrainPhase::kFinetune: return "finetune";
    case TrainPhase::kSelector: return "selector";
  }
  return "?";
}

template <typename Scalar>
int GptModel<Scalar>::add_slot(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  Eigen::Index offset = slots_.empty() ? 0 : slots_.back().offset + slots_.back().size();
  slots_.push_back({name, offset, rows, cols});
  return static_cast<int>(slots_.size()) - 1;
}

template <typename Scalar>
GptModel<Scalar>::GptModel(const GptConfig& config) : config_(config) {
  config_.check();
  const Eigen::Index d = config_.d_model, f = config_.d_ff, V = config_.vocab_size;
  tok_emb_ = add_slot("tok_emb", V, d);
  pos_emb_ = add_slot("pos_emb", config_.context_len, d);
  for (int l = 0; l < config_.n_layers; ++l) {
    const std::string p = "h" + std::to_string(l) + ".";
    LayerSlots s{};
    s.ln1_gain = add_slot(p + "ln1.g", 1, d);
    s.ln1_bias = add_slot(p + "ln1.b", 1, d);
    s.w_qkv = add_slot(p + "attn.w_qkv", d, 3 * d);
    s.b_qkv = add_slot(p + "attn.b_qkv", 1, 3 * d);
    s.w_proj = add_slot(p + "attn.w_proj", d, d);
    s.b_proj = add_slot(p + "attn.b_proj", 1, d);
    s.ln2_gain = add_slot(p + "ln2.g", 1, d);
    s.ln2_bias = add_slot(p + "ln2.b", 1, d);
    s.w_fc = add_slot(p + "mlp.w_fc", d, f);
    s.b_fc = add_slot(p + "mlp.b_fc", 1, f);
    s.w_out = add_slot(p + "mlp.w_out", f, d);
    s.b_out = add_slot(p + "mlp.b_out", 1, d);
    layers_.push_back(s);
  }
  lnf_gain_ = add_slot("lnf.g", 1, d);
  lnf_bias_ = add_slot("lnf.b", 1, d);
  w_lm_ = add_slot("lm.w", d, V);
  b_lm_ = add_slot("lm.b", 1, V);
  params_ = Vector::Zero(slots_.back().offset + slots_.back().size());

  Rng rng(config_.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](int slot, double stddev) {
    auto m = view(slot);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<Scalar>(stddev * normal(rng));
  };
  const double residual_std = 0.02 / std::sqrt(2.0 * config_.n_layers);
  fill(tok_emb_, 0.02);
  fill(pos_emb_, 0.02);
  for (const auto& s : layers_) {
    view(s.ln1_gain).setOnes();
    view(s.ln2_gain).setOnes();
    fill(s.w_qkv, 0.02);
    fill(s.w_proj, residual_std);
    fill(s.w_fc, 0.02);
    fill(s.w_out, residual_std);
  }
  view(lnf_gain_).setOnes();
  fill(w_lm_, 0.02);
}

template <typename Scalar>
int GptModel<Scalar>::slot_index(const std::string& name) const {
  for (std::size_t i = 0; i < slots_.size(); ++i)
    if (slots_[i].name == name) return static_cast<int>(i);
  throw Error("no parameter tensor named '" + name + "'");
}

namespace {

constexpr double kLnEps = 1e-5;

template <typename S>
using Mat = typename GptModel<S>::Matrix;
template <typename S>
using Vec = typename GptModel<S>::Vector;

template <typename S>
struct LayerCache {
  Mat<S> x_in, xhat1, a1, qkv, att, mask1, x_mid, xhat2, a2, hpre, tanh_u, act, mask2;
  Vec<S> rstd1, rstd2;
  std::vector<S> probs;  // [b][h][query][key]
  Eigen::Index q0 = 0;   // first query position evaluated
};

template <typename S>
struct Workspace {
  Eigen::Index B = 0, T = 0;
  bool last_only = true;
  bool dropout = false;
  std::vector<TokenId> tokens;  // row n = b * T + t
  Mat<S> mask0;
  std::vector<LayerCache<S>> layers;
  Mat<S> xhatf, af, logits;
  Vec<S> rstdf;
};

template <typename S>
void layer_norm(const Mat<S>& x, const Eigen::Map<const Mat<S>>& g,
                const Eigen::Map<const Mat<S>>& b, Mat<S>& xhat, Vec<S>& rstd, Mat<S>& out) {
  Vec<S> mu = x.rowwise().mean();
  xhat = x.colwise() - mu;
  rstd = (xhat.array().square().rowwise().mean() + static_cast<S>(kLnEps)).rsqrt().matrix();
  xhat.array().colwise() *= rstd.array();
  out = xhat;
  out.array().rowwise() *= g.row(0).array();
  out.rowwise() += b.row(0);
}

// Returns dx given dout; accumulates gain and bias gradients.
template <typename S>
Mat<S> layer_norm_backward(const Mat<S>& dout, const Mat<S>& xhat, const Vec<S>& rstd,
                           const Eigen::Map<const Mat<S>>& g, Eigen::Map<Mat<S>> dg,
                           Eigen::Map<Mat<S>> db) {
  dg.row(0) += (dout.array() * xhat.array()).colwise().sum().matrix();
  db.row(0) += dout.colwise().sum();
  Mat<S> dxhat = dout;
  dxhat.array().rowwise() *= g.row(0).array();
  Vec<S> m1 = dxhat.rowwise().mean();
  Vec<S> m2 = (dxhat.array() * xhat.array()).rowwise().mean().matrix();
  Mat<S> dx = dxhat.colwise() - m1;
  dx -= (xhat.array().colwise() * m2.array()).matrix();
  dx.array().colwise() *= rstd.array();
  return dx;
}

// Four 16-bit uniforms per generator draw; drop probability is p rounded to
// a multiple of 2^-16.
template <typename S>
void dropout_mask(Mat<S>& mask, Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  mask.resize(rows, cols);
  const S scale = static_cast<S>(1.0 / (1.0 - p));
  const auto threshold = static_cast<std::uint32_t>(std::lround(p * 65536.0));
  S* data = mask.data();
  const Eigen::Index n = rows * cols;
  for (Eigen::Index i = 0; i < n; i += 4) {
    std::uint64_t bits = rng();
    for (Eigen::Index j = i; j < std::min(n, i + 4); ++j, bits >>= 16)
      data[j] = (bits & 0xFFFF) < threshold ? S(0) : scale;
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

// y = x * (1 + tanh(u)) / 2 with u = c (x + a x^3); keeps tanh(u) for backward.
template <typename S>
void gelu(const Mat<S>& x, Mat<S>& tanh_u, Mat<S>& y) {
  const S c = static_cast<S>(kGeluC), a = static_cast<S>(kGeluA);
  tanh_u = (c * (x.array() + a * x.array().cube())).tanh().matrix();
  y = (static_cast<S>(0.5) * x.array() * (static_cast<S>(1) + tanh_u.array())).matrix();
}

template <typename S>
void gelu_backward(const Mat<S>& x, const Mat<S>& tanh_u, Mat<S>& dy) {
  const S c = static_cast<S>(kGeluC), a = static_cast<S>(kGeluA), half = static_cast<S>(0.5);
  const auto th = tanh_u.array();
  const auto xa = x.array();
  dy.array() *= half * (static_cast<S>(1) + th) +
                half * xa * (static_cast<S>(1) - th.square()) * c *
                    (static_cast<S>(1) + static_cast<S>(3) * a * xa.square());
}

template <typename S>
using Strided = Eigen::Map<Mat<S>, 0, Eigen::OuterStride<>>;
template <typename S>
using ConstStrided = Eigen::Map<const Mat<S>, 0, Eigen::OuterStride<>>;

// Causal attention per (sequence, head) on row-major views into the packed
// [q | k | v] projections. Only queries at positions >= q0 are computed, so
// `att` holds T - q0 rows per sequence. Masked entries of `probs` stay
// exactly zero.
template <typename S>
void attention_forward(const Mat<S>& qkv, const std::vector<TokenId>& tokens, Eigen::Index B,
                       Eigen::Index T, Eigen::Index q0, Eigen::Index H, std::vector<S>& probs,
                       Mat<S>& att) {
  const Eigen::Index d = att.cols(), dh = d / H, ld = qkv.cols(), Tq = T - q0;
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
  Mat<S> scores(Tq, T);
  for (Eigen::Index b = 0; b < B; ++b) {
    const TokenId* tok = tokens.data() + b * T;
    for (Eigen::Index h = 0; h < H; ++h) {
      const S* base = qkv.data() + b * T * ld + h * dh;
      ConstStrided<S> q(base + q0 * ld, Tq, dh, Eigen::OuterStride<>(ld));
      ConstStrided<S> k(base + d, T, dh, Eigen::OuterStride<>(ld));
      ConstStrided<S> v(base + 2 * d, T, dh, Eigen::OuterStride<>(ld));
      Eigen::Map<Mat<S>> p(probs.data() + (b * H + h) * Tq * T, Tq, T);
      scores.noalias() = q * k.transpose();
      for (Eigen::Index r = 0; r < Tq; ++r) {
        const Eigen::Index t = q0 + r;
        S max_score = S(0);
        bool any = false;
        for (Eigen::Index j = 0; j <= t; ++j) {
          if (tok[j] == Vocabulary::kPad) continue;
          max_score = any ? std::max(max_score, scores(r, j)) : scores(r, j);
          any = true;
        }
        if (!any) continue;
        S total = 0;
        for (Eigen::Index j = 0; j <= t; ++j) {
          if (tok[j] == Vocabulary::kPad) continue;
          p(r, j) = std::exp(scale * (scores(r, j) - max_score));
          total += p(r, j);
        }
        p.row(r).head(t + 1) /= total;
      }
      Strided<S>(att.data() + b * Tq * d + h * dh, Tq, dh, Eigen::OuterStride<>(d)).noalias() =
          p * v;
    }
  }
}

template <typename S>
void attention_backward(const Mat<S>& qkv, const std::vector<S>& probs, const Mat<S>& datt,
                        Eigen::Index B, Eigen::Index T, Eigen::Index q0, Eigen::Index H,
                        Mat<S>& dqkv) {
  const Eigen::Index d = datt.cols(), dh = d / H, ld = qkv.cols(), Tq = T - q0;
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
  Mat<S> dp(Tq, T);
  for (Eigen::Index b = 0; b < B; ++b) {
    for (Eigen::Index h = 0; h < H; ++h) {
      const Eigen::Index off = b * T * ld + h * dh;
      ConstStrided<S> q(qkv.data() + off + q0 * ld, Tq, dh, Eigen::OuterStride<>(ld));
      ConstStrided<S> k(qkv.data() + off + d, T, dh, Eigen::OuterStride<>(ld));
      ConstStrided<S> v(qkv.data() + off + 2 * d, T, dh, Eigen::OuterStride<>(ld));
      Strided<S> dq(dqkv.data() + off + q0 * ld, Tq, dh, Eigen::OuterStride<>(ld));
      Strided<S> dk(dqkv.data() + off + d, T, dh, Eigen::OuterStride<>(ld));
      Strided<S> dv(dqkv.data() + off + 2 * d, T, dh, Eigen::OuterStride<>(ld));
      ConstStrided<S> g(datt.data() + b * Tq * d + h * dh, Tq, dh, Eigen::OuterStride<>(d));
      Eigen::Map<const Mat<S>> p(probs.data() + (b * H + h) * Tq * T, Tq, T);
      dp.noalias() = g * v.transpose();
      dv.noalias() += p.transpose() * g;
      // dp becomes the score gradient in place.
      for (Eigen::Index r = 0; r < Tq; ++r) {
        const S weighted = p.row(r).dot(dp.row(r));
        dp.row(r) = scale * (p.row(r).array() * (dp.row(r).array() - weighted)).matrix();
      }
      dq.noalias() += dp * k;
      dk.noalias() += dp.transpose() * q;
    }
  }
}

// Row b * T + T - 1 of each sequence.
template <typename S>
Mat<S> last_rows(const Mat<S>& x, Eigen::Index B, Eigen::Index T) {
  Mat<S> out(B, x.cols());
  for (Eigen::Index b = 0; b < B; ++b) out.row(b) = x.row(b * T + T - 1);
  return out;
}

// With last_only, the final block is evaluated for the last position only:
// keys and values still cover the whole context.
template <typename S>
void run_forward(const GptModel<S>& m, Workspace<S>& ws, double dropout, Rng* rng) {
  const auto& cfg = m.config();
  const Eigen::Index B = ws.B, T = ws.T, N = B * T, d = cfg.d_model, H = cfg.n_heads;
  ws.dropout = rng != nullptr && dropout > 0.0;

  auto E = m.view(m.tok_emb());
  auto P = m.view(m.pos_emb());
  Mat<S> x(N, d);
  for (Eigen::Index n = 0; n < N; ++n) {
    const TokenId tok = ws.tokens[static_cast<std::size_t>(n)];
    if (tok == Vocabulary::kPad)
      x.row(n) = P.row(n % T);
    else
      x.row(n) = E.row(tok) + P.row(n % T);
  }
  if (ws.dropout) {
    dropout_mask<S>(ws.mask0, N, d, dropout, *rng);
    x.array() *= ws.mask0.array();
  }

  ws.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (int l = 0; l < cfg.n_layers; ++l) {
    const auto& s = m.layer(l);
    auto& c = ws.layers[static_cast<std::size_t>(l)];
    c.q0 = ws.last_only && l == cfg.n_layers - 1 ? T - 1 : 0;
    const Eigen::Index R = B * (T - c.q0);
    c.x_in = std::move(x);
    layer_norm<S>(c.x_in, m.view(s.ln1_gain), m.view(s.ln1_bias), c.xhat1, c.rstd1, c.a1);
    c.qkv.resize(N, 3 * d);
    c.qkv.noalias() = c.a1 * m.view(s.w_qkv);
    c.qkv.rowwise() += m.view(s.b_qkv).row(0);

    c.att.resize(R, d);
    c.probs.assign(static_cast<std::size_t>(R * H * T), S(0));
    attention_forward<S>(c.qkv, ws.tokens, B, T, c.q0, H, c.probs, c.att);

    Mat<S> y(R, d);
    y.noalias() = c.att * m.view(s.w_proj);
    y.rowwise() += m.view(s.b_proj).row(0);
    if (ws.dropout) {
      dropout_mask<S>(c.mask1, R, d, dropout, *rng);
      y.array() *= c.mask1.array();
    }
    c.x_mid = c.q0 == 0 ? c.x_in + y : last_rows<S>(c.x_in, B, T) + y;

    layer_norm<S>(c.x_mid, m.view(s.ln2_gain), m.view(s.ln2_bias), c.xhat2, c.rstd2, c.a2);
    c.hpre.resize(R, cfg.d_ff);
    c.hpre.noalias() = c.a2 * m.view(s.w_fc);
    c.hpre.rowwise() += m.view(s.b_fc).row(0);
    gelu<S>(c.hpre, c.tanh_u, c.act);
    Mat<S> z(R, d);
    z.noalias() = c.act * m.view(s.w_out);
    z.rowwise() += m.view(s.b_out).row(0);
    if (ws.dropout) {
      dropout_mask<S>(c.mask2, R, d, dropout, *rng);
      z.array() *= c.mask2.array();
    }
    x = c.x_mid + z;
  }

  // x now holds exactly the rows that need logits.
  layer_norm<S>(x, m.view(m.lnf_gain()), m.view(m.lnf_bias()), ws.xhatf, ws.rstdf, ws.af);
  ws.logits.resize(ws.af.rows(), cfg.vocab_size);
  ws.logits.noalias() = ws.af * m.view(m.w_lm());
  ws.logits.rowwise() += m.view(m.b_lm()).row(0);
}

template <typename S>
void run_backward(const GptModel<S>& m, const Workspace<S>& ws, const Mat<S>& dlogits,
                  Vec<S>& grad) {
  const auto& cfg = m.config();
  const Eigen::Index B = ws.B, T = ws.T, N = B * T, d = cfg.d_model, H = cfg.n_heads;
  grad = Vec<S>::Zero(m.parameters().size());

  m.view(grad, m.w_lm()).noalias() += ws.af.transpose() * dlogits;
  m.view(grad, m.b_lm()).row(0) += dlogits.colwise().sum();
  Mat<S> daf = dlogits * m.view(m.w_lm()).transpose();
  Mat<S> dx = layer_norm_backward<S>(daf, ws.xhatf, ws.rstdf, m.view(m.lnf_gain()),
                                     m.view(grad, m.lnf_gain()), m.view(grad, m.lnf_bias()));

  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const auto& s = m.layer(l);
    const auto& c = ws.layers[static_cast<std::size_t>(l)];

    Mat<S> dz = dx;
    if (ws.dropout) dz.array() *= c.mask2.array();
    m.view(grad, s.w_out).noalias() += c.act.transpose() * dz;
    m.view(grad, s.b_out).row(0) += dz.colwise().sum();
    Mat<S> dh_pre = dz * m.view(s.w_out).transpose();
    gelu_backward<S>(c.hpre, c.tanh_u, dh_pre);
    m.view(grad, s.w_fc).noalias() += c.a2.transpose() * dh_pre;
    m.view(grad, s.b_fc).row(0) += dh_pre.colwise().sum();
    Mat<S> da2 = dh_pre * m.view(s.w_fc).transpose();
    Mat<S> dx_mid = dx + layer_norm_backward<S>(da2, c.xhat2, c.rstd2, m.view(s.ln2_gain),
                                                m.view(grad, s.ln2_gain),
                                                m.view(grad, s.ln2_bias));

    Mat<S> dy = dx_mid;
    if (ws.dropout) dy.array() *= c.mask1.array();
    m.view(grad, s.w_proj).noalias() += c.att.transpose() * dy;
    m.view(grad, s.b_proj).row(0) += dy.colwise().sum();
    Mat<S> datt = dy * m.view(s.w_proj).transpose();

    Mat<S> dqkv = Mat<S>::Zero(N, 3 * d);
    attention_backward<S>(c.qkv, c.probs, datt, B, T, c.q0, H, dqkv);
    m.view(grad, s.w_qkv).noalias() += c.a1.transpose() * dqkv;
    m.view(grad, s.b_qkv).row(0) += dqkv.colwise().sum();
    Mat<S> da1 = dqkv * m.view(s.w_qkv).transpose();
    dx = layer_norm_backward<S>(da1, c.xhat1, c.rstd1, m.view(s.ln1_gain),
                                m.view(grad, s.ln1_gain), m.view(grad, s.ln1_bias));
    if (c.q0 == 0) {
      dx += dx_mid;
    } else {
      for (Eigen::Index b = 0; b < B; ++b) dx.row(b * T + T - 1) += dx_mid.row(b);
    }
  }

  if (ws.dropout) dx.array() *= ws.mask0.array();
  auto dE = m.view(grad, m.tok_emb());
  auto dP = m.view(grad, m.pos_emb());
  for (Eigen::Index n = 0; n < N; ++n) {
    const TokenId tok = ws.tokens[static_cast<std::size_t>(n)];
    if (tok != Vocabulary::kPad) dE.row(tok) += dx.row(n);
    dP.row(n % T) += dx.row(n);
  }
}

void check_token(TokenId t, int vocab_size) {
  if (t < 0 || t >= vocab_size)
    throw VocabError("token id " + std::to_string(t) + " outside vocabulary of size " +
                     std::to_string(vocab_size));
}

template <typename S>
void load_batch(const GptModel<S>& m, std::span<const TrainingPair> batch, Workspace<S>& ws) {
  if (batch.empty()) throw DataError("empty batch");
  const auto T = static_cast<Eigen::Index>(batch.front().context.size());
  if (T < 1 || T > m.config().context_len)
    throw DataError("context length " + std::to_string(T) + " outside [1, " +
                    std::to_string(m.config().context_len) + "]");
  ws.B = static_cast<Eigen::Index>(batch.size());
  ws.T = T;
  ws.last_only = true;
  ws.tokens.clear();
  ws.tokens.reserve(static_cast<std::size_t>(ws.B * T));
  for (const auto& pair : batch) {
    if (static_cast<Eigen::Index>(pair.context.size()) != T)
      throw DataError("contexts in a batch must share one length");
    for (TokenId t : pair.context) {
      check_token(t, m.config().vocab_size);
      ws.tokens.push_back(t);
    }
    check_token(pair.target, m.config().vocab_size);
  }
}

// Mean cross-entropy of last-position logits; fills dlogits when requested.
template <typename S>
double cross_entropy(const Mat<S>& logits, std::span<const TrainingPair> batch, Mat<S>* dlogits,
                     std::size_t* correct) {
  double total = 0.0;
  const auto B = logits.rows();
  if (dlogits) dlogits->resize(B, logits.cols());
  for (Eigen::Index b = 0; b < B; ++b) {
    Eigen::Index argmax = 0;
    const S mx = logits.row(b).maxCoeff(&argmax);
    const double lse = static_cast<double>(mx) +
                       std::log(static_cast<double>((logits.row(b).array() - mx).exp().sum()));
    const TokenId target = batch[static_cast<std::size_t>(b)].target;
    total += lse - static_cast<double>(logits(b, target));
    if (correct && argmax == target) ++*correct;
    if (dlogits) {
      dlogits->row(b) = (logits.row(b).array().template cast<double>() - lse)
                            .exp()
                            .template cast<S>()
                            .matrix();
      (*dlogits)(b, target) -= S(1);
    }
  }
  if (dlogits) *dlogits /= static_cast<S>(B);
  return total / static_cast<double>(B);
}

template <typename S>
std::vector<TokenId> normalize_context(const GptModel<S>& m, std::span<const TokenId> context) {
  const auto k = static_cast<std::size_t>(m.config().context_len);
  std::vector<TokenId> out(k, Vocabulary::kPad);
  const std::size_t take = std::min(k, context.size());
  std::copy(context.end() - static_cast<std::ptrdiff_t>(take), context.end(),
            out.end() - static_cast<std::ptrdiff_t>(take));
  return out;
}

}  // namespace

template <typename Scalar>
typename GptModel<Scalar>::Matrix forward(const GptModel<Scalar>& model,
                                          std::span<const TokenId> context) {
  if (context.empty() || static_cast<int>(context.size()) > model.config().context_len)
    throw DataError("context length must lie in [1, " +
                    std::to_string(model.config().context_len) + "]");
  Workspace<Scalar> ws;
  ws.B = 1;
  ws.T = static_cast<Eigen::Index>(context.size());
  ws.last_only = false;
  for (TokenId t : context) check_token(t, model.config().vocab_size);
  ws.tokens.assign(context.begin(), context.end());
  run_forward(model, ws, 0.0, nullptr);
  return ws.logits;
}

template <typename Scalar>
double loss(const GptModel<Scalar>& model, std::span<const TrainingPair> batch) {
  Workspace<Scalar> ws;
  load_batch(model, batch, ws);
  run_forward(model, ws, 0.0, nullptr);
  return cross_entropy<Scalar>(ws.logits, batch, nullptr, nullptr);
}

namespace {

template <typename S>
LossAndGradient<S> loss_and_gradient(const GptModel<S>& model, std::span<const TrainingPair> batch,
                                     double dropout, Rng* rng, Workspace<S>& ws) {
  LossAndGradient<S> out;
  load_batch(model, batch, ws);
  run_forward(model, ws, dropout, rng);
  Mat<S> dlogits;
  out.loss = cross_entropy<S>(ws.logits, batch, &dlogits, &out.correct);
  run_backward(model, ws, dlogits, out.gradient);
  return out;
}

}  // namespace

template <typename Scalar>
LossAndGradient<Scalar> backward(const GptModel<Scalar>& model,
                                 std::span<const TrainingPair> batch, Rng* dropout_rng) {
  Workspace<Scalar> ws;
  return loss_and_gradient(model, batch, model.config().dropout, dropout_rng, ws);
}

template <typename Scalar>
Eigen::VectorXd next_token_distribution(const GptModel<Scalar>& model,
                                        std::span<const TokenId> context) {
  const auto ctx = normalize_context(model, context);
  const auto logits = forward(model, std::span<const TokenId>(ctx));
  Eigen::VectorXd z = logits.row(logits.rows() - 1).transpose().template cast<double>();
  z.array() -= z.maxCoeff();
  z = z.array().exp().matrix();
  return z / z.sum();
}

template <typename Scalar>
TokenId predict_next(const GptModel<Scalar>& model, std::span<const TokenId> context,
                     double temperature, Rng& rng) {
  const int V = model.config().vocab_size;
  if (V <= Vocabulary::kNumSpecial) throw VocabError("vocabulary has no layer tokens");
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
  const auto ctx = normalize_context(model, context);
  const auto logits = forward(model, std::span<const TokenId>(ctx));
  const auto last = logits.row(logits.rows() - 1);
  if (temperature == 0.0) {
    TokenId best = Vocabulary::kNumSpecial;
    for (TokenId t = Vocabulary::kNumSpecial + 1; t < V; ++t)
      if (last(t) > last(best)) best = t;
    return best;
  }
  std::vector<double> w(static_cast<std::size_t>(V - Vocabulary::kNumSpecial));
  double mx = -std::numeric_limits<double>::infinity();
  for (TokenId t = Vocabulary::kNumSpecial; t < V; ++t)
    mx = std::max(mx, static_cast<double>(last(t)) / temperature);
  for (TokenId t = Vocabulary::kNumSpecial; t < V; ++t)
    w[static_cast<std::size_t>(t - Vocabulary::kNumSpecial)] =
        std::exp(static_cast<double>(last(t)) / temperature - mx);
  return static_cast<TokenId>(sample_categorical(w, rng)) + Vocabulary::kNumSpecial;
}

template <typename Scalar>
std::string parameter_digest(const typename GptModel<Scalar>::Vector& params) {
  std::string_view bytes(reinterpret_cast<const char*>(params.data()),
                         static_cast<std::size_t>(params.size()) * sizeof(Scalar));
  return hex64(fnv1a(bytes));
}

template <typename Scalar>
TrainReport train(GptModel<Scalar>& model, std::span<const TrainingPair> pairs,
                  const GptConfig& cfg, TrainPhase phase, const TrainOptions<Scalar>& options) {
  cfg.check();
  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  report.phase = phase;
  if (cfg.epochs > 0 && pairs.empty()) throw DataError("no training pairs");

  using V = typename GptModel<Scalar>::Vector;
  V m1 = V::Zero(model.parameters().size());
  V m2 = V::Zero(model.parameters().size());
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(cfg.seed, 0x5348));
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  const Scalar lr = static_cast<Scalar>(cfg.lr), b1 = static_cast<Scalar>(cfg.beta1),
               b2 = static_cast<Scalar>(cfg.beta2), eps = static_cast<Scalar>(cfg.adam_eps);
  const auto& emb_slot = model.slots()[static_cast<std::size_t>(model.tok_emb())];
  const auto& pos_slot = model.slots()[static_cast<std::size_t>(model.pos_emb())];
  std::uint64_t step = 0;
  Workspace<Scalar> ws;
  std::vector<TrainingPair> batch;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0, bi = 0; begin < order.size(); begin += batch_size, ++bi) {
      const std::size_t end = std::min(order.size(), begin + batch_size);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(pairs[order[i]]);
      Rng drop_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), bi));
      auto lg = loss_and_gradient<Scalar>(model, batch, cfg.dropout, &drop_rng, ws);
      if (!std::isfinite(lg.loss) || !lg.gradient.allFinite())
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(bi));
      loss_sum += lg.loss * static_cast<double>(end - begin);
      correct += lg.correct;
      if (cfg.freeze_embeddings) {
        lg.gradient.segment(emb_slot.offset, emb_slot.size()).setZero();
        lg.gradient.segment(pos_slot.offset, pos_slot.size()).setZero();
      }
      ++step;
      m1 = b1 * m1 + (Scalar(1) - b1) * lg.gradient;
      m2 = b2 * m2 + (Scalar(1) - b2) * lg.gradient.cwiseAbs2();
      const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(cfg.beta1, static_cast<double>(step)));
      const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(cfg.beta2, static_cast<double>(step)));
      model.parameters().array() -=
          lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
      if (!model.all_finite())
        throw TrainingDiverged("non-finite parameters at epoch " + std::to_string(epoch));
    }
    report.epoch_loss.push_back(loss_sum / static_cast<double>(pairs.size()));
    report.epoch_accuracy.push_back(static_cast<double>(correct) /
                                    static_cast<double>(pairs.size()));
    if (options.on_epoch) options.on_epoch(epoch, model, report);
    if (options.on_checkpoint && options.checkpoint_every > 0 &&
        (epoch % options.checkpoint_every == 0 || epoch == cfg.epochs))
      options.on_checkpoint(epoch, model);
  }
  report.checkpoint_id = parameter_digest<Scalar>(model.parameters());
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

#define ARCHGEN_INSTANTIATE_GPT(S)                                                             \
  template class GptModel<S>;                                                                 \
  template GptModel<S>::Matrix forward(const GptModel<S>&, std::span<const TokenId>);        \
  template double loss(const GptModel<S>&, std::span<const TrainingPair>);                   \
  template LossAndGradient<S> backward(const GptModel<S>&, std::span<const TrainingPair>,    \
                                       Rng*);                                                 \
  template Eigen::VectorXd next_token_distribution(const GptModel<S>&,                       \
                                                   std::span<const TokenId>);                \
  template TokenId predict_next(const GptModel<S>&, std::span<const TokenId>, double, Rng&); \
  template std::string parameter_digest<S>(const GptModel<S>::Vector&);                      \
  template TrainReport train(GptModel<S>&, std::span<const TrainingPair>, const GptConfig&,  \
                             TrainPhase, const TrainOptions<S>&);

ARCHGEN_INSTANTIATE_GPT(float)
ARCHGEN_INSTANTIATE_GPT(double)

}  // namespace archgen
