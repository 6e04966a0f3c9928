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

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "archgen/corpus.hpp"
#include "archgen/rng.hpp"
#include "archgen/serialize.hpp"
#include "archgen/vocab.hpp"

namespace archgen {

struct GptConfig {
  int n_layers = 4;
  int n_heads = 4;
  int context_len = 10;
  int vocab_size = 0;
  int d_model = 64;
  int d_ff = 256;
  double dropout = 0.1;
  double lr = 1e-4;
  int batch_size = 128;
  int epochs = 300;
  std::uint64_t seed = 0;
  bool freeze_embeddings = false;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  /// Throws ConfigError on inconsistent sizes.
  void check() const;
};

Json gpt_config_to_json(const GptConfig& c);
/// Overlays keys present in `j` onto `base`.
GptConfig gpt_config_from_json(const Json& j, GptConfig base = {});

/// Named slice of a flat parameter buffer (row-major rows x cols).
struct TensorSlot {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
};

/// Decoder-only transformer over layer tokens: token + learned positional
/// embeddings, pre-norm blocks of causal multi-head attention and a GELU MLP,
/// final layer norm and an untied output projection. PAD tokens embed to zero
/// and are excluded as attention keys.
template <typename Scalar>
class GptModel {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;

  struct LayerSlots {
    int ln1_gain, ln1_bias, w_qkv, b_qkv, w_proj, b_proj;
    int ln2_gain, ln2_bias, w_fc, b_fc, w_out, b_out;
  };

  /// Seeded initialization from `config.seed`.
  explicit GptModel(const GptConfig& config);

  const GptConfig& config() const { return config_; }
  GptConfig& mutable_config() { return config_; }

  Vector& parameters() { return params_; }
  const Vector& parameters() const { return params_; }
  const std::vector<TensorSlot>& slots() const { return slots_; }
  int slot_index(const std::string& name) const;

  int tok_emb() const { return tok_emb_; }
  int pos_emb() const { return pos_emb_; }
  const LayerSlots& layer(int l) const { return layers_[static_cast<std::size_t>(l)]; }
  int lnf_gain() const { return lnf_gain_; }
  int lnf_bias() const { return lnf_bias_; }
  int w_lm() const { return w_lm_; }
  int b_lm() const { return b_lm_; }

  ConstMatrixMap view(int slot) const { return view(params_, slot); }
  MatrixMap view(int slot) { return view(params_, slot); }
  ConstMatrixMap view(const Vector& buf, int slot) const {
    const auto& s = slots_[static_cast<std::size_t>(slot)];
    return ConstMatrixMap(buf.data() + s.offset, s.rows, s.cols);
  }
  MatrixMap view(Vector& buf, int slot) const {
    const auto& s = slots_[static_cast<std::size_t>(slot)];
    return MatrixMap(buf.data() + s.offset, s.rows, s.cols);
  }

  bool all_finite() const { return params_.allFinite(); }

 private:
  int add_slot(const std::string& name, Eigen::Index rows, Eigen::Index cols);

  GptConfig config_;
  std::vector<TensorSlot> slots_;
  Vector params_;
  int tok_emb_ = 0, pos_emb_ = 0, lnf_gain_ = 0, lnf_bias_ = 0, w_lm_ = 0, b_lm_ = 0;
  std::vector<LayerSlots> layers_;
};

using GptModelf = GptModel<float>;
using GptModeld = GptModel<double>;

/// Position-wise logits (k x V) for one context of exactly k tokens.
/// Throws VocabError for ids outside [0, V).
template <typename Scalar>
typename GptModel<Scalar>::Matrix forward(const GptModel<Scalar>& model,
                                          std::span<const TokenId> context);

/// Mean cross-entropy of each target under the last-position softmax.
template <typename Scalar>
double loss(const GptModel<Scalar>& model, std::span<const TrainingPair> batch);

template <typename Scalar>
struct LossAndGradient {
  double loss = 0.0;
  std::size_t correct = 0;  // last-position argmax hits
  typename GptModel<Scalar>::Vector gradient;
};

/// Exact reverse-mode gradient of `loss` with respect to every parameter.
/// With `dropout_rng` set, dropout masks are drawn from it (training mode).
template <typename Scalar>
LossAndGradient<Scalar> backward(const GptModel<Scalar>& model, std::span<const TrainingPair> batch,
                                 Rng* dropout_rng = nullptr);

/// Softmax of the last-position logits.
template <typename Scalar>
Eigen::VectorXd next_token_distribution(const GptModel<Scalar>& model,
                                        std::span<const TokenId> context);

/// temperature 0: argmax over layer tokens, lowest id on ties. temperature > 0:
/// sample from softmax(logits / temperature) over layer tokens. Contexts
/// shorter than k are left-padded. Special tokens are never returned.
template <typename Scalar>
TokenId predict_next(const GptModel<Scalar>& model, std::span<const TokenId> context,
                     double temperature, Rng& rng);

enum class TrainPhase { kPretrain, kFinetune, kSelector };
const char* to_string(TrainPhase p);

struct TrainReport {
  TrainPhase phase = TrainPhase::kPretrain;
  std::vector<double> epoch_loss;
  std::vector<double> epoch_accuracy;
  double wall_seconds = 0.0;
  std::string checkpoint_id;
};

template <typename Scalar>
struct TrainOptions {
  /// Called after every epoch with the 1-based epoch number.
  std::function<void(int, const GptModel<Scalar>&, const TrainReport&)> on_epoch;
  /// Called every `checkpoint_every` epochs (and after the last one).
  std::function<void(int, const GptModel<Scalar>&)> on_checkpoint;
  int checkpoint_every = 0;
};

/// Adam on shuffled mini-batches, all randomness derived from cfg.seed.
/// Throws TrainingDiverged when the loss or parameters become non-finite.
template <typename Scalar>
TrainReport train(GptModel<Scalar>& model, std::span<const TrainingPair> pairs,
                  const GptConfig& cfg, TrainPhase phase,
                  const TrainOptions<Scalar>& options = {});

/// Hex digest of the parameter bytes.
template <typename Scalar>
std::string parameter_digest(const typename GptModel<Scalar>::Vector& params);

}  // namespace archgen
