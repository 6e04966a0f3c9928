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
#include <span>
#include <string>
#include <vector>

#include "archgen/architecture.hpp"
#include "archgen/corpus.hpp"
#include "archgen/gpt.hpp"
#include "archgen/serialize.hpp"
#include "archgen/vocab.hpp"

namespace archgen {

struct FcnConfig {
  int context_len = 10;
  int vocab_size = 0;
  std::vector<int> hidden{128, 128};
  int num_classes = kLibrarySize;
  double lr = 1e-3;
  int epochs = 30;
  int batch_size = 128;
  std::uint64_t seed = 0;

  void check() const;
};

Json fcn_config_to_json(const FcnConfig& c);
FcnConfig fcn_config_from_json(const Json& j, FcnConfig base = {});

/// One labelled layer position: the k preceding tokens, the token itself and
/// the kind of the block that contains it.
struct FcnExample {
  std::vector<TokenId> context;
  TokenId predicted = 0;
  BlockKind label = BlockKind::kConv;
};

std::vector<FcnExample> make_fcn_examples(const std::vector<CorpusRecord>& records,
                                          const Vocabulary& vocab, int k = 10);

/// Multi-layer perceptron over the concatenated one-hot encodings of the
/// context tokens and the predicted token. The input layer is stored as a
/// ((k + 1) * V) x h1 table, so the first affine map is a sum of k + 1 rows.
template <typename Scalar>
class FcnModel {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;

  /// Hidden layers get scaled normal weights; the output layer starts at zero.
  explicit FcnModel(const FcnConfig& config);

  const FcnConfig& config() const { return config_; }
  Vector& parameters() { return params_; }
  const Vector& parameters() const { return params_; }
  const std::vector<TensorSlot>& slots() const { return slots_; }

  int num_dense() const { return static_cast<int>(weights_.size()); }
  int weight(int layer) const { return weights_[static_cast<std::size_t>(layer)]; }
  int bias(int layer) const { return biases_[static_cast<std::size_t>(layer)]; }

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

 private:
  FcnConfig config_;
  std::vector<TensorSlot> slots_;
  std::vector<int> weights_, biases_;
  Vector params_;
};

using FcnModelf = FcnModel<float>;
using FcnModeld = FcnModel<double>;

/// Class logits (num_classes) for one input. Contexts shorter than k are
/// left-padded; longer ones keep the last k tokens.
template <typename Scalar>
Eigen::VectorXd fcn_logits(const FcnModel<Scalar>& model, std::span<const TokenId> context,
                           TokenId predicted);

template <typename Scalar>
Eigen::VectorXd fcn_probabilities(const FcnModel<Scalar>& model,
                                  std::span<const TokenId> context, TokenId predicted);

/// Argmax class, lowest index on ties.
template <typename Scalar>
BlockKind fcn_select(const FcnModel<Scalar>& model, std::span<const TokenId> context,
                     TokenId predicted);

/// Mean cross-entropy and its gradient over a batch (exposed for tests).
template <typename Scalar>
double fcn_loss_and_gradient(const FcnModel<Scalar>& model, std::span<const FcnExample> batch,
                             typename FcnModel<Scalar>::Vector* gradient);

/// Adam on shuffled mini-batches seeded by cfg.seed. Throws LabelError for
/// labels outside the library and TrainingDiverged on a non-finite loss.
template <typename Scalar>
FcnModel<Scalar> fcn_train(std::span<const FcnExample> examples, const FcnConfig& cfg,
                           TrainReport* report = nullptr);

template <typename Scalar>
double fcn_accuracy(const FcnModel<Scalar>& model, std::span<const FcnExample> examples);

}  // namespace archgen
