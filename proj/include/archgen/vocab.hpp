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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "archgen/architecture.hpp"

namespace archgen {

using TokenId = std::int32_t;

/// Bijective map between canonical layer keys and token ids. Ids 0..3 are
/// reserved for PAD/BOS/EOS/SEP; layer tokens follow in first-seen order.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kSep = 3;
  static constexpr TokenId kNumSpecial = 4;

  explicit Vocabulary(Canonicalization mode = Canonicalization::kFull) : mode_(mode) {}

  Canonicalization mode() const { return mode_; }

  /// Inserts the layer structure if new. Throws VocabError once frozen.
  TokenId add(const LayerDescriptor& layer);

  std::optional<TokenId> find(const LayerDescriptor& layer) const;
  std::optional<TokenId> find_key(const std::string& key) const;

  /// Throws UnknownLayerError for unseen structures.
  TokenId token_of(const LayerDescriptor& layer) const;

  /// Representative layer for a token (id field is meaningless).
  const LayerDescriptor& prototype(TokenId token) const;
  const std::string& key(TokenId token) const;

  /// Total id space including the special tokens.
  int size() const { return kNumSpecial + static_cast<int>(keys_.size()); }
  /// Number of distinct layer structures.
  int layer_count() const { return static_cast<int>(keys_.size()); }

  static bool is_special(TokenId t) { return t >= 0 && t < kNumSpecial; }
  bool is_layer(TokenId t) const { return t >= kNumSpecial && t < size(); }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  std::uint64_t hash() const;

 private:
  Canonicalization mode_;
  bool frozen_ = false;
  std::vector<std::string> keys_;
  std::vector<LayerDescriptor> prototypes_;
  std::unordered_map<std::string, TokenId> index_;
};

struct TokenSequence {
  std::vector<TokenId> tokens;
  std::vector<std::size_t> boundaries;  // start index of each block
};

/// Token sequence of the block layers (head excluded). A frozen vocabulary
/// throws UnknownLayerError on unseen layers; an unfrozen one grows.
TokenSequence encode_architecture(const Architecture& arch, Vocabulary& vocab);
TokenSequence encode_architecture(const Architecture& arch, const Vocabulary& vocab);

/// Layer tokens with unseen structures mapped to PAD; returns how many were
/// unknown through `unknown`.
std::vector<TokenId> encode_layers_lenient(std::span<const Block> blocks, const Vocabulary& vocab,
                                           std::size_t* unknown = nullptr);

/// Inverse of encoding. Shapes are re-derived by chaining from `input_shape`;
/// a layer whose declared input disagrees raises ShapeError with its index.
Architecture decode_architecture(const TokenSequence& seq, const Vocabulary& vocab,
                                 Shape3 input_shape, int num_classes);

/// Builds a vocabulary from architectures in order of first appearance.
Vocabulary build_vocabulary(const std::vector<const Architecture*>& archs,
                            Canonicalization mode = Canonicalization::kFull);

}  // namespace archgen
