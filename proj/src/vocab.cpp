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

#include "archgen/vocab.hpp"

#include <utility>

#include "archgen/errors.hpp"
#include "archgen/hash.hpp"

namespace archgen {

TokenId Vocabulary::add(const LayerDescriptor& layer) {
  std::string k = canonical_key(layer, mode_);
  if (auto it = index_.find(k); it != index_.end()) return it->second;
  if (frozen_) throw VocabError("vocabulary is frozen; cannot add '" + k + "'");
  const TokenId id = size();
  index_.emplace(k, id);
  keys_.push_back(std::move(k));
  prototypes_.push_back(layer);
  prototypes_.back().id = 0;
  return id;
}

std::optional<TokenId> Vocabulary::find_key(const std::string& key) const {
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  return std::nullopt;
}

std::optional<TokenId> Vocabulary::find(const LayerDescriptor& layer) const {
  return find_key(canonical_key(layer, mode_));
}

TokenId Vocabulary::token_of(const LayerDescriptor& layer) const {
  const std::string k = canonical_key(layer, mode_);
  if (auto it = index_.find(k); it != index_.end()) return it->second;
  throw UnknownLayerError("layer structure not in vocabulary: " + k);
}

const LayerDescriptor& Vocabulary::prototype(TokenId token) const {
  if (!is_layer(token)) throw VocabError("token " + std::to_string(token) + " is not a layer token");
  return prototypes_[static_cast<std::size_t>(token - kNumSpecial)];
}

const std::string& Vocabulary::key(TokenId token) const {
  if (!is_layer(token)) throw VocabError("token " + std::to_string(token) + " is not a layer token");
  return keys_[static_cast<std::size_t>(token - kNumSpecial)];
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = fnv1a(to_string(mode_));
  for (const auto& k : keys_) {
    h = fnv1a(k, h);
    h = fnv1a("\n", h);
  }
  return h;
}

namespace {

template <typename Lookup>
TokenSequence encode_with(const Architecture& arch, Lookup&& lookup) {
  if (arch.blocks.empty()) throw EncodingError("cannot encode an architecture without blocks");
  TokenSequence seq;
  seq.tokens.reserve(arch.layer_count());
  for (const auto& b : arch.blocks) {
    if (b.layers.empty()) throw EncodingError("cannot encode an empty block");
    seq.boundaries.push_back(seq.tokens.size());
    for (const auto& l : b.layers) seq.tokens.push_back(lookup(l));
  }
  return seq;
}

}  // namespace

TokenSequence encode_architecture(const Architecture& arch, Vocabulary& vocab) {
  if (vocab.frozen()) return encode_architecture(arch, std::as_const(vocab));
  return encode_with(arch, [&](const LayerDescriptor& l) { return vocab.add(l); });
}

TokenSequence encode_architecture(const Architecture& arch, const Vocabulary& vocab) {
  return encode_with(arch, [&](const LayerDescriptor& l) { return vocab.token_of(l); });
}

std::vector<TokenId> encode_layers_lenient(std::span<const Block> blocks, const Vocabulary& vocab,
                                           std::size_t* unknown) {
  std::vector<TokenId> out;
  std::size_t misses = 0;
  for (const auto& b : blocks) {
    for (const auto& l : b.layers) {
      auto t = vocab.find(l);
      if (!t) ++misses;
      out.push_back(t.value_or(Vocabulary::kPad));
    }
  }
  if (unknown) *unknown = misses;
  return out;
}

Architecture decode_architecture(const TokenSequence& seq, const Vocabulary& vocab,
                                 Shape3 input_shape, int num_classes) {
  if (seq.tokens.empty()) throw EncodingError("empty token sequence");
  if (seq.boundaries.empty() || seq.boundaries.front() != 0) {
    throw EncodingError("first block boundary must be 0");
  }
  for (std::size_t i = 1; i < seq.boundaries.size(); ++i) {
    if (seq.boundaries[i] <= seq.boundaries[i - 1]) {
      throw EncodingError("block boundaries must be strictly increasing");
    }
  }
  if (seq.boundaries.back() >= seq.tokens.size()) {
    throw EncodingError("block boundary past the end of the sequence");
  }

  const auto& lib = default_library();
  const bool full = vocab.mode() == Canonicalization::kFull;
  Architecture arch;
  arch.input_shape = input_shape;
  arch.num_classes = num_classes;
  Shape3 shape = input_shape;
  std::size_t next_boundary = 0;
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    const TokenId t = seq.tokens[i];
    if (!vocab.is_layer(t)) {
      throw VocabError("token " + std::to_string(t) + " at index " + std::to_string(i) +
                       " is not a layer token");
    }
    if (next_boundary < seq.boundaries.size() && seq.boundaries[next_boundary] == i) {
      arch.blocks.emplace_back();
      ++next_boundary;
    }
    LayerDescriptor layer = vocab.prototype(t);
    const bool fits = full ? layer.in_size == shape : layer.in_size.c == shape.c;
    if (!fits) {
      throw ShapeError("layer expects input " + std::to_string(layer.in_size.c) + "x" +
                           std::to_string(layer.in_size.h) + "x" +
                           std::to_string(layer.in_size.w) + " but receives " +
                           std::to_string(shape.c) + "x" + std::to_string(shape.h) + "x" +
                           std::to_string(shape.w),
                       i);
    }
    layer.in_size = shape;
    try {
      layer.out_size = infer_out_size(layer);
      check_layer(layer);
    } catch (const ShapeError& e) {
      throw ShapeError(e.what(), i);
    }
    shape = layer.out_size;
    arch.blocks.back().layers.push_back(std::move(layer));
  }
  for (auto& b : arch.blocks) {
    b.kind = lib.match(b.layers).value_or(BlockKind::kCell);
    b.width = b.out_size().c;
  }
  finalize(arch);
  return arch;
}

Vocabulary build_vocabulary(const std::vector<const Architecture*>& archs, Canonicalization mode) {
  Vocabulary vocab(mode);
  for (const auto* a : archs) {
    for (const auto& b : a->blocks) {
      for (const auto& l : b.layers) vocab.add(l);
    }
  }
  return vocab;
}

}  // namespace archgen
