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

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "archgen/arch.hpp"

namespace archgen {

/// Block vocabulary. The first 15 entries form the block library; kCell marks
/// ingested benchmark cells that match no library template.
enum class BlockKind : int {
  kConvNormActivation = 0,
  kSqueezeExcitation,
  kInception,
  kAvgpool,
  kResBottleneckBlock,
  kStem,
  kBottleneckResNet,
  kBasicblock,
  kBottleneckResNeXt,
  kInvertedResidual,
  kBottleneckWideResNet,
  kMaxpool,
  kBatchNormal,
  kRelu,
  kConv,
  kCell,
};

inline constexpr int kLibrarySize = 15;

inline int kind_index(BlockKind k) { return static_cast<int>(k); }
inline BlockKind kind_from_index(int i) { return static_cast<BlockKind>(i); }
inline bool in_library(BlockKind k) {
  return kind_index(k) >= 0 && kind_index(k) < kLibrarySize;
}

const char* to_string(BlockKind k);
BlockKind block_kind_from_string(const std::string& s);

struct Block {
  BlockKind kind = BlockKind::kConv;
  std::vector<LayerDescriptor> layers;
  int width = 0;  // output channel count of the block

  Shape3 in_size() const { return layers.front().in_size; }
  Shape3 out_size() const { return layers.back().out_size; }
};

struct Architecture {
  std::vector<Block> blocks;
  LayerDescriptor head;
  Shape3 input_shape{3, 32, 32};
  int num_classes = 10;

  std::size_t layer_count() const;
  std::vector<BlockKind> kinds() const;
};

struct DepthBounds {
  int min = 10;
  int max = 20;

  bool contains(std::size_t d) const {
    return static_cast<int>(d) >= min && static_cast<int>(d) <= max;
  }
};

struct BlockSpec {
  BlockKind kind = BlockKind::kConv;
  int width = 16;

  auto operator<=>(const BlockSpec&) const = default;
};

struct LibraryEntry {
  BlockKind kind;
  const char* layer_template;
  const char* source;
};

/// The fixed 15-entry block library. Every template realizes a flat layer
/// sequence whose first layer consumes the incoming shape and whose last layer
/// emits `width` channels.
class BlockLibrary {
 public:
  BlockLibrary();

  std::span<const LibraryEntry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const LibraryEntry& entry(std::size_t i) const { return entries_.at(i); }

  /// Kinds whose output channel count always equals the input's.
  static bool channel_preserving(BlockKind kind);
  /// Kinds that shrink spatial dimensions.
  static bool downsampling(BlockKind kind);
  static bool instantiable(BlockKind kind, Shape3 in);

  /// Layers for `kind` at the given input, or nullopt when the input is too
  /// small. Channel-preserving kinds ignore `width`.
  std::optional<Block> instantiate(BlockKind kind, int width, Shape3 in) const;

  /// Library kind whose instantiation reproduces `layers` exactly.
  std::optional<BlockKind> match(std::span<const LayerDescriptor> layers) const;

 private:
  std::vector<LibraryEntry> entries_;
};

const BlockLibrary& default_library();

enum class RepairKind { kFallback, kWidth, kReshape };

struct RepairAction {
  std::size_t index = 0;
  RepairKind kind = RepairKind::kReshape;
  BlockKind from_kind = BlockKind::kConv;
  BlockKind to_kind = BlockKind::kConv;
  int from_width = 0;
  int to_width = 0;

  bool operator==(const RepairAction&) const = default;
};

const char* to_string(RepairKind k);

/// Instantiates blocks in order, chaining shapes. Specs that cannot be placed
/// at their position fall back to a shape-preserving Conv block; each fallback
/// is appended to `repairs` when provided.
Architecture assemble(std::span<const BlockSpec> specs, Shape3 input_shape,
                      int num_classes, std::vector<RepairAction>* repairs = nullptr);

/// Re-chains shapes after blocks were swapped in or out. A block whose input
/// still matches is kept verbatim; otherwise library blocks are re-instantiated
/// at the new input (kWidth when the width changes, kReshape otherwise) and
/// anything else falls back to a shape-preserving Conv block (kFallback).
Architecture rechain(std::vector<Block> blocks, Shape3 input_shape, int num_classes,
                     std::vector<RepairAction>* repairs = nullptr);

/// Rebuilds the classifier head and renumbers layer ids.
void finalize(Architecture& arch);

std::vector<BlockSpec> specs_of(const Architecture& arch);

/// Full structural validation. Throws ShapeError / EncodingError.
void validate(const Architecture& arch, std::optional<DepthBounds> depth = DepthBounds{});

/// Canonical keys of all block layers in order (head excluded).
std::vector<std::string> key_sequence(const Architecture& arch,
                                      Canonicalization mode = Canonicalization::kFull);

/// Hash of the canonical key sequence including block boundaries.
std::uint64_t architecture_hash(const Architecture& arch);

std::int64_t param_count(const Architecture& arch);

/// One-line summary such as "Stem(32) > Basicblock(64) > ...".
std::string describe(const Architecture& arch);

}  // namespace archgen
