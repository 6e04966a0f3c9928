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

#include "archgen/architecture.hpp"

#include <algorithm>
#include <sstream>

#include "archgen/errors.hpp"
#include "archgen/hash.hpp"

namespace archgen {

namespace {

constexpr const char* kKindNames[] = {
    "ConvNormActivation", "SqueezeExcitation", "Inception",        "Avgpool",
    "ResBottleneckBlock", "Stem",              "Bottleneck(ResNet)", "Basicblock",
    "Bottleneck(ResNeXt)", "InvertedResidual", "Bottleneck(WideResNet)", "Maxpool",
    "BatchNormal",        "Relu",              "Conv",             "Cell",
};

const std::vector<double> kBatchNormValue = {1e-5, 0.1};

// Largest divisor of n taken from the candidate list, in order.
int pick_groups(int n, std::initializer_list<int> candidates) {
  for (int g : candidates) {
    if (n % g == 0) return g;
  }
  return 1;
}

class LayerChain {
 public:
  explicit LayerChain(Shape3 in) : shape_(in) {}

  LayerChain& conv(int filters, int k, int s = 1, int groups = 1, bool bias = false) {
    const int p = k / 2;
    push(make_conv(shape_, filters, {k, k}, {s, s}, uniform_padding(p), 1, groups, bias));
    return *this;
  }
  LayerChain& bn() { push(make_other("batchnorm", shape_, kBatchNormValue)); return *this; }
  LayerChain& relu() { push(make_other("relu", shape_)); return *this; }
  LayerChain& sigmoid() { push(make_other("sigmoid", shape_)); return *this; }
  LayerChain& pool(PoolType t) {
    push(make_pool(t, shape_, {2, 2}, {2, 2}));
    return *this;
  }

  Shape3 shape() const { return shape_; }
  std::vector<LayerDescriptor> take() { return std::move(layers_); }

 private:
  void push(LayerDescriptor l) {
    shape_ = l.out_size;
    layers_.push_back(std::move(l));
  }

  Shape3 shape_;
  std::vector<LayerDescriptor> layers_;
};

}  // namespace

const char* to_string(BlockKind k) {
  const int i = kind_index(k);
  if (i < 0 || i > kLibrarySize) return "?";
  return kKindNames[i];
}

BlockKind block_kind_from_string(const std::string& s) {
  for (int i = 0; i <= kLibrarySize; ++i) {
    if (s == kKindNames[i]) return kind_from_index(i);
  }
  throw EncodingError("unknown block kind '" + s + "'");
}

const char* to_string(RepairKind k) {
  switch (k) {
    case RepairKind::kFallback: return "fallback";
    case RepairKind::kWidth: return "width";
    case RepairKind::kReshape: return "reshape";
  }
  return "?";
}

std::size_t Architecture::layer_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.layers.size();
  return n;
}

std::vector<BlockKind> Architecture::kinds() const {
  std::vector<BlockKind> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) out.push_back(b.kind);
  return out;
}

BlockLibrary::BlockLibrary()
    : entries_{
          {BlockKind::kConvNormActivation, "Conv3x3-BN-ReLU", "EfficientNet"},
          {BlockKind::kSqueezeExcitation, "Conv1x1(bias)-ReLU-Conv1x1(bias)-Sigmoid", "EfficientNet"},
          {BlockKind::kInception, "Conv5x5-ReLU-Conv1x1-ReLU-Conv3x3-ReLU", "GoogleNet"},
          {BlockKind::kAvgpool, "AvgPool2x2/2", "GoogleNet"},
          {BlockKind::kResBottleneckBlock, "Conv1x1-BN-ReLU-GConv3x3-BN-ReLU-Conv1x1-BN", "RegNet"},
          {BlockKind::kStem, "Conv3x3/2-BN-ReLU", "RegNet"},
          {BlockKind::kBottleneckResNet, "Conv1x1-BN-ReLU-Conv3x3-BN-ReLU-Conv1x1-BN-ReLU", "ResNet"},
          {BlockKind::kBasicblock, "Conv3x3-BN-ReLU-Conv3x3-BN-ReLU", "ResNet"},
          {BlockKind::kBottleneckResNeXt, "Conv1x1-BN-ReLU-GConv3x3-BN-ReLU-Conv1x1-BN-ReLU", "ResNext"},
          {BlockKind::kInvertedResidual, "Conv1x1-BN-ReLU-DWConv3x3-BN-Conv1x1-BN-ReLU", "ShuffleNet"},
          {BlockKind::kBottleneckWideResNet, "BN-ReLU-Conv3x3-BN-ReLU-Conv3x3", "wide-ResNet"},
          {BlockKind::kMaxpool, "MaxPool2x2/2", "other"},
          {BlockKind::kBatchNormal, "BN", "other"},
          {BlockKind::kRelu, "ReLU", "other"},
          {BlockKind::kConv, "Conv3x3(bias)", "other"},
      } {}

bool BlockLibrary::channel_preserving(BlockKind kind) {
  return kind == BlockKind::kAvgpool || kind == BlockKind::kMaxpool ||
         kind == BlockKind::kBatchNormal || kind == BlockKind::kRelu;
}

bool BlockLibrary::downsampling(BlockKind kind) {
  return kind == BlockKind::kAvgpool || kind == BlockKind::kMaxpool || kind == BlockKind::kStem;
}

bool BlockLibrary::instantiable(BlockKind kind, Shape3 in) {
  if (!in_library(kind)) return false;
  if (in.c <= 0 || in.h <= 0 || in.w <= 0) return false;
  if (kind == BlockKind::kAvgpool || kind == BlockKind::kMaxpool) {
    return in.h >= 2 && in.w >= 2;
  }
  return true;
}

std::optional<Block> BlockLibrary::instantiate(BlockKind kind, int width, Shape3 in) const {
  if (!instantiable(kind, in)) return std::nullopt;
  if (channel_preserving(kind)) width = in.c;
  if (width <= 0) return std::nullopt;

  LayerChain chain(in);
  switch (kind) {
    case BlockKind::kConvNormActivation:
      chain.conv(width, 3).bn().relu();
      break;
    case BlockKind::kSqueezeExcitation:
      chain.conv(width, 1, 1, 1, true).relu().conv(width, 1, 1, 1, true).sigmoid();
      break;
    case BlockKind::kInception:
      chain.conv(width, 5).relu().conv(width, 1).relu().conv(width, 3).relu();
      break;
    case BlockKind::kAvgpool:
      chain.pool(PoolType::kAvg);
      break;
    case BlockKind::kResBottleneckBlock:
      chain.conv(width, 1).bn().relu()
          .conv(width, 3, 1, pick_groups(width, {8, 4, 2, 1})).bn().relu()
          .conv(width, 1).bn();
      break;
    case BlockKind::kStem:
      chain.conv(width, 3, 2).bn().relu();
      break;
    case BlockKind::kBottleneckResNet: {
      const int mid = std::max(1, width / 4);
      chain.conv(mid, 1).bn().relu().conv(mid, 3).bn().relu().conv(width, 1).bn().relu();
      break;
    }
    case BlockKind::kBasicblock:
      chain.conv(width, 3).bn().relu().conv(width, 3).bn().relu();
      break;
    case BlockKind::kBottleneckResNeXt: {
      // Even mid width keeps the grouped conv at >= 2 groups.
      const int mid = 2 * std::max(1, width / 4);
      chain.conv(mid, 1).bn().relu()
          .conv(mid, 3, 1, pick_groups(mid, {32, 16, 8, 4, 2})).bn().relu()
          .conv(width, 1).bn().relu();
      break;
    }
    case BlockKind::kInvertedResidual:
      chain.conv(width, 1).bn().relu().conv(width, 3, 1, width).bn().conv(width, 1).bn().relu();
      break;
    case BlockKind::kBottleneckWideResNet:
      chain.bn().relu().conv(width, 3).bn().relu().conv(width, 3);
      break;
    case BlockKind::kMaxpool:
      chain.pool(PoolType::kMax);
      break;
    case BlockKind::kBatchNormal:
      chain.bn();
      break;
    case BlockKind::kRelu:
      chain.relu();
      break;
    case BlockKind::kConv:
      chain.conv(width, 3, 1, 1, true);
      break;
    case BlockKind::kCell:
      return std::nullopt;
  }
  Block b;
  b.kind = kind;
  b.layers = chain.take();
  b.width = b.layers.back().out_size.c;
  return b;
}

std::optional<BlockKind> BlockLibrary::match(std::span<const LayerDescriptor> layers) const {
  if (layers.empty()) return std::nullopt;
  const Shape3 in = layers.front().in_size;
  const int width = layers.back().out_size.c;
  for (const auto& e : entries_) {
    auto candidate = instantiate(e.kind, width, in);
    if (!candidate || candidate->layers.size() != layers.size()) continue;
    bool same = true;
    for (std::size_t i = 0; i < layers.size() && same; ++i) {
      same = same_structure(candidate->layers[i], layers[i]);
    }
    if (same) return e.kind;
  }
  return std::nullopt;
}

const BlockLibrary& default_library() {
  static const BlockLibrary lib;
  return lib;
}

void finalize(Architecture& arch) {
  int id = 0;
  for (auto& b : arch.blocks) {
    for (auto& l : b.layers) l.id = id++;
  }
  const Shape3 last = arch.blocks.empty() ? arch.input_shape : arch.blocks.back().out_size();
  arch.head = make_fc({static_cast<int>(last.numel()), 1, 1}, arch.num_classes);
  arch.head.id = id;
}

Architecture assemble(std::span<const BlockSpec> specs, Shape3 input_shape, int num_classes,
                      std::vector<RepairAction>* repairs) {
  const auto& lib = default_library();
  Architecture arch;
  arch.input_shape = input_shape;
  arch.num_classes = num_classes;
  Shape3 shape = input_shape;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& spec = specs[i];
    auto block = lib.instantiate(spec.kind, spec.width, shape);
    if (!block) {
      block = lib.instantiate(BlockKind::kConv, shape.c, shape);
      if (repairs) {
        repairs->push_back({i, RepairKind::kFallback, spec.kind, BlockKind::kConv, spec.width,
                            shape.c});
      }
    }
    shape = block->out_size();
    arch.blocks.push_back(std::move(*block));
  }
  finalize(arch);
  return arch;
}

Architecture rechain(std::vector<Block> blocks, Shape3 input_shape, int num_classes,
                     std::vector<RepairAction>* repairs) {
  const auto& lib = default_library();
  Architecture arch;
  arch.input_shape = input_shape;
  arch.num_classes = num_classes;
  Shape3 shape = input_shape;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    Block& original = blocks[i];
    if (!original.layers.empty() && original.in_size() == shape) {
      shape = original.out_size();
      arch.blocks.push_back(std::move(original));
      continue;
    }
    std::optional<Block> block;
    if (in_library(original.kind)) block = lib.instantiate(original.kind, original.width, shape);
    RepairKind how = RepairKind::kReshape;
    if (!block) {
      block = lib.instantiate(BlockKind::kConv, shape.c, shape);
      how = RepairKind::kFallback;
    } else if (block->width != original.width) {
      how = RepairKind::kWidth;
    }
    if (repairs) repairs->push_back({i, how, original.kind, block->kind, original.width, block->width});
    shape = block->out_size();
    arch.blocks.push_back(std::move(*block));
  }
  finalize(arch);
  return arch;
}

std::vector<BlockSpec> specs_of(const Architecture& arch) {
  std::vector<BlockSpec> out;
  out.reserve(arch.blocks.size());
  for (const auto& b : arch.blocks) out.push_back({b.kind, b.width});
  return out;
}

void validate(const Architecture& arch, std::optional<DepthBounds> depth) {
  if (arch.blocks.empty()) throw EncodingError("architecture has no blocks");
  if (depth && !depth->contains(arch.blocks.size())) {
    throw ShapeError("depth " + std::to_string(arch.blocks.size()) + " outside [" +
                     std::to_string(depth->min) + ", " + std::to_string(depth->max) + "]");
  }
  if (arch.num_classes <= 0) throw ShapeError("num_classes must be positive");
  const auto& lib = default_library();
  Shape3 shape = arch.input_shape;
  std::size_t index = 0;
  for (const auto& b : arch.blocks) {
    if (b.layers.empty()) throw EncodingError("empty block");
    for (const auto& l : b.layers) {
      check_layer(l);
      if (l.in_size != shape) throw ShapeError("layer input does not chain", index);
      if (infer_out_size(l) != l.out_size) throw ShapeError("inconsistent out_size", index);
      shape = l.out_size;
      ++index;
    }
    if (b.width != b.out_size().c) throw ShapeError("block width differs from its output channels");
    if (in_library(b.kind)) {
      if (lib.match(b.layers) != b.kind) {
        throw EncodingError(std::string("layers do not match the ") + to_string(b.kind) +
                            " template");
      }
    } else if (lib.match(b.layers)) {
      throw EncodingError("cell block duplicates a library template");
    }
  }
  check_layer(arch.head);
  if (arch.head.category != LayerCategory::kFC) throw EncodingError("head must be fc");
  if (arch.head.in_size != Shape3{static_cast<int>(shape.numel()), 1, 1}) {
    throw ShapeError("head input does not match flattened features");
  }
  if (arch.head.out_size != Shape3{arch.num_classes, 1, 1}) {
    throw ShapeError("head output does not match class count");
  }
}

std::vector<std::string> key_sequence(const Architecture& arch, Canonicalization mode) {
  std::vector<std::string> keys;
  keys.reserve(arch.layer_count());
  for (const auto& b : arch.blocks) {
    for (const auto& l : b.layers) keys.push_back(canonical_key(l, mode));
  }
  return keys;
}

std::uint64_t architecture_hash(const Architecture& arch) {
  std::uint64_t h = kFnvOffset;
  for (const auto& b : arch.blocks) {
    h = fnv1a("#", h);
    for (const auto& l : b.layers) {
      h = fnv1a(canonical_key(l), h);
      h = fnv1a(";", h);
    }
  }
  return fnv1a(canonical_key(arch.head), h);
}

std::int64_t param_count(const Architecture& arch) {
  std::int64_t n = layer_param_count(arch.head);
  for (const auto& b : arch.blocks) {
    for (const auto& l : b.layers) n += layer_param_count(l);
  }
  return n;
}

std::string describe(const Architecture& arch) {
  std::ostringstream os;
  for (std::size_t i = 0; i < arch.blocks.size(); ++i) {
    if (i) os << " > ";
    os << to_string(arch.blocks[i].kind) << '(' << arch.blocks[i].width << ')';
  }
  return os.str();
}

}  // namespace archgen
