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
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace archgen {

struct Shape3 {
  int c = 0;
  int h = 0;
  int w = 0;

  auto operator<=>(const Shape3&) const = default;
  std::int64_t numel() const { return std::int64_t{c} * h * w; }
};

enum class LayerCategory { kConv, kPool, kFC, kOther };
enum class PoolType { kMax, kAvg };

// Key derivation mode for layer structures.
enum class Canonicalization { kFull, kChannelsOnly };

struct Padding4 {
  int top = 0;
  int bottom = 0;
  int left = 0;
  int right = 0;

  auto operator<=>(const Padding4&) const = default;
};

using Pair2 = std::array<int, 2>;

/// One network layer. Optional fields are present exactly for the categories
/// that carry them:
///
///   Conv : kernel stride padding dilation groups bias_used
///   Pool : pool_type kernel stride padding dilation bias_used
///   FC   : (sizes only)
///   Other: name value
///
/// `id` is the position within the owning architecture and never takes part
/// in structural comparisons.
struct LayerDescriptor {
  LayerCategory category = LayerCategory::kOther;
  int id = 0;
  std::optional<PoolType> pool_type;
  std::optional<std::string> name;
  Shape3 in_size;
  Shape3 out_size;
  std::optional<Pair2> kernel;
  std::optional<Pair2> stride;
  std::optional<Padding4> padding;
  std::optional<int> dilation;
  std::optional<int> groups;
  std::optional<std::vector<double>> value;
  std::optional<bool> bias_used;
};

// Structural equality (ignores id).
bool same_structure(const LayerDescriptor& a, const LayerDescriptor& b);

LayerDescriptor make_conv(Shape3 in, int filters, Pair2 kernel, Pair2 stride,
                          Padding4 padding, int dilation = 1, int groups = 1,
                          bool bias = false);
LayerDescriptor make_pool(PoolType type, Shape3 in, Pair2 kernel, Pair2 stride,
                          int dilation = 1);
LayerDescriptor make_fc(Shape3 in, int out_features);
LayerDescriptor make_other(const std::string& name, Shape3 in,
                           std::vector<double> value = {});

inline Padding4 uniform_padding(int p) { return {p, p, p, p}; }

/// Throws EncodingError when field presence does not match the category, and
/// ShapeError when a geometric invariant (pool padding, group divisibility,
/// positive sizes) is violated.
void check_layer(const LayerDescriptor& layer);

/// Output size implied by in_size and the layer geometry.
Shape3 infer_out_size(const LayerDescriptor& layer);

/// Sliding-window output length for one spatial axis; 0 or less means no
/// valid window position.
inline int window_output(int size, int kernel, int stride, int pad_lo, int pad_hi,
                         int dilation) {
  const int span = dilation * (kernel - 1) + 1;
  const int padded = size + pad_lo + pad_hi;
  if (padded < span) return 0;
  return (padded - span) / stride + 1;
}

/// Position-independent key; equal keys iff all category-relevant fields agree.
std::string canonical_key(const LayerDescriptor& layer,
                          Canonicalization mode = Canonicalization::kFull);

/// Trainable parameter count of a single layer (conv/bn/fc weights + biases).
std::int64_t layer_param_count(const LayerDescriptor& layer);

const char* to_string(LayerCategory c);
const char* to_string(PoolType p);
const char* to_string(Canonicalization c);
Canonicalization canonicalization_from_string(const std::string& s);

/// Other-layer names with known shape behaviour. Unregistered names are
/// accepted and treated as shape preserving.
bool is_registered_other(const std::string& name);

}  // namespace archgen
