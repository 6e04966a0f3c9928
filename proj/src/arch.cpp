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

#include "archgen/arch.hpp"

#include <cstdio>
#include <map>
#include <sstream>

#include "archgen/errors.hpp"

namespace archgen {

namespace {

enum class OtherShape { kPreserve, kFlatten };

const std::map<std::string, OtherShape>& other_registry() {
  static const std::map<std::string, OtherShape> registry = {
      {"relu", OtherShape::kPreserve},
      {"batchnorm", OtherShape::kPreserve},
      {"sigmoid", OtherShape::kPreserve},
      {"maxpool_same", OtherShape::kPreserve},
      {"flatten", OtherShape::kFlatten},
  };
  return registry;
}

std::string fmt_shape(const Shape3& s, Canonicalization mode) {
  if (mode == Canonicalization::kChannelsOnly) return std::to_string(s.c);
  return std::to_string(s.c) + "x" + std::to_string(s.h) + "x" + std::to_string(s.w);
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void require(bool ok, const std::string& field, const LayerDescriptor& layer) {
  if (!ok) {
    throw EncodingError(std::string("field '") + field + "' presence does not match " +
                        to_string(layer.category) + " layer (id " +
                        std::to_string(layer.id) + ")");
  }
}

bool positive(const Shape3& s) { return s.c > 0 && s.h > 0 && s.w > 0; }

}  // namespace

const char* to_string(LayerCategory c) {
  switch (c) {
    case LayerCategory::kConv: return "conv";
    case LayerCategory::kPool: return "pool";
    case LayerCategory::kFC: return "fc";
    case LayerCategory::kOther: return "other";
  }
  return "?";
}

const char* to_string(PoolType p) { return p == PoolType::kMax ? "MAX" : "AVG"; }

const char* to_string(Canonicalization c) {
  return c == Canonicalization::kFull ? "full" : "channels_only";
}

Canonicalization canonicalization_from_string(const std::string& s) {
  if (s == "full") return Canonicalization::kFull;
  if (s == "channels_only") return Canonicalization::kChannelsOnly;
  throw ConfigError("unknown canonicalization '" + s + "'");
}

bool is_registered_other(const std::string& name) {
  return other_registry().count(name) != 0;
}

bool same_structure(const LayerDescriptor& a, const LayerDescriptor& b) {
  return a.category == b.category && a.pool_type == b.pool_type && a.name == b.name &&
         a.in_size == b.in_size && a.out_size == b.out_size && a.kernel == b.kernel &&
         a.stride == b.stride && a.padding == b.padding && a.dilation == b.dilation &&
         a.groups == b.groups && a.value == b.value && a.bias_used == b.bias_used;
}

LayerDescriptor make_conv(Shape3 in, int filters, Pair2 kernel, Pair2 stride,
                          Padding4 padding, int dilation, int groups, bool bias) {
  LayerDescriptor l;
  l.category = LayerCategory::kConv;
  l.in_size = in;
  l.out_size = {filters, 1, 1};
  l.kernel = kernel;
  l.stride = stride;
  l.padding = padding;
  l.dilation = dilation;
  l.groups = groups;
  l.bias_used = bias;
  l.out_size = infer_out_size(l);
  check_layer(l);
  return l;
}

LayerDescriptor make_pool(PoolType type, Shape3 in, Pair2 kernel, Pair2 stride,
                          int dilation) {
  LayerDescriptor l;
  l.category = LayerCategory::kPool;
  l.pool_type = type;
  l.in_size = in;
  l.kernel = kernel;
  l.stride = stride;
  l.padding = Padding4{};
  l.dilation = dilation;
  l.bias_used = false;
  l.out_size = infer_out_size(l);
  return l;
}

LayerDescriptor make_fc(Shape3 in, int out_features) {
  LayerDescriptor l;
  l.category = LayerCategory::kFC;
  l.in_size = in;
  l.out_size = {out_features, 1, 1};
  l.out_size = infer_out_size(l);
  return l;
}

LayerDescriptor make_other(const std::string& name, Shape3 in, std::vector<double> value) {
  LayerDescriptor l;
  l.category = LayerCategory::kOther;
  l.name = name;
  l.in_size = in;
  l.value = std::move(value);
  l.out_size = infer_out_size(l);
  return l;
}

void check_layer(const LayerDescriptor& layer) {
  const bool is_conv = layer.category == LayerCategory::kConv;
  const bool is_pool = layer.category == LayerCategory::kPool;
  const bool is_other = layer.category == LayerCategory::kOther;
  const bool windowed = is_conv || is_pool;

  require(layer.pool_type.has_value() == is_pool, "type", layer);
  require(layer.name.has_value() == is_other, "name", layer);
  require(layer.kernel.has_value() == windowed, "kernel", layer);
  require(layer.stride.has_value() == windowed, "stride", layer);
  require(layer.padding.has_value() == windowed, "padding", layer);
  require(layer.dilation.has_value() == windowed, "dilation", layer);
  require(layer.groups.has_value() == is_conv, "groups", layer);
  require(layer.value.has_value() == is_other, "value", layer);
  require(layer.bias_used.has_value() == windowed, "bias_used", layer);
  if (layer.id < 0) throw EncodingError("negative layer id");

  if (!positive(layer.in_size)) throw ShapeError("non-positive in_size");
  if (!positive(layer.out_size)) throw ShapeError("non-positive out_size");
  if (windowed) {
    const auto& k = *layer.kernel;
    const auto& s = *layer.stride;
    const auto& p = *layer.padding;
    if (k[0] < 1 || k[1] < 1 || s[0] < 1 || s[1] < 1 || *layer.dilation < 1) {
      throw ShapeError("kernel, stride and dilation must be positive");
    }
    if (p.top < 0 || p.bottom < 0 || p.left < 0 || p.right < 0) {
      throw ShapeError("negative padding");
    }
    if (is_pool && p != Padding4{}) throw ShapeError("pooling padding must be 0");
  }
  if (is_conv) {
    if (*layer.groups < 1) throw ShapeError("groups must be positive");
    if (layer.in_size.c % *layer.groups != 0) {
      throw ShapeError("input channels not divisible by groups");
    }
  }
}

Shape3 infer_out_size(const LayerDescriptor& layer) {
  switch (layer.category) {
    case LayerCategory::kConv:
    case LayerCategory::kPool: {
      if (!layer.kernel || !layer.stride || !layer.padding || !layer.dilation) {
        throw EncodingError("window geometry missing");
      }
      const auto& k = *layer.kernel;
      const auto& s = *layer.stride;
      const auto& p = *layer.padding;
      const int d = *layer.dilation;
      const int h = window_output(layer.in_size.h, k[0], s[0], p.top, p.bottom, d);
      const int w = window_output(layer.in_size.w, k[1], s[1], p.left, p.right, d);
      const int c = layer.category == LayerCategory::kConv ? layer.out_size.c : layer.in_size.c;
      if (h <= 0 || w <= 0 || c <= 0) {
        throw ShapeError("non-positive output dimension for " +
                         std::string(to_string(layer.category)) + " layer");
      }
      return {c, h, w};
    }
    case LayerCategory::kFC:
      if (layer.out_size.c <= 0) throw ShapeError("non-positive fc output");
      return {layer.out_size.c, 1, 1};
    case LayerCategory::kOther: {
      const auto it = layer.name ? other_registry().find(*layer.name) : other_registry().end();
      if (it != other_registry().end() && it->second == OtherShape::kFlatten) {
        return {static_cast<int>(layer.in_size.numel()), 1, 1};
      }
      return layer.in_size;
    }
  }
  throw EncodingError("unknown layer category");
}

std::string canonical_key(const LayerDescriptor& layer, Canonicalization mode) {
  check_layer(layer);
  std::ostringstream os;
  os << to_string(layer.category);
  if (layer.pool_type) os << '|' << to_string(*layer.pool_type);
  if (layer.name) os << '|' << *layer.name;
  os << "|in=" << fmt_shape(layer.in_size, mode) << "|out=" << fmt_shape(layer.out_size, mode);
  if (layer.kernel) os << "|k=" << (*layer.kernel)[0] << 'x' << (*layer.kernel)[1];
  if (layer.stride) os << "|s=" << (*layer.stride)[0] << 'x' << (*layer.stride)[1];
  if (layer.padding) {
    const auto& p = *layer.padding;
    os << "|p=" << p.top << ',' << p.bottom << ',' << p.left << ',' << p.right;
  }
  if (layer.dilation) os << "|d=" << *layer.dilation;
  if (layer.groups) os << "|g=" << *layer.groups;
  if (layer.value) {
    os << "|v=";
    for (std::size_t i = 0; i < layer.value->size(); ++i) {
      if (i) os << ',';
      os << fmt_double((*layer.value)[i]);
    }
  }
  if (layer.bias_used) os << "|b=" << (*layer.bias_used ? 1 : 0);
  return os.str();
}

std::int64_t layer_param_count(const LayerDescriptor& layer) {
  switch (layer.category) {
    case LayerCategory::kConv: {
      const auto& k = *layer.kernel;
      const std::int64_t in_per_group = layer.in_size.c / *layer.groups;
      std::int64_t n = std::int64_t{layer.out_size.c} * in_per_group * k[0] * k[1];
      if (*layer.bias_used) n += layer.out_size.c;
      return n;
    }
    case LayerCategory::kFC:
      return layer.in_size.numel() * layer.out_size.c + layer.out_size.c;
    case LayerCategory::kOther:
      return layer.name && *layer.name == "batchnorm" ? 2 * std::int64_t{layer.in_size.c} : 0;
    case LayerCategory::kPool:
      return 0;
  }
  return 0;
}

}  // namespace archgen
