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

#include "archgen/serialize.hpp"

#include "archgen/errors.hpp"

namespace archgen {

void to_json(Json& j, const Shape3& s) { j = Json::array({s.c, s.h, s.w}); }

void from_json(const Json& j, Shape3& s) {
  if (!j.is_array() || j.size() != 3) throw EncodingError("shape must be a 3-element array");
  s = {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

void to_json(Json& j, const LayerDescriptor& l) {
  j = Json::object();
  j["id"] = l.id;
  j["category"] = to_string(l.category);
  if (l.pool_type) j["type"] = to_string(*l.pool_type);
  if (l.name) j["name"] = *l.name;
  j["in_size"] = l.in_size;
  j["out_size"] = l.out_size;
  if (l.kernel) j["kernel"] = *l.kernel;
  if (l.stride) j["stride"] = *l.stride;
  if (l.padding) {
    const auto& p = *l.padding;
    j["padding"] = Json::array({p.top, p.bottom, p.left, p.right});
  }
  if (l.dilation) j["dilation"] = *l.dilation;
  if (l.groups) j["groups"] = *l.groups;
  if (l.value) j["value"] = *l.value;
  if (l.bias_used) j["bias_used"] = *l.bias_used;
}

void from_json(const Json& j, LayerDescriptor& l) {
  l = LayerDescriptor{};
  const std::string cat = j.at("category").get<std::string>();
  if (cat == "conv") l.category = LayerCategory::kConv;
  else if (cat == "pool") l.category = LayerCategory::kPool;
  else if (cat == "fc") l.category = LayerCategory::kFC;
  else if (cat == "other") l.category = LayerCategory::kOther;
  else throw EncodingError("unknown layer category '" + cat + "'");
  l.id = j.value("id", 0);
  if (j.contains("type")) {
    const auto t = j["type"].get<std::string>();
    if (t == "MAX") l.pool_type = PoolType::kMax;
    else if (t == "AVG") l.pool_type = PoolType::kAvg;
    else throw EncodingError("unknown pool type '" + t + "'");
  }
  if (j.contains("name")) l.name = j["name"].get<std::string>();
  l.in_size = j.at("in_size").get<Shape3>();
  l.out_size = j.at("out_size").get<Shape3>();
  if (j.contains("kernel")) l.kernel = j["kernel"].get<Pair2>();
  if (j.contains("stride")) l.stride = j["stride"].get<Pair2>();
  if (j.contains("padding")) {
    const auto p = j["padding"].get<std::array<int, 4>>();
    l.padding = Padding4{p[0], p[1], p[2], p[3]};
  }
  if (j.contains("dilation")) l.dilation = j["dilation"].get<int>();
  if (j.contains("groups")) l.groups = j["groups"].get<int>();
  if (j.contains("value")) l.value = j["value"].get<std::vector<double>>();
  if (j.contains("bias_used")) l.bias_used = j["bias_used"].get<bool>();
}

void to_json(Json& j, const Block& b) {
  j = Json{{"kind", to_string(b.kind)}, {"width", b.width}, {"layers", b.layers}};
}

void from_json(const Json& j, Block& b) {
  b.kind = block_kind_from_string(j.at("kind").get<std::string>());
  b.width = j.at("width").get<int>();
  b.layers = j.at("layers").get<std::vector<LayerDescriptor>>();
}

void to_json(Json& j, const RepairAction& r) {
  j = Json{{"index", r.index},         {"action", to_string(r.kind)},
           {"from_kind", to_string(r.from_kind)}, {"to_kind", to_string(r.to_kind)},
           {"from_width", r.from_width}, {"to_width", r.to_width}};
}

void from_json(const Json& j, RepairAction& r) {
  r.index = j.at("index").get<std::size_t>();
  const auto a = j.at("action").get<std::string>();
  if (a == "fallback") r.kind = RepairKind::kFallback;
  else if (a == "width") r.kind = RepairKind::kWidth;
  else if (a == "reshape") r.kind = RepairKind::kReshape;
  else throw EncodingError("unknown repair action '" + a + "'");
  r.from_kind = block_kind_from_string(j.at("from_kind").get<std::string>());
  r.to_kind = block_kind_from_string(j.at("to_kind").get<std::string>());
  r.from_width = j.at("from_width").get<int>();
  r.to_width = j.at("to_width").get<int>();
}

Json architecture_to_json(const Architecture& arch) {
  return Json{{"input_shape", arch.input_shape},
              {"num_classes", arch.num_classes},
              {"blocks", arch.blocks}};
}

Architecture architecture_from_json(const Json& j) {
  Architecture arch;
  try {
    arch.input_shape = j.at("input_shape").get<Shape3>();
    arch.num_classes = j.at("num_classes").get<int>();
    arch.blocks = j.at("blocks").get<std::vector<Block>>();
  } catch (const Json::exception& e) {
    throw EncodingError(std::string("malformed architecture: ") + e.what());
  }
  finalize(arch);
  validate(arch, std::nullopt);
  return arch;
}

}  // namespace archgen
