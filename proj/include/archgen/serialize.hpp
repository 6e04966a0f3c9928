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

#include <json.hpp>

#include "archgen/architecture.hpp"

namespace archgen {

using Json = nlohmann::json;

void to_json(Json& j, const Shape3& s);
void from_json(const Json& j, Shape3& s);
void to_json(Json& j, const LayerDescriptor& l);
void from_json(const Json& j, LayerDescriptor& l);
void to_json(Json& j, const Block& b);
void from_json(const Json& j, Block& b);
void to_json(Json& j, const RepairAction& r);
void from_json(const Json& j, RepairAction& r);

/// {input_shape, num_classes, blocks}. The head is derived, not stored.
Json architecture_to_json(const Architecture& arch);
/// Parses and validates (without depth bounds). Throws DataError subclasses.
Architecture architecture_from_json(const Json& j);

}  // namespace archgen
