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

#include <filesystem>
#include <string>

#include "archgen/fcn.hpp"
#include "archgen/gpt.hpp"
#include "archgen/serialize.hpp"
#include "archgen/vocab.hpp"

namespace archgen {

// Container layout: 8-byte magic "ARCHGEN\0", u32 format version, u64 header
// length, UTF-8 JSON header, then the flat parameter array in native
// little-endian scalars.
inline constexpr std::uint32_t kCheckpointVersion = 1;

Json vocabulary_to_json(const Vocabulary& vocab);
Vocabulary vocabulary_from_json(const Json& j);

template <typename Scalar>
struct GptCheckpoint {
  GptModel<Scalar> model;
  Vocabulary vocab;
};

template <typename Scalar>
struct FcnCheckpoint {
  FcnModel<Scalar> model;
  Vocabulary vocab;
};

template <typename Scalar>
void save_gpt(const std::filesystem::path& path, const GptModel<Scalar>& model,
              const Vocabulary& vocab);
/// Throws DataError on a missing, truncated or foreign file. Parameters stored
/// at another precision are converted.
template <typename Scalar>
GptCheckpoint<Scalar> load_gpt(const std::filesystem::path& path);

template <typename Scalar>
void save_fcn(const std::filesystem::path& path, const FcnModel<Scalar>& model,
              const Vocabulary& vocab);
template <typename Scalar>
FcnCheckpoint<Scalar> load_fcn(const std::filesystem::path& path);

/// Parsed JSON header of any checkpoint.
Json read_checkpoint_header(const std::filesystem::path& path);

/// FNV-1a digest of a file's bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

}  // namespace archgen
