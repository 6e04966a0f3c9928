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
#include <ostream>
#include <string>
#include <vector>

#include "archgen/architecture.hpp"

namespace archgen {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitInternal = 3 };

/// Runs the command line `args` (program name excluded). Never throws;
/// failures map onto the exit codes above.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Architecture from a JSON document: a bare architecture or a corpus
/// record carrying one under "arch".
Architecture read_architecture(const std::filesystem::path& path);
void write_architecture(const std::filesystem::path& path, const Architecture& arch);

/// Where a command that wrote `out` keeps its manifest.
std::filesystem::path manifest_path_for(const std::string& command, const std::filesystem::path& out);

}  // namespace archgen
