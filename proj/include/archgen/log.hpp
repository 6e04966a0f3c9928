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

#include <ostream>
#include <string>

namespace archgen {

enum class LogLevel { kError = 0, kWarn, kInfo, kDebug };

LogLevel log_level_from_string(const std::string& s);
void set_log_level(LogLevel level);
LogLevel log_level();
/// Defaults to std::cerr.
void set_log_sink(std::ostream* sink);

void log(LogLevel level, const std::string& message);
inline void log_info(const std::string& m) { log(LogLevel::kInfo, m); }
inline void log_warn(const std::string& m) { log(LogLevel::kWarn, m); }
inline void log_debug(const std::string& m) { log(LogLevel::kDebug, m); }

}  // namespace archgen
