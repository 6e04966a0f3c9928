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

#include "archgen/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

#include "archgen/errors.hpp"

namespace archgen {

namespace {
std::atomic<int> g_level{static_cast<int>(LogLevel::kInfo)};
std::ostream* g_sink = &std::cerr;
std::mutex g_mutex;

const char* level_name(LogLevel l) {
  switch (l) {
    case LogLevel::kError: return "error";
    case LogLevel::kWarn: return "warn";
    case LogLevel::kInfo: return "info";
    case LogLevel::kDebug: return "debug";
  }
  return "?";
}
}  // namespace

LogLevel log_level_from_string(const std::string& s) {
  if (s == "error") return LogLevel::kError;
  if (s == "warn") return LogLevel::kWarn;
  if (s == "info") return LogLevel::kInfo;
  if (s == "debug") return LogLevel::kDebug;
  throw ConfigError("unknown log level '" + s + "'");
}

void set_log_level(LogLevel level) { g_level = static_cast<int>(level); }
LogLevel log_level() { return static_cast<LogLevel>(g_level.load()); }

void set_log_sink(std::ostream* sink) {
  std::lock_guard lock(g_mutex);
  g_sink = sink ? sink : &std::cerr;
}

void log(LogLevel level, const std::string& message) {
  if (static_cast<int>(level) > g_level.load()) return;
  std::lock_guard lock(g_mutex);
  *g_sink << "[" << level_name(level) << "] " << message << '\n' << std::flush;
}

}  // namespace archgen
