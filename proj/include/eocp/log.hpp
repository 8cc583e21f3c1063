// Copyright 2026 The eocp Authors
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

#ifndef EOCP_LOG_HPP_
#define EOCP_LOG_HPP_

#include <cstdlib>
#include <iostream>
#include <string>

namespace eocp {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

/// Level from the EOCP_LOG_LEVEL environment variable (error|info|debug),
/// defaulting to info.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("EOCP_LOG_LEVEL");
    if (!env) return LogLevel::Info;
    const std::string s(env);
    if (s == "error") return LogLevel::Error;
    if (s == "debug") return LogLevel::Debug;
    return LogLevel::Info;
  }();
  return level;
}

inline void log_msg(LogLevel lvl, const std::string& msg) {
  if (static_cast<int>(lvl) <= static_cast<int>(log_level())) {
    const char* tag = lvl == LogLevel::Error ? "error" : (lvl == LogLevel::Info ? "info" : "debug");
    std::cerr << "[eocp:" << tag << "] " << msg << '\n';
  }
}

}  // namespace eocp

#endif  // EOCP_LOG_HPP_
