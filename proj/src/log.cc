// Copyright 2026 The REMI Authors.
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

#include "remi/log.h"

#include <atomic>
#include <iostream>

namespace remi {

namespace {
std::atomic<bool> g_quiet{false};
}

void warn(std::string_view message) {
  if (!g_quiet) std::cerr << "warning: " << message << '\n';
}

void info(std::string_view message) {
  if (!g_quiet) std::cerr << message << '\n';
}

void set_log_quiet(bool quiet) { g_quiet = quiet; }

}  // namespace remi
