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

#pragma once

#include <filesystem>
#include <string>

#include "remi/config.h"

namespace remi {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumeric = 4,
};

// Runs one of ingest, synth, train, eval, diagnose, sweep. Errors propagate
// as exceptions; run_cli maps them onto exit codes.
void dispatch(const std::string& command, const RunConfig& config);

// Git-style content hash of a corpus directory: the SHA-1 of a tree-like
// listing of the blob hashes of items.tsv, users.tsv and sequences.tsv.
std::string corpus_content_hash(const std::filesystem::path& corpus_dir);

// Full command line entry point. Returns the process exit status.
int run_cli(int argc, const char* const* argv);

}  // namespace remi
