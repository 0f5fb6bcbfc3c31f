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
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "remi/corpus.h"
#include "remi/trainer.h"

namespace remi {

// Every knob of every command. Serialised as flat key=value lines.
struct RunConfig {
  TrainConfig train;
  SyntheticSpec synth;

  std::filesystem::path corpus_dir = "corpus";
  std::filesystem::path report_dir = "reports";
  std::filesystem::path checkpoint;  // empty: <report_dir>/model.ckpt
  std::filesystem::path log;         // interaction log for `ingest`
  std::size_t min_count = 5;
  std::string eval_users = "test";   // test | valid
  std::size_t diag_users = 1000;
  std::size_t dump_routing = 0;
  std::vector<double> beta_grid{0.1, 1.0, 4.0, 10.0};
  std::size_t threads = 0;           // 0: OpenMP default

  std::filesystem::path checkpoint_path() const;
  void validate() const;
};

struct ConfigKey {
  std::string name;
  std::string help;
};

// All accepted keys, in serialisation order.
const std::vector<ConfigKey>& config_keys();

using Overrides = std::vector<std::pair<std::string, std::string>>;

// defaults -> REMI_SEED (only if no file/flag sets seed) -> file -> flags.
// Unknown keys and malformed values raise ConfigError naming the key.
RunConfig parse_config(const std::optional<std::filesystem::path>& file,
                       const Overrides& overrides,
                       const std::optional<std::string>& env_seed = std::nullopt);

// Parses "key=value" lines; '#' starts a comment.
Overrides read_config_file(const std::filesystem::path& file);

void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& config, const std::string& key);

// key=value lines for every key, loadable by parse_config.
std::string serialize_config(const RunConfig& config);

}  // namespace remi
