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

#include "remi/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "remi/error.h"

namespace remi {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

std::string fmt_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct KeyBinding {
  ConfigKey key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define REMI_COUNT(name, field, help)                                                         \
  KeyBinding {                                                                                \
    {name, help}, [](RunConfig& c, const std::string& v) { c.field = parse_count(name, v); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }                            \
  }
#define REMI_REAL(name, field, help)                                                         \
  KeyBinding {                                                                               \
    {name, help}, [](RunConfig& c, const std::string& v) { c.field = parse_real(name, v); }, \
        [](const RunConfig& c) { return fmt_real(c.field); }                                 \
  }
#define REMI_PATH(name, field, help)                                                           \
  KeyBinding {                                                                                 \
    {name, help}, [](RunConfig& c, const std::string& v) { c.field = v; },                     \
        [](const RunConfig& c) { return c.field.string(); }                                    \
  }

const std::vector<KeyBinding>& bindings() {
  static const std::vector<KeyBinding> table = {
      REMI_PATH("corpus_dir", corpus_dir, "corpus directory (written by ingest/synth)"),
      REMI_PATH("report_dir", report_dir, "directory receiving every run artifact"),
      REMI_PATH("checkpoint", checkpoint, "checkpoint path; empty means <report_dir>/model.ckpt"),
      REMI_PATH("log", log, "tab-separated interaction log for ingest"),
      REMI_COUNT("min_count", min_count, "minimum interactions per user and item"),
      REMI_COUNT("d", train.d, "embedding width"),
      REMI_COUNT("d_a", train.d_a, "attention hidden width"),
      REMI_COUNT("K", train.K, "interests per user"),
      REMI_COUNT("n", train.n, "history window length"),
      REMI_COUNT("batch_size", train.batch_size, "training rows per batch"),
      REMI_COUNT("neg_multiplier", train.neg_multiplier, "shared negatives = batch_size * this"),
      REMI_REAL("beta", train.beta, "hard-negative concentration (>= 0)"),
      REMI_REAL("lambda", train.lambda, "routing regularizer weight (>= 0)"),
      REMI_REAL("lr", train.lr, "Adam learning rate"),
      REMI_COUNT("max_iters", train.max_iters, "training iterations"),
      REMI_COUNT("eval_every", train.eval_every, "iterations between validation passes"),
      KeyBinding{{"seed", "seed for split, init, batches and synthetic data"},
                 [](RunConfig& c, const std::string& v) { c.train.seed = parse_u64("seed", v); },
                 [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      REMI_COUNT("n_topics", synth.n_topics, "synthetic: topic count"),
      REMI_COUNT("items_per_topic", synth.items_per_topic, "synthetic: items per topic"),
      REMI_COUNT("n_users", synth.n_users, "synthetic: users"),
      REMI_COUNT("topics_min", synth.topics_per_user.first, "synthetic: min topics per user"),
      REMI_COUNT("topics_max", synth.topics_per_user.second, "synthetic: max topics per user"),
      REMI_COUNT("seq_min", synth.seq_length.first, "synthetic: min sequence length"),
      REMI_COUNT("seq_max", synth.seq_length.second, "synthetic: max sequence length"),
      REMI_REAL("popularity_skew", synth.popularity_skew, "synthetic: within-topic power-law exponent"),
      KeyBinding{{"eval_users", "user partition scored by eval/diagnose: test or valid"},
                 [](RunConfig& c, const std::string& v) { c.eval_users = v; },
                 [](const RunConfig& c) { return c.eval_users; }},
      REMI_COUNT("diag_users", diag_users, "diagnose: users sampled for routing statistics"),
      REMI_COUNT("dump_routing", dump_routing, "diagnose: users whose routing matrix is dumped"),
      KeyBinding{{"beta_grid", "sweep: comma-separated beta values"},
                 [](RunConfig& c, const std::string& v) {
                   c.beta_grid.clear();
                   std::stringstream ss(v);
                   std::string item;
                   while (std::getline(ss, item, ',')) c.beta_grid.push_back(parse_real("beta_grid", trim(item)));
                 },
                 [](const RunConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.beta_grid.size(); ++i) {
                     if (i) s += ',';
                     s += fmt_real(c.beta_grid[i]);
                   }
                   return s;
                 }},
      REMI_COUNT("threads", threads, "OpenMP threads; 0 keeps the runtime default"),
  };
  return table;
}

#undef REMI_COUNT
#undef REMI_REAL
#undef REMI_PATH

const KeyBinding& binding(const std::string& key) {
  for (const auto& b : bindings()) {
    if (b.key.name == key) return b;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

std::filesystem::path RunConfig::checkpoint_path() const {
  return checkpoint.empty() ? report_dir / "model.ckpt" : checkpoint;
}

void RunConfig::validate() const {
  train.validate();
  if (eval_users != "test" && eval_users != "valid") {
    throw ConfigError("config key 'eval_users': expected 'test' or 'valid'");
  }
  if (min_count == 0) throw ConfigError("config key 'min_count' must be >= 1");
  if (report_dir.empty()) throw ConfigError("config key 'report_dir' must not be empty");
  for (double b : beta_grid) {
    if (!(b >= 0.0) || !std::isfinite(b)) throw ConfigError("config key 'beta_grid': values must be >= 0");
  }
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& b : bindings()) out.push_back(b.key);
    return out;
  }();
  return keys;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  binding(key).set(config, trim(value));
}

std::string get_config_value(const RunConfig& config, const std::string& key) {
  return binding(key).get(config);
}

Overrides read_config_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  Overrides out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::string body = trim(line);
    if (body.empty()) continue;
    auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(file.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    out.emplace_back(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
  return out;
}

RunConfig parse_config(const std::optional<std::filesystem::path>& file,
                       const Overrides& overrides, const std::optional<std::string>& env_seed) {
  RunConfig config;
  Overrides from_file;
  if (file) from_file = read_config_file(*file);

  bool seed_given = false;
  for (const auto& [k, v] : from_file) seed_given = seed_given || k == "seed";
  for (const auto& [k, v] : overrides) seed_given = seed_given || k == "seed";
  if (env_seed && !seed_given) set_config_value(config, "seed", *env_seed);

  for (const auto& [k, v] : from_file) set_config_value(config, k, v);
  for (const auto& [k, v] : overrides) set_config_value(config, k, v);
  config.synth.seed = config.train.seed;
  config.validate();
  return config;
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& b : bindings()) out += b.key.name + "=" + b.get(config) + "\n";
  return out;
}

}  // namespace remi
