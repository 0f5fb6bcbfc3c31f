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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "remi/commands.h"
#include "remi/config.h"
#include "remi/error.h"

using namespace remi;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("remi_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "remi");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

// Tiny synthetic setup that trains in well under a second.
std::vector<std::string> tiny(const fs::path& root, const std::string& reports) {
  return {"--corpus_dir", (root / "corpus").string(), "--report_dir", (root / reports).string(),
          "--n_users",    "60",  "--n_topics",  "2",  "--topics_max", "2", "--items_per_topic", "30",
          "--seq_min",    "8",   "--seq_max",   "12", "--d", "8", "--d_a", "8", "--K", "2",
          "--n",          "6",   "--batch_size", "8", "--neg_multiplier", "2",
          "--max_iters",  "30",  "--eval_every", "10", "--seed", "3", "--diag_users", "5"};
}

std::vector<std::string> with(std::vector<std::string> args, const std::string& command) {
  args.insert(args.begin(), command);
  return args;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("defaults and precedence") {
  auto def = parse_config(std::nullopt, {});
  CHECK(def.train.d == 64);
  CHECK(def.train.lambda == 100.0);
  CHECK(def.train.beta == 1.0);
  CHECK(def.train.seed == 42);
  CHECK(def.synth.seed == 42);

  TempDir dir("prec");
  auto file = dir.path / "run.cfg";
  std::ofstream(file) << "# comment\nbeta = 1\nseed=9\nlr=0.01\n";
  auto cfg = parse_config(file, {{"beta", "4"}});
  CHECK(cfg.train.beta == 4.0);
  CHECK(cfg.train.lr == 0.01);
  CHECK(cfg.train.seed == 9);

  CHECK(parse_config(std::nullopt, {}, "77").train.seed == 77);
  CHECK(parse_config(file, {}, "77").train.seed == 9);
  CHECK(parse_config(std::nullopt, {{"seed", "5"}}, "77").train.seed == 5);

  auto round = parse_config(std::nullopt, {{"beta_grid", "0.5,2"}, {"d", "12"}});
  auto again = dir.path / "again.cfg";
  std::ofstream(again) << serialize_config(round);
  auto back = parse_config(again, {});
  CHECK(serialize_config(back) == serialize_config(round));
  CHECK(back.beta_grid == std::vector<double>{0.5, 2.0});
}

TEST_CASE("invalid configuration is rejected with the key name") {
  auto message = [](const Overrides& o) {
    try {
      parse_config(std::nullopt, o);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message({{"beta", "-1"}}).find("beta") != std::string::npos);
  CHECK(message({{"no_such_key", "1"}}).find("no_such_key") != std::string::npos);
  CHECK(message({{"d", "abc"}}).find("'d'") != std::string::npos);
  CHECK(message({{"lambda", "-0.5"}}).find("lambda") != std::string::npos);
  CHECK(message({{"eval_users", "train"}}).find("eval_users") != std::string::npos);
  CHECK_THROWS_AS(parse_config(std::nullopt, {}, "x"), ConfigError);
}

TEST_CASE("synth, train, eval, diagnose pipeline") {
  TempDir dir("pipe");
  auto args = tiny(dir.path, "r");
  REQUIRE(cli(with(args, "synth")) == kExitOk);
  CHECK(fs::exists(dir.path / "corpus" / "items.tsv"));
  CHECK(fs::exists(dir.path / "corpus" / "topics.tsv"));
  REQUIRE(cli(with(args, "train")) == kExitOk);
  CHECK(fs::exists(dir.path / "r" / "model.ckpt"));
  CHECK(fs::exists(dir.path / "r" / "model.ckpt.last"));
  auto hist = slurp(dir.path / "r" / "metrics_history.csv");
  CHECK(std::count(hist.begin(), hist.end(), '\n') == 4);
  REQUIRE(cli(with(args, "eval")) == kExitOk);
  auto metrics = slurp(dir.path / "r" / "metrics.csv");
  CHECK(metrics.rfind("metric,N,value,users\n", 0) == 0);
  CHECK(metrics.find("ndcg,50,") != std::string::npos);

  auto diag = args;
  diag.push_back("--dump_routing");
  diag.push_back("2");
  REQUIRE(cli(with(diag, "diagnose")) == kExitOk);
  CHECK(slurp(dir.path / "r" / "collapse.csv").rfind("interest,max_weight,entropy,variance\n", 0) ==
        0);
  CHECK(std::distance(fs::directory_iterator(dir.path / "r" / "routing"), fs::directory_iterator{}) ==
        2);

  auto manifest = slurp(dir.path / "r" / "manifest.txt");
  CHECK(manifest.find("# command: diagnose") != std::string::npos);
  CHECK(manifest.find("# corpus_hash: " + corpus_content_hash(dir.path / "corpus")) !=
        std::string::npos);
  CHECK(corpus_content_hash(dir.path / "corpus").size() == 40);

  // The manifest alone reproduces the run.
  REQUIRE(cli(with(args, "train")) == kExitOk);
  auto ckpt = slurp(dir.path / "r" / "model.ckpt");
  auto saved = dir.path / "train_manifest.txt";
  fs::copy_file(dir.path / "r" / "manifest.txt", saved);
  fs::remove_all(dir.path / "r");
  REQUIRE(cli({"train", "--config", saved.string()}) == kExitOk);
  CHECK(slurp(dir.path / "r" / "model.ckpt") == ckpt);
}

TEST_CASE("two checkpoints of the same shape both diagnose") {
  TempDir dir("two");
  auto args = tiny(dir.path, "r");
  REQUIRE(cli(with(args, "synth")) == kExitOk);
  REQUIRE(cli(with(args, "train")) == kExitOk);
  auto a = args;
  a.push_back("--checkpoint");
  a.push_back((dir.path / "r" / "model.ckpt.last").string());
  CHECK(cli(with(a, "diagnose")) == kExitOk);
  CHECK(cli(with(args, "diagnose")) == kExitOk);
}

TEST_CASE("sweep writes one row per beta") {
  TempDir dir("sweep");
  auto args = tiny(dir.path, "s");
  REQUIRE(cli(with(args, "synth")) == kExitOk);
  args.push_back("--beta_grid");
  args.push_back("0,1,4,10");
  REQUIRE(cli(with(args, "sweep")) == kExitOk);
  auto csv = slurp(dir.path / "s" / "sweep.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK(csv.rfind("beta,recall20,hr20,ndcg20,recall50,hr50,ndcg50,users,best_iter\n", 0) == 0);
  CHECK(fs::exists(dir.path / "s" / "sweep" / "beta_4.ckpt"));
}

TEST_CASE("exit codes") {
  TempDir dir("codes");
  CHECK(cli({"train", "--beta", "-1"}) == kExitConfig);
  CHECK(cli({"train", "--d", "x"}) == kExitConfig);
  CHECK(cli({"frobnicate"}) == kExitConfig);
  CHECK(cli({}) == kExitConfig);
  CHECK(cli({"train", "--corpus_dir", (dir.path / "missing").string()}) == kExitData);

  auto log = dir.path / "log.tsv";
  std::ofstream(log) << "u1\ti1\t1\nu1\ti2\tnot-a-time\n";
  CHECK(cli({"ingest", "--log", log.string(), "--corpus_dir", (dir.path / "c").string(),
             "--report_dir", (dir.path / "r").string()}) == kExitData);
  std::ofstream(log) << "u1\ti1\t1\n";
  CHECK(cli({"ingest", "--log", log.string(), "--corpus_dir", (dir.path / "c").string(),
             "--report_dir", (dir.path / "r").string()}) == kExitData);
}

TEST_CASE("ingest round trip") {
  TempDir dir("ingest");
  auto log = dir.path / "log.tsv";
  {
    std::ofstream out(log);
    for (int u = 0; u < 4; ++u) {
      for (int t = 0; t < 6; ++t) out << "user" << u << "\titem" << (t + u) % 3 << '\t' << 10 - t << '\n';
    }
  }
  REQUIRE(cli({"ingest", "--log", log.string(), "--min_count", "2", "--corpus_dir",
               (dir.path / "c").string(), "--report_dir", (dir.path / "r").string()}) == kExitOk);
  auto corpus = load_corpus(dir.path / "c");
  CHECK(corpus.num_users() == 4);
  CHECK(corpus.num_items() == 3);
  CHECK(corpus.sequence(0).size() == 6);
}

}  // TEST_SUITE
