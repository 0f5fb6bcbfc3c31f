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

#include "remi/commands.h"

#include <openssl/evp.h>
#include <omp.h>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "remi/error.h"
#include "remi/eval.h"
#include "remi/log.h"

namespace remi {

namespace {

std::string sha1_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr) != 1) {
    throw Error("SHA-1 digest failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return os.str();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string git_blob_hash(const std::string& content) {
  std::string blob = "blob " + std::to_string(content.size());
  blob.push_back('\0');
  return sha1_hex(blob + content);
}

std::ofstream open_report(const RunConfig& config, const std::filesystem::path& name) {
  auto path = config.report_dir / name;
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void write_manifest(const std::string& command, const RunConfig& config,
                    const std::filesystem::path& corpus_dir) {
  auto out = open_report(config, "manifest.txt");
  out << "# command: " << command << '\n';
  out << "# corpus_hash: " << corpus_content_hash(corpus_dir) << '\n';
  out << "# rerun: remi " << command << " --config <this file>\n";
  out << serialize_config(config);
}

const std::vector<UserId>& eval_partition(const RunConfig& config, const UserSplit& split) {
  return config.eval_users == "valid" ? split.valid : split.test;
}

TrainResult run_training(const InteractionCorpus& corpus,
                         const UserSplit& split, const TrainConfig& train) {
  return train_loop(corpus, split, train, [](const MetricRecord& r) {
    std::ostringstream os;
    os << "iter " << r.iter << " loss " << r.loss;
    if (r.validated) os << " recall@50 " << r.recall50;
    os << " max_routing " << r.mean_max_routing_weight;
    info(os.str());
  });
}

void cmd_ingest(const RunConfig& config) {
  if (config.log.empty()) throw ConfigError("config key 'log' is required for ingest");
  auto corpus = ingest_file(config.log, config.min_count);
  save_corpus(corpus, config.corpus_dir);
  info("ingested " + std::to_string(corpus.num_users()) + " users, " +
       std::to_string(corpus.num_items()) + " items");
  write_manifest("ingest", config, config.corpus_dir);
}

void cmd_synth(const RunConfig& config) {
  auto synth = generate_synthetic(config.synth);
  save_corpus(synth.corpus, config.corpus_dir);
  std::ofstream topics(config.corpus_dir / "topics.tsv");
  for (std::size_t u = 0; u < synth.user_topics.size(); ++u) {
    topics << u << '\t';
    for (std::size_t i = 0; i < synth.user_topics[u].size(); ++i) {
      topics << (i ? " " : "") << synth.user_topics[u][i];
    }
    topics << '\n';
  }
  write_manifest("synth", config, config.corpus_dir);
}

void cmd_train(const RunConfig& config) {
  auto corpus = load_corpus(config.corpus_dir);
  auto split = split_users(corpus, {}, config.train.seed);
  auto result = run_training(corpus, split, config.train);
  auto ckpt = config.checkpoint_path();
  save_checkpoint(result.best, ckpt);
  save_checkpoint(result.last, ckpt.string() + ".last");
  auto hist = open_report(config, "metrics_history.csv");
  write_metric_history(result.history, hist);
  info("best validation recall@50 " + std::to_string(result.best_recall50) + " at iteration " +
       std::to_string(result.best_iter));
  write_manifest("train", config, config.corpus_dir);
}

void cmd_eval(const RunConfig& config) {
  auto corpus = load_corpus(config.corpus_dir);
  auto split = split_users(corpus, {}, config.train.seed);
  auto params = load_checkpoint(config.checkpoint_path());
  const std::size_t Ns[] = {20, 50};
  auto metrics = evaluate_users(params, corpus, eval_partition(config, split), Ns);
  auto out = open_report(config, "metrics.csv");
  write_metrics_csv(metrics, out);
  write_manifest("eval", config, config.corpus_dir);
}

void cmd_diagnose(const RunConfig& config) {
  auto corpus = load_corpus(config.corpus_dir);
  auto split = split_users(corpus, {}, config.train.seed);
  auto params = load_checkpoint(config.checkpoint_path());
  const auto& pool = eval_partition(config, split);
  std::vector<UserId> sample(pool.begin(),
                             pool.begin() + static_cast<std::ptrdiff_t>(
                                                std::min(config.diag_users, pool.size())));
  std::vector<RoutingDump> dumps;
  auto report = collapse_diagnostics(params, corpus, sample, &dumps);
  auto out = open_report(config, "collapse.csv");
  write_collapse_csv(report, out);
  for (std::size_t i = 0; i < std::min(config.dump_routing, dumps.size()); ++i) {
    auto dump = open_report(config, std::filesystem::path("routing") /
                                        ("user_" + std::to_string(dumps[i].user) + ".csv"));
    write_routing_dump(dumps[i], dump);
  }
  write_manifest("diagnose", config, config.corpus_dir);
}

void cmd_sweep(const RunConfig& config) {
  if (config.beta_grid.empty()) throw ConfigError("config key 'beta_grid' must not be empty");
  auto corpus = load_corpus(config.corpus_dir);
  auto split = split_users(corpus, {}, config.train.seed);
  const std::size_t Ns[] = {20, 50};
  auto out = open_report(config, "sweep.csv");
  out << "beta,recall20,hr20,ndcg20,recall50,hr50,ndcg50,users,best_iter\n"
      << std::setprecision(17);
  for (double beta : config.beta_grid) {
    TrainConfig train = config.train;
    train.beta = beta;
    auto result = run_training(corpus, split, train);
    std::ostringstream name;
    name << "sweep/beta_" << beta << ".ckpt";
    save_checkpoint(result.best, config.report_dir / name.str());
    auto m = evaluate_users(result.best, corpus, eval_partition(config, split), Ns);
    const auto& a = m.get(20);
    const auto& b = m.get(50);
    out << beta << ',' << a.recall << ',' << a.hit_rate << ',' << a.ndcg << ',' << b.recall << ','
        << b.hit_rate << ',' << b.ndcg << ',' << m.users << ',' << result.best_iter << '\n';
    out.flush();
  }
  write_manifest("sweep", config, config.corpus_dir);
}

}  // namespace

std::string corpus_content_hash(const std::filesystem::path& corpus_dir) {
  std::string tree;
  for (const char* name : {"items.tsv", "users.tsv", "sequences.tsv"}) {
    tree += std::string(name) + " " + git_blob_hash(read_file(corpus_dir / name)) + "\n";
  }
  return sha1_hex(tree);
}

void dispatch(const std::string& command, const RunConfig& config) {
  config.validate();
  if (config.threads > 0) omp_set_num_threads(static_cast<int>(config.threads));
  if (command == "ingest") return cmd_ingest(config);
  if (command == "synth") return cmd_synth(config);
  if (command == "train") return cmd_train(config);
  if (command == "eval") return cmd_eval(config);
  if (command == "diagnose") return cmd_diagnose(config);
  if (command == "sweep") return cmd_sweep(config);
  throw ConfigError("unknown command '" + command + "'");
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Multi-interest candidate matching with hard-negative reweighting and routing "
               "regularization"};
  app.fallthrough();
  std::string config_file;
  app.add_option("-c,--config", config_file, "key=value config file");
  std::map<std::string, std::string> flag_values;
  for (const auto& key : config_keys()) {
    app.add_option("--" + key.name, flag_values[key.name], key.help);
  }
  const char* commands[][2] = {
      {"ingest", "filter and reindex a TSV interaction log into corpus_dir"},
      {"synth", "generate a synthetic multi-topic corpus into corpus_dir"},
      {"train", "train a model and write the best checkpoint"},
      {"eval", "score a checkpoint on held-out users"},
      {"diagnose", "routing collapse statistics for a checkpoint"},
      {"sweep", "train and evaluate over beta_grid"},
  };
  for (const auto& c : commands) app.add_subcommand(c[0], c[1]);
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    Overrides overrides;
    for (const auto& key : config_keys()) {
      if (app.count("--" + key.name) > 0) overrides.emplace_back(key.name, flag_values[key.name]);
    }
    std::optional<std::string> env_seed;
    if (const char* s = std::getenv("REMI_SEED")) env_seed = s;
    std::optional<std::filesystem::path> file;
    if (!config_file.empty()) file = config_file;
    auto config = parse_config(file, overrides, env_seed);
    dispatch(app.get_subcommands().front()->get_name(), config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace remi
