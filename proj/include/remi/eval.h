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
#include <ostream>
#include <span>
#include <vector>

#include "remi/corpus.h"
#include "remi/model.h"

namespace remi {

struct ScoredItem {
  ItemId item = 0;
  double score = 0.0;
};

// Exact MIPS: every item is scored by max_k V[:,k] . e_i, the padding item is
// skipped, and the N best come back in descending score order with lower
// ids first on ties. N larger than the item count is truncated.
std::vector<ScoredItem> retrieve_top_n(const Matrix& V, const Matrix& item_emb, std::size_t N);

namespace reference {
std::vector<ScoredItem> retrieve_top_n(const Matrix& V, const Matrix& item_emb, std::size_t N);
}

struct RankMetrics {
  double recall = 0.0;
  double hit = 0.0;
  double ndcg = 0.0;
};

// Scores the first N entries of `ranked` against the holdout items. The
// holdout is treated as a set.
RankMetrics compute_rank_metrics(std::span<const ItemId> ranked, std::span<const ItemId> holdout,
                                 std::size_t N);

struct MetricsAtN {
  std::size_t N = 0;
  double recall = 0.0;
  double hit_rate = 0.0;
  double ndcg = 0.0;
};

struct EvalMetrics {
  std::vector<MetricsAtN> at;
  std::size_t users = 0;

  const MetricsAtN& get(std::size_t N) const;
};

// 80/20 protocol: interests come from the observed prefix (last n items),
// metrics from the holdout. Users run in parallel, means are summed in
// user order.
EvalMetrics evaluate_users(const ModelParams& params, const InteractionCorpus& corpus,
                           std::span<const UserId> users, std::span<const std::size_t> Ns);

// CSV "metric,N,value,users".
void write_metrics_csv(const EvalMetrics& metrics, std::ostream& out);

struct CollapseReport {
  std::vector<double> max_weight;  // per interest, mean over users
  std::vector<double> entropy;     // per interest, mean over users
  std::vector<double> variance;    // per interest diag of the routing covariance
  std::size_t users = 0;

  double mean_max_weight() const;
  double mean_entropy() const;
  double mean_variance() const;
};

struct RoutingDump {
  UserId user = 0;
  Matrix A;  // valid positions only
};

CollapseReport collapse_diagnostics(const ModelParams& params, const InteractionCorpus& corpus,
                                    std::span<const UserId> users,
                                    std::vector<RoutingDump>* dumps = nullptr);

// Per-interest statistics for one routing matrix over its valid rows.
void routing_column_stats(const Matrix& A, const std::vector<bool>& mask,
                          std::span<double> max_weight, std::span<double> entropy);

// CSV "interest,max_weight,entropy,variance".
void write_collapse_csv(const CollapseReport& report, std::ostream& out);
// CSV "position,interest,weight".
void write_routing_dump(const RoutingDump& dump, std::ostream& out);

}  // namespace remi
