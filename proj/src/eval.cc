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

#include "remi/eval.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <unordered_set>

#include "remi/error.h"
#include "remi/log.h"
#include "remi/objective.h"

namespace remi {

namespace {

bool ranks_before(const ScoredItem& a, const ScoredItem& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.item < b.item;
}

std::size_t clamp_n(std::size_t N, std::size_t num_items) {
  if (N == 0) throw ConfigError("retrieve_top_n: N must be >= 1");
  if (N > num_items) {
    warn("retrieve_top_n: N=" + std::to_string(N) + " exceeds item count, truncating to " +
         std::to_string(num_items));
    return num_items;
  }
  return N;
}

std::vector<ScoredItem> top_n_of(const Vector& scores, std::size_t N) {
  std::vector<ScoredItem> all;
  all.reserve(static_cast<std::size_t>(scores.size()));
  for (Eigen::Index i = 1; i < scores.size(); ++i) {
    all.push_back({static_cast<ItemId>(i), scores[i]});
  }
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(N), all.end(),
                    ranks_before);
  all.resize(N);
  return all;
}

}  // namespace

std::vector<ScoredItem> retrieve_top_n(const Matrix& V, const Matrix& item_emb, std::size_t N) {
  const auto num_items = static_cast<std::size_t>(item_emb.cols()) - 1;
  N = clamp_n(N, num_items);
  Vector scores = (item_emb.transpose() * V).rowwise().maxCoeff();
  return top_n_of(scores, N);
}

namespace reference {

std::vector<ScoredItem> retrieve_top_n(const Matrix& V, const Matrix& item_emb, std::size_t N) {
  const auto num_items = static_cast<std::size_t>(item_emb.cols()) - 1;
  N = clamp_n(N, num_items);
  Vector scores(item_emb.cols());
  for (Eigen::Index i = 0; i < item_emb.cols(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < V.cols(); ++k) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < V.rows(); ++j) s += V(j, k) * item_emb(j, i);
      best = std::max(best, s);
    }
    scores[i] = best;
  }
  return top_n_of(scores, N);
}

}  // namespace reference

RankMetrics compute_rank_metrics(std::span<const ItemId> ranked, std::span<const ItemId> holdout,
                                 std::size_t N) {
  if (ranked.empty()) throw DataError("compute_rank_metrics: empty ranking");
  std::unordered_set<ItemId> truth(holdout.begin(), holdout.end());
  if (truth.empty()) throw DataError("compute_rank_metrics: empty holdout");
  const std::size_t depth = std::min(N, ranked.size());
  std::size_t hits = 0;
  double dcg = 0.0;
  for (std::size_t r = 0; r < depth; ++r) {
    if (truth.count(ranked[r])) {
      ++hits;
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
  }
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(N, truth.size()); ++i) {
    idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  RankMetrics m;
  m.recall = static_cast<double>(hits) / static_cast<double>(truth.size());
  m.hit = hits > 0 ? 1.0 : 0.0;
  m.ndcg = dcg / idcg;
  return m;
}

const MetricsAtN& EvalMetrics::get(std::size_t N) const {
  for (const auto& m : at) {
    if (m.N == N) return m;
  }
  throw DataError("no metrics computed at N=" + std::to_string(N));
}

EvalMetrics evaluate_users(const ModelParams& params, const InteractionCorpus& corpus,
                           std::span<const UserId> users, std::span<const std::size_t> Ns) {
  if (users.empty()) throw DataError("evaluate_users: empty user set");
  if (Ns.empty()) throw ConfigError("evaluate_users: no cutoffs");
  const std::size_t max_n = std::min(*std::max_element(Ns.begin(), Ns.end()), corpus.num_items());
  const auto U = static_cast<std::ptrdiff_t>(users.size());

  std::vector<std::vector<RankMetrics>> per_user(users.size());
  std::vector<char> evaluated(users.size(), 0);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t ui = 0; ui < U; ++ui) {
    auto seq = corpus.sequence(users[static_cast<std::size_t>(ui)]);
    if (seq.size() < 2) continue;
    auto split = eval_split(seq);
    auto enc = encode_prefix(params, split.observed);
    auto top = retrieve_top_n(enc.V, params.item_emb, max_n);
    std::vector<ItemId> ranked(top.size());
    for (std::size_t i = 0; i < top.size(); ++i) ranked[i] = top[i].item;
    auto& out = per_user[static_cast<std::size_t>(ui)];
    for (std::size_t N : Ns) out.push_back(compute_rank_metrics(ranked, split.holdout, N));
    evaluated[static_cast<std::size_t>(ui)] = 1;
  }

  EvalMetrics metrics;
  for (std::size_t N : Ns) metrics.at.push_back({N, 0.0, 0.0, 0.0});
  std::size_t skipped = 0;
  for (std::size_t ui = 0; ui < users.size(); ++ui) {
    if (!evaluated[ui]) {
      ++skipped;
      continue;
    }
    ++metrics.users;
    for (std::size_t j = 0; j < Ns.size(); ++j) {
      metrics.at[j].recall += per_user[ui][j].recall;
      metrics.at[j].hit_rate += per_user[ui][j].hit;
      metrics.at[j].ndcg += per_user[ui][j].ndcg;
    }
  }
  if (skipped) warn("evaluate_users: skipped " + std::to_string(skipped) + " users shorter than 2");
  if (metrics.users == 0) throw DataError("evaluate_users: every user was skipped");
  const double inv = 1.0 / static_cast<double>(metrics.users);
  for (auto& m : metrics.at) {
    m.recall *= inv;
    m.hit_rate *= inv;
    m.ndcg *= inv;
  }
  return metrics;
}

void write_metrics_csv(const EvalMetrics& metrics, std::ostream& out) {
  out << "metric,N,value,users\n" << std::setprecision(17);
  for (const auto& m : metrics.at) {
    out << "recall," << m.N << ',' << m.recall << ',' << metrics.users << '\n';
    out << "hit_rate," << m.N << ',' << m.hit_rate << ',' << metrics.users << '\n';
    out << "ndcg," << m.N << ',' << m.ndcg << ',' << metrics.users << '\n';
  }
}

void routing_column_stats(const Matrix& A, const std::vector<bool>& mask,
                          std::span<double> max_weight, std::span<double> entropy) {
  for (Eigen::Index k = 0; k < A.cols(); ++k) {
    double mx = 0.0, h = 0.0;
    for (Eigen::Index t = 0; t < A.rows(); ++t) {
      if (!mask[t]) continue;
      double a = A(t, k);
      mx = std::max(mx, a);
      if (a > 0.0) h -= a * std::log(a);
    }
    max_weight[static_cast<std::size_t>(k)] = mx;
    entropy[static_cast<std::size_t>(k)] = h;
  }
}

double CollapseReport::mean_max_weight() const {
  double s = 0.0;
  for (double v : max_weight) s += v;
  return max_weight.empty() ? 0.0 : s / static_cast<double>(max_weight.size());
}

double CollapseReport::mean_entropy() const {
  double s = 0.0;
  for (double v : entropy) s += v;
  return entropy.empty() ? 0.0 : s / static_cast<double>(entropy.size());
}

double CollapseReport::mean_variance() const {
  double s = 0.0;
  for (double v : variance) s += v;
  return variance.empty() ? 0.0 : s / static_cast<double>(variance.size());
}

CollapseReport collapse_diagnostics(const ModelParams& params, const InteractionCorpus& corpus,
                                    std::span<const UserId> users,
                                    std::vector<RoutingDump>* dumps) {
  if (users.empty()) throw DataError("collapse_diagnostics: empty user sample");
  const std::size_t K = params.dims.K;
  const auto U = static_cast<std::ptrdiff_t>(users.size());
  std::vector<std::vector<double>> stats(users.size());  // 3K per user
  std::vector<Matrix> routing(users.size());

#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t ui = 0; ui < U; ++ui) {
    auto seq = corpus.sequence(users[static_cast<std::size_t>(ui)]);
    if (seq.size() < 2) continue;
    auto enc = encode_prefix(params, eval_split(seq).observed);
    auto& s = stats[static_cast<std::size_t>(ui)];
    s.assign(3 * K, 0.0);
    routing_column_stats(enc.routing.A, enc.routing.mask, std::span(s).subspan(0, K),
                         std::span(s).subspan(K, K));
    Vector var = routing_variance(enc.routing.A, enc.routing.mask);
    for (std::size_t k = 0; k < K; ++k) s[2 * K + k] = var[static_cast<Eigen::Index>(k)];
    const auto len = static_cast<Eigen::Index>(enc.history.valid_length);
    routing[static_cast<std::size_t>(ui)] = enc.routing.A.bottomRows(len);
  }

  CollapseReport report;
  report.max_weight.assign(K, 0.0);
  report.entropy.assign(K, 0.0);
  report.variance.assign(K, 0.0);
  for (std::size_t ui = 0; ui < users.size(); ++ui) {
    if (stats[ui].empty()) continue;
    ++report.users;
    for (std::size_t k = 0; k < K; ++k) {
      report.max_weight[k] += stats[ui][k];
      report.entropy[k] += stats[ui][K + k];
      report.variance[k] += stats[ui][2 * K + k];
    }
    if (dumps) dumps->push_back({users[ui], std::move(routing[ui])});
  }
  if (report.users == 0) throw DataError("collapse_diagnostics: no user with 2+ interactions");
  const double inv = 1.0 / static_cast<double>(report.users);
  for (std::size_t k = 0; k < K; ++k) {
    report.max_weight[k] *= inv;
    report.entropy[k] *= inv;
    report.variance[k] *= inv;
  }
  return report;
}

void write_collapse_csv(const CollapseReport& report, std::ostream& out) {
  out << "interest,max_weight,entropy,variance\n" << std::setprecision(17);
  for (std::size_t k = 0; k < report.max_weight.size(); ++k) {
    out << k << ',' << report.max_weight[k] << ',' << report.entropy[k] << ','
        << report.variance[k] << '\n';
  }
}

void write_routing_dump(const RoutingDump& dump, std::ostream& out) {
  out << "position,interest,weight\n" << std::setprecision(17);
  for (Eigen::Index t = 0; t < dump.A.rows(); ++t) {
    for (Eigen::Index k = 0; k < dump.A.cols(); ++k) {
      out << t << ',' << k << ',' << dump.A(t, k) << '\n';
    }
  }
}

}  // namespace remi
