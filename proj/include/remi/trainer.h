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

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "remi/corpus.h"
#include "remi/model.h"

namespace remi {

struct TrainConfig {
  std::size_t d = 64;
  std::size_t d_a = 256;
  std::size_t K = 4;
  std::size_t n = 20;
  std::size_t batch_size = 128;
  std::size_t neg_multiplier = 10;
  double beta = 1.0;
  double lambda = 1e2;
  double lr = 1e-3;
  std::size_t max_iters = 20000;
  std::size_t eval_every = 1000;
  std::uint64_t seed = 42;

  std::size_t num_negatives() const { return batch_size * neg_multiplier; }
  ModelDims dims(std::size_t num_items) const { return {d, d_a, K, n, num_items}; }
  void validate() const;
};

// Gradients in parameter layout. Item-embedding gradients are sparse: only
// the columns listed in item_rows (sorted, unique, never the padding item)
// are stored, as the matching columns of item_grad.
struct GradientSet {
  std::vector<ItemId> item_rows;
  Matrix item_grad;  // d x item_rows.size()
  Matrix pos_emb;
  Matrix w1;
  Matrix w2;

  // d x (num_items + 1) view with zeros on untouched columns.
  Matrix dense_item_grad(std::size_t num_items) const;
};

struct BatchDiagnostics {
  std::vector<std::size_t> selected_k;
  double mean_base_loss = 0.0;  // batch mean of the IHN loss
  double mean_reg = 0.0;        // batch mean of the routing regularizer
  double mean_max_routing_weight = 0.0;
};

struct ForwardBackwardResult {
  double loss = 0.0;
  GradientSet grads;
  BatchDiagnostics diagnostics;
};

struct ObjectiveWeights {
  double beta = 1.0;
  double lambda = 1e2;
};

// Batch-mean IHN loss plus lambda-weighted routing regularizer, and its exact
// gradient. Interest selection is a hard argmax with no gradient of its own.
// Batch rows run in parallel; every cross-row reduction has a fixed order.
ForwardBackwardResult forward_backward(const ModelParams& params, const TrainingBatch& batch,
                                       ObjectiveWeights weights);

// Loss only, same arithmetic as forward_backward.
double batch_loss(const ModelParams& params, const TrainingBatch& batch, ObjectiveWeights weights);

namespace reference {

// Row-at-a-time serial implementation with explicit loops. Kept as the
// comparison baseline for the batched kernel and the benchmark.
ForwardBackwardResult forward_backward(const ModelParams& params, const TrainingBatch& batch,
                                       ObjectiveWeights weights);

}  // namespace reference

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  ModelParams m;
  ModelParams v;

  static AdamState for_params(const ModelParams& params, AdamHyper hyper);
};

// Dense Adam on P/W1/W2, lazy Adam on the touched item rows only.
void adam_step(ModelParams& params, const GradientSet& grads, AdamState& state);

struct MetricRecord {
  std::size_t iter = 0;
  double loss = 0.0;
  double recall50 = 0.0;
  double ndcg50 = 0.0;
  double hr50 = 0.0;
  double mean_max_routing_weight = 0.0;
  bool validated = false;
};

struct TrainResult {
  ModelParams best;
  ModelParams last;
  std::size_t best_iter = 0;
  double best_recall50 = -1.0;
  std::vector<MetricRecord> history;
  std::vector<double> loss_trace;  // training loss of every iteration
};

// Parameters train_loop starts from for this config.
ModelParams initial_params(const TrainConfig& config, std::size_t num_items);

using ProgressCallback = std::function<void(const MetricRecord&)>;

TrainResult train_loop(const InteractionCorpus& corpus, const UserSplit& split,
                       const TrainConfig& config, const ProgressCallback& progress = {});

// CSV "iter,loss,recall50,ndcg50,hr50,mean_max_routing_weight".
void write_metric_history(const std::vector<MetricRecord>& history, std::ostream& out);

}  // namespace remi
