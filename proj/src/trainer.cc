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

#include "remi/trainer.h"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "remi/error.h"
#include "remi/eval.h"
#include "remi/log.h"

namespace remi {

void TrainConfig::validate() const {
  auto positive = [](std::size_t v, const char* key) {
    if (v == 0) throw ConfigError(std::string(key) + " must be positive");
  };
  positive(d, "d");
  positive(d_a, "d_a");
  positive(K, "K");
  positive(n, "n");
  positive(batch_size, "batch_size");
  positive(neg_multiplier, "neg_multiplier");
  positive(eval_every, "eval_every");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be >= 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
}

namespace {

// splitmix64 finaliser, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

ModelParams initial_params(const TrainConfig& config, std::size_t num_items) {
  return ModelParams::init(config.dims(num_items), mix_seed(config.seed, 0));
}

TrainResult train_loop(const InteractionCorpus& corpus, const UserSplit& split,
                       const TrainConfig& config, const ProgressCallback& progress) {
  config.validate();
  TrainResult result;
  ModelParams params = initial_params(config, corpus.num_items());
  result.best = params;
  if (config.max_iters == 0) {
    result.last = params;
    return result;
  }

  BatchSampler sampler(corpus, split.train);
  result.loss_trace.reserve(config.max_iters);
  AdamState adam = AdamState::for_params(params, {config.lr, 0.9, 0.999, 1e-8});
  Rng rng(mix_seed(config.seed, 1));
  const ObjectiveWeights weights{config.beta, config.lambda};
  const std::size_t Ns[] = {50};

  bool can_validate = !split.valid.empty();
  if (!can_validate) warn("validation set is empty; keeping the last iterate");

  double window_loss = 0.0, window_max = 0.0;
  std::size_t window = 0;
  for (std::size_t iter = 1; iter <= config.max_iters; ++iter) {
    TrainingBatch batch = sampler.draw(config.batch_size, config.n, rng);
    batch.negatives = sample_negatives(corpus, config.num_negatives(), rng);
    ForwardBackwardResult fb;
    try {
      fb = forward_backward(params, batch, weights);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at iteration " + std::to_string(iter));
    }
    adam_step(params, fb.grads, adam);
    result.loss_trace.push_back(fb.loss);
    window_loss += fb.loss;
    window_max += fb.diagnostics.mean_max_routing_weight;
    ++window;

    if (iter % config.eval_every == 0 || iter == config.max_iters) {
      MetricRecord rec;
      rec.iter = iter;
      rec.loss = window_loss / static_cast<double>(window);
      rec.mean_max_routing_weight = window_max / static_cast<double>(window);
      if (can_validate) {
        auto m = evaluate_users(params, corpus, split.valid, Ns).get(50);
        rec.recall50 = m.recall;
        rec.ndcg50 = m.ndcg;
        rec.hr50 = m.hit_rate;
        rec.validated = true;
        if (rec.recall50 > result.best_recall50) {
          result.best_recall50 = rec.recall50;
          result.best_iter = iter;
          result.best = params;
        }
      }
      result.history.push_back(rec);
      if (progress) progress(rec);
      window_loss = window_max = 0.0;
      window = 0;
    }
  }
  result.last = params;
  if (!can_validate) {
    result.best = params;
    result.best_iter = config.max_iters;
  }
  return result;
}

void write_metric_history(const std::vector<MetricRecord>& history, std::ostream& out) {
  out << "iter,loss,recall50,ndcg50,hr50,mean_max_routing_weight\n" << std::setprecision(17);
  for (const auto& r : history) {
    out << r.iter << ',' << r.loss << ',';
    if (r.validated) {
      out << r.recall50 << ',' << r.ndcg50 << ',' << r.hr50;
    } else {
      out << ",,";
    }
    out << ',' << r.mean_max_routing_weight << '\n';
  }
}

}  // namespace remi
