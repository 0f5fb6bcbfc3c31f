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

// Batched OpenMP kernels against the serial reference implementations.

#include <benchmark/benchmark.h>

#include "remi/corpus.h"
#include "remi/eval.h"
#include "remi/model.h"
#include "remi/trainer.h"

namespace {

struct Fixture {
  remi::InteractionCorpus corpus;
  remi::ModelParams params;
  remi::TrainingBatch batch;
};

Fixture make_fixture(std::size_t batch_size, std::size_t d_a) {
  remi::SyntheticSpec spec;
  spec.n_users = 2000;
  Fixture f;
  f.corpus = remi::generate_synthetic(spec).corpus;
  remi::TrainConfig cfg;
  cfg.d_a = d_a;
  cfg.batch_size = batch_size;
  f.params = remi::ModelParams::init(cfg.dims(f.corpus.num_items()), 1);
  remi::Rng rng(7);
  auto split = remi::split_users(f.corpus, {}, 3);
  f.batch = remi::draw_training_batch(f.corpus, split.train, batch_size, cfg.n, rng);
  f.batch.negatives = remi::sample_negatives(f.corpus, batch_size * cfg.neg_multiplier, rng);
  return f;
}

void BM_ForwardBackwardBatched(benchmark::State& state) {
  auto f = make_fixture(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    auto out = remi::forward_backward(f.params, f.batch, {1.0, 100.0});
    benchmark::DoNotOptimize(out.loss);
  }
}
BENCHMARK(BM_ForwardBackwardBatched)->Args({32, 256})->Args({128, 256})->Args({128, 64})->Unit(benchmark::kMillisecond);

void BM_ForwardBackwardReference(benchmark::State& state) {
  auto f = make_fixture(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    auto out = remi::reference::forward_backward(f.params, f.batch, {1.0, 100.0});
    benchmark::DoNotOptimize(out.loss);
  }
}
BENCHMARK(BM_ForwardBackwardReference)->Args({32, 256})->Unit(benchmark::kMillisecond);

void BM_RetrieveTopN(benchmark::State& state) {
  auto f = make_fixture(8, 64);
  auto enc = remi::encode_user(f.params, f.batch.history(0), f.batch.valid_lengths[0]);
  for (auto _ : state) {
    auto top = remi::retrieve_top_n(enc.V, f.params.item_emb, 50);
    benchmark::DoNotOptimize(top.data());
  }
}
BENCHMARK(BM_RetrieveTopN);

void BM_RetrieveTopNReference(benchmark::State& state) {
  auto f = make_fixture(8, 64);
  auto enc = remi::encode_user(f.params, f.batch.history(0), f.batch.valid_lengths[0]);
  for (auto _ : state) {
    auto top = remi::reference::retrieve_top_n(enc.V, f.params.item_emb, 50);
    benchmark::DoNotOptimize(top.data());
  }
}
BENCHMARK(BM_RetrieveTopNReference);

}  // namespace

BENCHMARK_MAIN();
