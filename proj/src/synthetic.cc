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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "remi/corpus.h"
#include "remi/error.h"

namespace remi {

void SyntheticSpec::validate() const {
  if (n_topics == 0 || items_per_topic == 0 || n_users == 0) {
    throw ConfigError("synthetic: n_topics, items_per_topic and n_users must be positive");
  }
  if (topics_per_user.first == 0 || topics_per_user.first > topics_per_user.second) {
    throw ConfigError("synthetic: topics_per_user must satisfy 1 <= min <= max");
  }
  if (topics_per_user.second > n_topics) {
    throw ConfigError("synthetic: topics_per_user.max exceeds n_topics");
  }
  if (seq_length.first < 2 || seq_length.first > seq_length.second) {
    throw ConfigError("synthetic: seq_length must satisfy 2 <= min <= max");
  }
  // Every assigned topic is guaranteed at least one interaction.
  if (seq_length.first < topics_per_user.second) {
    throw ConfigError("synthetic: seq_length.min must be >= topics_per_user.max");
  }
  if (!(popularity_skew >= 0.0) || !std::isfinite(popularity_skew)) {
    throw ConfigError("synthetic: popularity_skew must be a finite value >= 0");
  }
}

std::size_t topic_of(const SyntheticSpec& spec, ItemId item) {
  return static_cast<std::size_t>(item - 1) / spec.items_per_topic;
}

namespace {

std::size_t uniform_index(Rng& rng, std::size_t n) { return rng() % n; }

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  // Within-topic popularity: weight of rank r is (r + 1)^-skew.
  std::vector<double> cdf(spec.items_per_topic);
  double acc = 0.0;
  for (std::size_t r = 0; r < spec.items_per_topic; ++r) {
    acc += std::pow(static_cast<double>(r + 1), -spec.popularity_skew);
    cdf[r] = acc;
  }
  for (auto& c : cdf) c /= acc;
  cdf.back() = 1.0;

  auto draw_rank = [&]() {
    double x = uniform01(rng);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), x);
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(
        it - cdf.begin(), static_cast<std::ptrdiff_t>(spec.items_per_topic) - 1));
  };

  SyntheticCorpus out;
  std::vector<std::vector<ItemId>> sequences(spec.n_users);
  out.user_topics.resize(spec.n_users);
  std::vector<std::size_t> topic_pool(spec.n_topics);

  for (std::size_t u = 0; u < spec.n_users; ++u) {
    const auto [tmin, tmax] = spec.topics_per_user;
    std::size_t n_user_topics = tmin + uniform_index(rng, tmax - tmin + 1);
    std::iota(topic_pool.begin(), topic_pool.end(), 0);
    for (std::size_t i = 0; i < n_user_topics; ++i) {
      std::size_t j = i + uniform_index(rng, spec.n_topics - i);
      std::swap(topic_pool[i], topic_pool[j]);
    }
    auto& topics = out.user_topics[u];
    topics.assign(topic_pool.begin(), topic_pool.begin() + n_user_topics);
    std::sort(topics.begin(), topics.end());

    const auto [lmin, lmax] = spec.seq_length;
    std::size_t len = lmin + uniform_index(rng, lmax - lmin + 1);
    // One slot per assigned topic, the rest uniform over the user's topics,
    // then shuffled into sequence order.
    std::vector<std::size_t> slot_topics(topics);
    while (slot_topics.size() < len) slot_topics.push_back(topics[uniform_index(rng, topics.size())]);
    for (std::size_t i = len - 1; i > 0; --i) {
      std::swap(slot_topics[i], slot_topics[uniform_index(rng, i + 1)]);
    }
    auto& seq = sequences[u];
    seq.reserve(len);
    for (std::size_t topic : slot_topics) {
      seq.push_back(static_cast<ItemId>(1 + topic * spec.items_per_topic + draw_rank()));
    }
  }

  const std::size_t n_items = spec.n_topics * spec.items_per_topic;
  std::vector<std::string> user_names(spec.n_users);
  for (std::size_t u = 0; u < spec.n_users; ++u) user_names[u] = "u" + std::to_string(u);
  std::vector<std::string> item_names(n_items + 1);
  item_names[0] = "<pad>";
  for (std::size_t i = 1; i <= n_items; ++i) {
    item_names[i] = "t" + std::to_string(topic_of(spec, static_cast<ItemId>(i))) + "_" +
                    std::to_string((i - 1) % spec.items_per_topic);
  }
  out.corpus = InteractionCorpus(std::move(sequences), std::move(user_names), std::move(item_names));
  return out;
}

}  // namespace remi
