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
#include <filesystem>
#include <istream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace remi {

using ItemId = std::int32_t;
using UserId = std::int32_t;
using Rng = std::mt19937_64;

inline constexpr ItemId kPaddingItem = 0;

// Reindexed interaction data. Item 0 is the padding sentinel, so real items
// occupy ids 1..num_items() and the embedding table has num_items() + 1 rows.
class InteractionCorpus {
 public:
  InteractionCorpus() = default;
  InteractionCorpus(std::vector<std::vector<ItemId>> sequences,
                    std::vector<std::string> user_names,
                    std::vector<std::string> item_names);

  std::size_t num_users() const { return sequences_.size(); }
  std::size_t num_items() const { return item_names_.size() - 1; }

  std::span<const ItemId> sequence(UserId u) const { return sequences_[u]; }
  const std::vector<std::vector<ItemId>>& sequences() const { return sequences_; }

  const std::string& user_name(UserId u) const { return user_names_[u]; }
  // item_name(0) is the padding placeholder "<pad>".
  const std::string& item_name(ItemId i) const { return item_names_[i]; }

  std::size_t item_count(ItemId i) const { return item_counts_[i]; }
  std::size_t user_count(UserId u) const { return sequences_[u].size(); }
  std::size_t num_interactions() const { return num_interactions_; }

 private:
  std::vector<std::vector<ItemId>> sequences_;
  std::vector<std::string> user_names_;
  std::vector<std::string> item_names_;
  std::vector<std::size_t> item_counts_;
  std::size_t num_interactions_ = 0;
};

// Reads a tab-separated (user, item, timestamp) log, drops users and items
// with fewer than min_count interactions until nothing changes, and reindexes.
// Ids are assigned in order of first appearance in the surviving log.
InteractionCorpus ingest(std::istream& log, std::size_t min_count);
InteractionCorpus ingest_file(const std::filesystem::path& path, std::size_t min_count);

// Directory layout: items.tsv, users.tsv, sequences.tsv.
void save_corpus(const InteractionCorpus& corpus, const std::filesystem::path& dir);
InteractionCorpus load_corpus(const std::filesystem::path& dir);

// Emits the corpus as a log in ingest() format, with original ids and the
// within-user position as timestamp.
void write_as_log(const InteractionCorpus& corpus, std::ostream& out);

struct SplitRatios {
  unsigned train = 8;
  unsigned valid = 1;
  unsigned test = 1;
};

struct UserSplit {
  std::vector<UserId> train;
  std::vector<UserId> valid;
  std::vector<UserId> test;
};

UserSplit split_users(const InteractionCorpus& corpus, SplitRatios ratios,
                      std::uint64_t seed);

// Row-major batch_size x n item ids, left padded with kPaddingItem.
struct TrainingBatch {
  std::size_t batch_size = 0;
  std::size_t max_len = 0;
  std::vector<ItemId> histories;
  std::vector<std::size_t> valid_lengths;
  std::vector<ItemId> targets;
  std::vector<ItemId> negatives;

  std::span<const ItemId> history(std::size_t row) const {
    return {histories.data() + row * max_len, max_len};
  }
};

// Precomputes the users eligible for training (sequence length >= 2).
class BatchSampler {
 public:
  BatchSampler(const InteractionCorpus& corpus, std::span<const UserId> train_users);

  // Fills histories/targets; negatives are left empty.
  TrainingBatch draw(std::size_t batch_size, std::size_t max_len, Rng& rng) const;

 private:
  const InteractionCorpus* corpus_;
  std::vector<UserId> eligible_;
};

TrainingBatch draw_training_batch(const InteractionCorpus& corpus,
                                  std::span<const UserId> train_users,
                                  std::size_t batch_size, std::size_t max_len, Rng& rng);

// Uniform with replacement over 1..num_items(); shared by the whole batch.
std::vector<ItemId> sample_negatives(const InteractionCorpus& corpus, std::size_t count,
                                     Rng& rng);

// Copies the most recent max_len items of `items` into a left-padded row.
void fill_history_row(std::span<const ItemId> items, std::span<ItemId> row);

struct EvalSplit {
  std::span<const ItemId> observed;
  std::span<const ItemId> holdout;
};

// observed = first ceil(0.8 * len) items, holdout non-empty. Requires len >= 2.
EvalSplit eval_split(std::span<const ItemId> sequence);

struct SyntheticSpec {
  std::size_t n_topics = 8;
  std::size_t items_per_topic = 250;
  std::size_t n_users = 5000;
  std::pair<std::size_t, std::size_t> topics_per_user{2, 4};
  std::pair<std::size_t, std::size_t> seq_length{30, 60};
  double popularity_skew = 1.0;
  std::uint64_t seed = 2024;

  void validate() const;
};

// Topic t owns items 1 + t*items_per_topic .. (t+1)*items_per_topic.
std::size_t topic_of(const SyntheticSpec& spec, ItemId item);

struct SyntheticCorpus {
  InteractionCorpus corpus;
  std::vector<std::vector<std::size_t>> user_topics;
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

}  // namespace remi
