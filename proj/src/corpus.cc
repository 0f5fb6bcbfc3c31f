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

#include "remi/corpus.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "remi/error.h"

namespace remi {

namespace {

struct RawEvent {
  std::string user;
  std::string item;
  std::int64_t timestamp;
  std::size_t order;
};

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

}  // namespace

InteractionCorpus::InteractionCorpus(std::vector<std::vector<ItemId>> sequences,
                                     std::vector<std::string> user_names,
                                     std::vector<std::string> item_names)
    : sequences_(std::move(sequences)),
      user_names_(std::move(user_names)),
      item_names_(std::move(item_names)) {
  if (user_names_.size() != sequences_.size()) {
    throw DataError("corpus: user name table does not match sequence count");
  }
  if (item_names_.empty()) throw DataError("corpus: item table lacks padding row");
  item_counts_.assign(item_names_.size(), 0);
  for (const auto& seq : sequences_) {
    for (ItemId i : seq) {
      if (i <= kPaddingItem || static_cast<std::size_t>(i) >= item_names_.size()) {
        throw DataError("corpus: item id " + std::to_string(i) + " out of range");
      }
      ++item_counts_[i];
    }
    num_interactions_ += seq.size();
  }
}

InteractionCorpus ingest(std::istream& log, std::size_t min_count) {
  std::vector<RawEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(log, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw ParseError(line_no, "expected 3 tab-separated fields, got " +
                                    std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[1].empty()) {
      throw ParseError(line_no, "empty user or item field");
    }
    std::int64_t ts = 0;
    auto ts_field = fields[2];
    auto [ptr, ec] = std::from_chars(ts_field.data(), ts_field.data() + ts_field.size(), ts);
    if (ec != std::errc() || ptr != ts_field.data() + ts_field.size()) {
      throw ParseError(line_no, "timestamp is not an integer: '" + std::string(ts_field) + "'");
    }
    events.push_back({std::string(fields[0]), std::string(fields[1]), ts, events.size()});
  }

  // Iterative k-core style filter on both users and items.
  std::vector<bool> alive(events.size(), true);
  while (true) {
    std::unordered_map<std::string_view, std::size_t> user_counts, item_counts;
    for (std::size_t e = 0; e < events.size(); ++e) {
      if (!alive[e]) continue;
      ++user_counts[events[e].user];
      ++item_counts[events[e].item];
    }
    bool changed = false;
    for (std::size_t e = 0; e < events.size(); ++e) {
      if (!alive[e]) continue;
      if (user_counts[events[e].user] < min_count || item_counts[events[e].item] < min_count) {
        alive[e] = false;
        changed = true;
      }
    }
    if (!changed) break;
  }

  std::vector<std::string> user_names;
  std::vector<std::string> item_names{"<pad>"};
  std::unordered_map<std::string, UserId> user_index;
  std::unordered_map<std::string, ItemId> item_index;
  std::vector<std::vector<const RawEvent*>> per_user;
  for (std::size_t e = 0; e < events.size(); ++e) {
    if (!alive[e]) continue;
    const auto& ev = events[e];
    auto [uit, unew] = user_index.try_emplace(ev.user, static_cast<UserId>(user_names.size()));
    if (unew) {
      user_names.push_back(ev.user);
      per_user.emplace_back();
    }
    auto [iit, inew] = item_index.try_emplace(ev.item, static_cast<ItemId>(item_names.size()));
    if (inew) item_names.push_back(ev.item);
    per_user[uit->second].push_back(&ev);
  }
  if (user_names.empty()) {
    throw EmptyCorpusError("corpus is empty after filtering with min_count=" +
                           std::to_string(min_count));
  }

  std::vector<std::vector<ItemId>> sequences(per_user.size());
  for (std::size_t u = 0; u < per_user.size(); ++u) {
    auto& evs = per_user[u];
    // Ties keep input order.
    std::stable_sort(evs.begin(), evs.end(), [](const RawEvent* a, const RawEvent* b) {
      return a->timestamp < b->timestamp;
    });
    sequences[u].reserve(evs.size());
    for (const auto* ev : evs) sequences[u].push_back(item_index.at(ev->item));
  }
  return InteractionCorpus(std::move(sequences), std::move(user_names), std::move(item_names));
}

InteractionCorpus ingest_file(const std::filesystem::path& path, std::size_t min_count) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open interaction log " + path.string());
  return ingest(in, min_count);
}

void save_corpus(const InteractionCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "items.tsv");
    for (std::size_t i = 1; i <= corpus.num_items(); ++i) {
      auto id = static_cast<ItemId>(i);
      out << id << '\t' << corpus.item_name(id) << '\t' << corpus.item_count(id) << '\n';
    }
  }
  {
    std::ofstream out(dir / "users.tsv");
    for (std::size_t u = 0; u < corpus.num_users(); ++u) {
      auto id = static_cast<UserId>(u);
      out << id << '\t' << corpus.user_name(id) << '\t' << corpus.user_count(id) << '\n';
    }
  }
  std::ofstream out(dir / "sequences.tsv");
  for (std::size_t u = 0; u < corpus.num_users(); ++u) {
    out << u << '\t';
    auto seq = corpus.sequence(static_cast<UserId>(u));
    for (std::size_t t = 0; t < seq.size(); ++t) {
      if (t) out << ' ';
      out << seq[t];
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing corpus to " + dir.string());
}

namespace {

std::vector<std::string> load_name_table(const std::filesystem::path& path,
                                         std::size_t first_id) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> names;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 3) throw ParseError(line_no, path.filename().string() + ": expected 3 fields");
    std::size_t id = 0;
    auto [p, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), id);
    if (ec != std::errc() || id != first_id + names.size()) {
      throw ParseError(line_no, path.filename().string() + ": ids must be contiguous");
    }
    names.emplace_back(fields[1]);
  }
  return names;
}

}  // namespace

InteractionCorpus load_corpus(const std::filesystem::path& dir) {
  auto user_names = load_name_table(dir / "users.tsv", 0);
  auto item_names = load_name_table(dir / "items.tsv", 1);
  item_names.insert(item_names.begin(), "<pad>");

  std::ifstream in(dir / "sequences.tsv");
  if (!in) throw DataError("cannot open " + (dir / "sequences.tsv").string());
  std::vector<std::vector<ItemId>> sequences(user_names.size());
  std::string line;
  std::size_t line_no = 0;
  std::size_t seen = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(line_no, "sequences.tsv: missing tab");
    std::size_t user = std::stoul(line.substr(0, tab));
    if (user != seen || user >= sequences.size()) {
      throw ParseError(line_no, "sequences.tsv: unexpected user id");
    }
    std::istringstream items(line.substr(tab + 1));
    ItemId item;
    while (items >> item) sequences[user].push_back(item);
    ++seen;
  }
  if (seen != user_names.size()) throw DataError("sequences.tsv: user count mismatch");
  return InteractionCorpus(std::move(sequences), std::move(user_names), std::move(item_names));
}

void write_as_log(const InteractionCorpus& corpus, std::ostream& out) {
  for (std::size_t u = 0; u < corpus.num_users(); ++u) {
    auto seq = corpus.sequence(static_cast<UserId>(u));
    for (std::size_t t = 0; t < seq.size(); ++t) {
      out << corpus.user_name(static_cast<UserId>(u)) << '\t' << corpus.item_name(seq[t])
          << '\t' << t << '\n';
    }
  }
}

UserSplit split_users(const InteractionCorpus& corpus, SplitRatios ratios, std::uint64_t seed) {
  const std::size_t n = corpus.num_users();
  if (n == 0) throw EmptyCorpusError("split_users: empty corpus");
  if (n < 3) {
    throw DataError("split_users: " + std::to_string(n) + " users cannot fill 3 partitions");
  }
  const std::size_t total = ratios.train + ratios.valid + ratios.test;
  if (total == 0 || ratios.train == 0 || ratios.valid == 0 || ratios.test == 0) {
    throw ConfigError("split_users: ratios must all be positive");
  }
  std::vector<UserId> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  // Explicit Fisher-Yates so the permutation does not depend on the
  // standard library's shuffle.
  for (std::size_t i = n - 1; i > 0; --i) {
    std::size_t j = rng() % (i + 1);
    std::swap(order[i], order[j]);
  }
  std::size_t n_valid = std::max<std::size_t>(1, n * ratios.valid / total);
  std::size_t n_test = std::max<std::size_t>(1, n * ratios.test / total);
  std::size_t n_train = n - n_valid - n_test;

  UserSplit split;
  split.train.assign(order.begin(), order.begin() + n_train);
  split.valid.assign(order.begin() + n_train, order.begin() + n_train + n_valid);
  split.test.assign(order.begin() + n_train + n_valid, order.end());
  return split;
}

void fill_history_row(std::span<const ItemId> items, std::span<ItemId> row) {
  const std::size_t n = row.size();
  const std::size_t len = std::min(items.size(), n);
  std::fill(row.begin(), row.end(), kPaddingItem);
  std::copy(items.end() - static_cast<std::ptrdiff_t>(len), items.end(),
            row.begin() + static_cast<std::ptrdiff_t>(n - len));
}

BatchSampler::BatchSampler(const InteractionCorpus& corpus, std::span<const UserId> train_users)
    : corpus_(&corpus) {
  for (UserId u : train_users) {
    if (corpus.sequence(u).size() >= 2) eligible_.push_back(u);
  }
  if (eligible_.empty()) throw DataError("no training users with at least 2 interactions");
}

TrainingBatch BatchSampler::draw(std::size_t batch_size, std::size_t max_len, Rng& rng) const {
  TrainingBatch batch;
  batch.batch_size = batch_size;
  batch.max_len = max_len;
  batch.histories.assign(batch_size * max_len, kPaddingItem);
  batch.valid_lengths.resize(batch_size);
  batch.targets.resize(batch_size);
  for (std::size_t r = 0; r < batch_size; ++r) {
    UserId u = eligible_[rng() % eligible_.size()];
    auto seq = corpus_->sequence(u);
    std::size_t t = 1 + rng() % (seq.size() - 1);
    auto prefix = seq.first(t);
    fill_history_row(prefix, {batch.histories.data() + r * max_len, max_len});
    batch.valid_lengths[r] = std::min(t, max_len);
    batch.targets[r] = seq[t];
  }
  return batch;
}

TrainingBatch draw_training_batch(const InteractionCorpus& corpus,
                                  std::span<const UserId> train_users,
                                  std::size_t batch_size, std::size_t max_len, Rng& rng) {
  return BatchSampler(corpus, train_users).draw(batch_size, max_len, rng);
}

std::vector<ItemId> sample_negatives(const InteractionCorpus& corpus, std::size_t count,
                                     Rng& rng) {
  if (corpus.num_items() == 0) throw EmptyCorpusError("sample_negatives: no items");
  if (count == 0) throw ConfigError("sample_negatives: count must be >= 1");
  std::uniform_int_distribution<ItemId> dist(1, static_cast<ItemId>(corpus.num_items()));
  std::vector<ItemId> out(count);
  for (auto& id : out) id = dist(rng);
  return out;
}

EvalSplit eval_split(std::span<const ItemId> sequence) {
  const std::size_t len = sequence.size();
  if (len < 2) throw DataError("eval_split: sequence shorter than 2");
  std::size_t observed = (4 * len + 4) / 5;  // ceil(0.8 * len)
  if (observed >= len) observed = len - 1;
  return {sequence.first(observed), sequence.subspan(observed)};
}

}  // namespace remi
