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

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "remi/corpus.h"
#include "remi/error.h"

using namespace remi;

namespace {

std::vector<std::string> names_of(const InteractionCorpus& c, UserId u) {
  std::vector<std::string> out;
  for (ItemId i : c.sequence(u)) out.push_back(c.item_name(i));
  return out;
}

std::map<std::string, std::vector<std::string>> by_name(const InteractionCorpus& c) {
  std::map<std::string, std::vector<std::string>> out;
  for (std::size_t u = 0; u < c.num_users(); ++u) {
    out[c.user_name(static_cast<UserId>(u))] = names_of(c, static_cast<UserId>(u));
  }
  return out;
}

InteractionCorpus corpus_of(std::vector<std::vector<ItemId>> seqs, std::size_t num_items) {
  std::vector<std::string> users, items{"<pad>"};
  for (std::size_t u = 0; u < seqs.size(); ++u) users.push_back("u" + std::to_string(u));
  for (std::size_t i = 1; i <= num_items; ++i) items.push_back("i" + std::to_string(i));
  return InteractionCorpus(std::move(seqs), std::move(users), std::move(items));
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("ingest drops an item with fewer than five interactions") {
  std::ostringstream log;
  for (int u = 0; u < 6; ++u) {
    for (int i = 0; i < 5; ++i) log << "u" << u << "\tkeep" << i << "\t" << i << "\n";
  }
  for (int u = 0; u < 4; ++u) log << "u" << u << "\trare\t99\n";
  std::istringstream in(log.str());
  auto c = ingest(in, 5);
  CHECK(c.num_items() == 5);
  for (std::size_t i = 1; i <= c.num_items(); ++i) CHECK(c.item_name(static_cast<ItemId>(i)) != "rare");
}

TEST_CASE("min_count=1 keeps everything") {
  std::istringstream in("a\tx\t3\na\ty\t1\nb\tx\t2\n");
  auto c = ingest(in, 1);
  CHECK(c.num_users() == 2);
  CHECK(c.num_items() == 2);
  auto seqs = by_name(c);
  CHECK(seqs["a"] == std::vector<std::string>{"y", "x"});
  CHECK(seqs["b"] == std::vector<std::string>{"x"});
}

TEST_CASE("iterative filter reaches a fixpoint (hand traced)") {
  // min_count=2. Round 1 drops d and e (1 each); u3 is then left with c only
  // and goes in round 2; that leaves c with one interaction, dropped in
  // round 3 from u1.
  std::istringstream in(
      "u1\ta\t1\nu1\tb\t2\nu1\tc\t3\n"
      "u2\ta\t1\nu2\tb\t2\nu2\td\t3\n"
      "u3\tc\t1\nu3\te\t2\n"
      "u4\ta\t5\nu4\tb\t6\n");
  auto c = ingest(in, 2);
  auto seqs = by_name(c);
  CHECK(seqs.size() == 3);
  CHECK(seqs.count("u3") == 0);
  CHECK(seqs["u1"] == std::vector<std::string>{"a", "b"});
  CHECK(seqs["u2"] == std::vector<std::string>{"a", "b"});
  CHECK(seqs["u4"] == std::vector<std::string>{"a", "b"});
  CHECK(c.num_items() == 2);
}

TEST_CASE("removing a rare item cascades to its user at min_count=5") {
  std::ostringstream log;
  for (int u = 0; u < 5; ++u) {
    for (char it : std::string("ABCDE")) log << "core" << u << '\t' << it << "\t1\n";
  }
  for (char it : std::string("ABCDF")) log << "x\t" << it << "\t1\n";
  for (int z = 0; z < 3; ++z) log << "z" << z << "\tF\t1\n";
  std::istringstream in(log.str());
  auto c = ingest(in, 5);
  auto seqs = by_name(c);
  CHECK(seqs.size() == 5);
  CHECK(seqs.count("x") == 0);
  CHECK(c.num_items() == 5);
  for (std::size_t i = 1; i <= 5; ++i) CHECK(c.item_count(static_cast<ItemId>(i)) == 5);
}

TEST_CASE("sequences are time sorted with input order on ties") {
  std::istringstream in("u\tc\t5\nu\ta\t1\nu\tb\t5\nu\td\t3\n");
  auto c = ingest(in, 1);
  CHECK(names_of(c, 0) == std::vector<std::string>{"a", "d", "c", "b"});
}

TEST_CASE("malformed lines report their line number") {
  std::istringstream in("u\ta\t1\nu\tb\n");
  try {
    ingest(in, 1);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  std::istringstream bad_ts("u\ta\tnoon\n");
  CHECK_THROWS_AS(ingest(bad_ts, 1), ParseError);
}

TEST_CASE("empty corpus after filtering is an explicit error") {
  std::istringstream in("u\ta\t1\nv\tb\t2\n");
  CHECK_THROWS_AS(ingest(in, 5), EmptyCorpusError);
}

TEST_CASE("re-ingesting a filtered corpus is the identity") {
  std::ostringstream log;
  std::mt19937_64 rng(3);
  for (int e = 0; e < 3000; ++e) {
    log << "u" << rng() % 80 << "\ti" << rng() % 120 << '\t' << rng() % 1000 << '\n';
  }
  std::istringstream in(log.str());
  auto first = ingest(in, 5);
  std::stringstream again;
  write_as_log(first, again);
  auto second = ingest(again, 5);
  CHECK(second.num_users() == first.num_users());
  CHECK(second.num_items() == first.num_items());
  CHECK(by_name(second) == by_name(first));
  for (const auto& seq : first.sequences()) {
    for (ItemId i : seq) CHECK(first.item_count(i) >= 5);
    CHECK(seq.size() >= 5);
  }
}

TEST_CASE("corpus directory round trip") {
  auto dir = std::filesystem::temp_directory_path() / "remi_corpus_roundtrip";
  std::filesystem::remove_all(dir);
  auto c = corpus_of({{1, 2, 3}, {3, 3}}, 4);
  save_corpus(c, dir);
  auto back = load_corpus(dir);
  CHECK(back.sequences() == c.sequences());
  CHECK(back.num_items() == 4);
  CHECK(back.item_name(2) == "i2");
  CHECK(back.item_count(3) == 3);
  std::filesystem::remove_all(dir);
}

TEST_CASE("split_users sizes and determinism") {
  std::vector<std::vector<ItemId>> seqs(1000, std::vector<ItemId>{1, 2});
  auto c = corpus_of(seqs, 2);
  auto s = split_users(c, {}, 11);
  CHECK(s.train.size() == 800);
  CHECK(s.valid.size() == 100);
  CHECK(s.test.size() == 100);
  std::set<UserId> all(s.train.begin(), s.train.end());
  all.insert(s.valid.begin(), s.valid.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 1000);

  auto again = split_users(c, {}, 11);
  CHECK(again.train == s.train);
  CHECK(again.valid == s.valid);
  CHECK(again.test == s.test);
  CHECK(split_users(c, {}, 12).train != s.train);

  auto three = split_users(corpus_of({{1}, {1}, {1}}, 1), {}, 0);
  CHECK(three.train.size() == 1);
  CHECK(three.valid.size() == 1);
  CHECK(three.test.size() == 1);
  CHECK_THROWS_AS(split_users(corpus_of({{1}, {1}}, 1), {}, 0), DataError);
}

TEST_CASE("two-item sequence forces a single training pair") {
  auto c = corpus_of({{1, 2}}, 2);
  std::vector<UserId> users{0};
  Rng rng(5);
  auto b = draw_training_batch(c, users, 4, 20, rng);
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(b.valid_lengths[r] == 1);
    CHECK(b.targets[r] == 2);
    auto h = b.history(r);
    CHECK(h[19] == 1);
    for (std::size_t t = 0; t < 19; ++t) CHECK(h[t] == kPaddingItem);
  }
}

TEST_CASE("history window keeps the n most recent items") {
  std::vector<ItemId> seq(25);
  for (std::size_t i = 0; i < 25; ++i) seq[i] = static_cast<ItemId>(100 + i);
  std::vector<ItemId> row(20);
  fill_history_row(std::span<const ItemId>(seq).first(24), row);
  for (std::size_t j = 0; j < 20; ++j) CHECK(row[j] == seq[4 + j]);

  // Same window reached through the sampler when t = 24 is drawn.
  auto c = corpus_of({seq}, 200);
  std::vector<UserId> users{0};
  Rng rng(1);
  bool seen = false;
  for (int tries = 0; tries < 200 && !seen; ++tries) {
    auto b = draw_training_batch(c, users, 8, 20, rng);
    for (std::size_t r = 0; r < 8; ++r) {
      if (b.targets[r] != seq[24]) continue;
      seen = true;
      CHECK(b.valid_lengths[r] == 20);
      auto h = b.history(r);
      for (std::size_t j = 0; j < 20; ++j) CHECK(h[j] == seq[4 + j]);
    }
  }
  CHECK(seen);
}

TEST_CASE("batches are left padded and deterministic") {
  SyntheticSpec spec;
  spec.n_users = 200;
  auto c = generate_synthetic(spec).corpus;
  std::vector<UserId> users(200);
  for (std::size_t u = 0; u < 200; ++u) users[u] = static_cast<UserId>(u);
  Rng a(9), b(9);
  auto x = draw_training_batch(c, users, 64, 20, a);
  auto y = draw_training_batch(c, users, 64, 20, b);
  CHECK(x.histories == y.histories);
  CHECK(x.targets == y.targets);
  for (std::size_t r = 0; r < 64; ++r) {
    auto h = x.history(r);
    REQUIRE(x.valid_lengths[r] >= 1);
    REQUIRE(x.valid_lengths[r] <= 20);
    for (std::size_t t = 0; t < 20; ++t) {
      bool valid = t >= 20 - x.valid_lengths[r];
      CHECK((h[t] != kPaddingItem) == valid);
    }
  }
}

TEST_CASE("no eligible training users") {
  auto c = corpus_of({{1}, {2}}, 2);
  std::vector<UserId> users{0, 1};
  Rng rng(0);
  CHECK_THROWS_AS(draw_training_batch(c, users, 2, 5, rng), DataError);
}

TEST_CASE("negatives: L = 1280 for 128 x 10, degenerate corpus, uniformity") {
  auto c = corpus_of({{1, 2}}, 50);
  Rng rng(17);
  CHECK(sample_negatives(c, 128 * 10, rng).size() == 1280);

  auto one = corpus_of({{1, 1}}, 1);
  for (ItemId id : sample_negatives(one, 100, rng)) CHECK(id == 1);

  const std::size_t draws = 1000000;
  std::vector<std::size_t> counts(51, 0);
  for (ItemId id : sample_negatives(c, draws, rng)) {
    REQUIRE(id >= 1);
    REQUIRE(id <= 50);
    ++counts[static_cast<std::size_t>(id)];
  }
  const double p = 1.0 / 50.0;
  const double mean = draws * p;
  const double sigma = std::sqrt(draws * p * (1 - p));
  double chi2 = 0.0;
  for (std::size_t i = 1; i <= 50; ++i) {
    CHECK(std::abs(static_cast<double>(counts[i]) - mean) < 5 * sigma);
    chi2 += std::pow(static_cast<double>(counts[i]) - mean, 2) / mean;
  }
  // 49 dof: the 0.9999 quantile is about 97.
  CHECK(chi2 < 97.0);
}

TEST_CASE("eval_split rounding") {
  std::vector<ItemId> s(10, 1);
  auto a = eval_split(s);
  CHECK(a.observed.size() == 8);
  CHECK(a.holdout.size() == 2);
  auto b = eval_split(std::span<const ItemId>(s).first(2));
  CHECK(b.observed.size() == 1);
  CHECK(b.holdout.size() == 1);
  auto c = eval_split(std::span<const ItemId>(s).first(5));
  CHECK(c.observed.size() == 4);
  CHECK(c.holdout.size() == 1);
  CHECK_THROWS_AS(eval_split(std::span<const ItemId>(s).first(1)), DataError);
  for (std::size_t len = 2; len < 200; ++len) {
    std::vector<ItemId> v(len, 1);
    auto e = eval_split(v);
    CHECK(e.observed.size() + e.holdout.size() == len);
    CHECK(!e.holdout.empty());
    CHECK(e.observed.size() >= static_cast<std::size_t>(std::ceil(0.8 * len - 1e-9)) - 1);
  }
}

TEST_CASE("synthetic: standard spec structure") {
  SyntheticSpec spec;
  spec.n_topics = 8;
  spec.items_per_topic = 250;
  spec.n_users = 5000;
  spec.seq_length = {30, 60};
  auto s = generate_synthetic(spec);
  CHECK(s.corpus.num_items() == 2000);
  CHECK(s.corpus.num_users() == 5000);
  for (std::size_t u = 0; u < 5000; ++u) {
    auto seq = s.corpus.sequence(static_cast<UserId>(u));
    CHECK(seq.size() >= 30);
    CHECK(seq.size() <= 60);
    std::set<std::size_t> touched;
    for (ItemId i : seq) touched.insert(topic_of(spec, i));
    CHECK(touched.size() <= spec.topics_per_user.second);
    std::set<std::size_t> assigned(s.user_topics[u].begin(), s.user_topics[u].end());
    CHECK(touched == assigned);
  }
  auto again = generate_synthetic(spec);
  CHECK(again.corpus.sequences() == s.corpus.sequences());
}

TEST_CASE("synthetic: one topic per user") {
  SyntheticSpec spec;
  spec.n_users = 300;
  spec.topics_per_user = {1, 1};
  auto s = generate_synthetic(spec);
  for (const auto& seq : s.corpus.sequences()) {
    std::set<std::size_t> touched;
    for (ItemId i : seq) touched.insert(topic_of(spec, i));
    CHECK(touched.size() == 1);
  }
}

TEST_CASE("synthetic: zero skew is uniform within a topic") {
  SyntheticSpec spec;
  spec.n_topics = 1;
  spec.items_per_topic = 10;
  spec.n_users = 4000;
  spec.topics_per_user = {1, 1};
  spec.seq_length = {50, 50};
  spec.popularity_skew = 0.0;
  auto s = generate_synthetic(spec);
  std::vector<double> counts(11, 0.0);
  double total = 0.0;
  for (const auto& seq : s.corpus.sequences()) {
    for (ItemId i : seq) {
      counts[static_cast<std::size_t>(i)] += 1;
      total += 1;
    }
  }
  double chi2 = 0.0;
  for (std::size_t i = 1; i <= 10; ++i) chi2 += std::pow(counts[i] - total / 10, 2) / (total / 10);
  CHECK(chi2 < 33.7);  // 9 dof, p = 1e-4

  spec.popularity_skew = 1.5;
  auto skewed = generate_synthetic(spec);
  CHECK(skewed.corpus.item_count(1) > 3 * skewed.corpus.item_count(10));
}

TEST_CASE("synthetic: spec validation") {
  SyntheticSpec spec;
  spec.topics_per_user = {1, 9};
  CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
  spec = {};
  spec.n_users = 0;
  CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
  spec = {};
  spec.popularity_skew = -1;
  CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
}

}  // TEST_SUITE
