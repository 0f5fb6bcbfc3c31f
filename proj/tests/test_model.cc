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
#include <fstream>
#include <random>

#include "oracles.h"
#include "remi/error.h"
#include "remi/model.h"

using namespace remi;

namespace {

ModelParams fixture_params(std::size_t n = 5) {
  // Three items, d = 2.
  ModelParams p = ModelParams::zeros({2, 4, 2, n, 3});
  p.item_emb.col(1) << 1.0, 2.0;
  p.item_emb.col(2) << -1.0, 0.5;
  p.item_emb.col(3) << 0.25, -3.0;
  for (std::size_t t = 0; t < n; ++t) {
    p.pos_emb.col(static_cast<Eigen::Index>(t)) << 0.1 * static_cast<double>(t), -0.01;
  }
  return p;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("embed_history padding and lookup") {
  auto p = fixture_params();
  std::vector<ItemId> ids{0, 0, 0, 0, 2};
  auto h = embed_history(p, ids, 1);
  CHECK(h.mask == std::vector<bool>{false, false, false, false, true});
  for (Eigen::Index t = 0; t < 4; ++t) CHECK(h.H.col(t).isZero(0.0));
  CHECK(h.H(0, 4) == doctest::Approx(-1.0 + 0.4));
  CHECK(h.H(1, 4) == doctest::Approx(0.5 - 0.01));

  std::vector<ItemId> full{1, 2, 3, 1, 2};
  auto all = embed_history(p, full, 5);
  CHECK(all.mask == std::vector<bool>(5, true));

  CHECK_THROWS_AS(embed_history(p, ids, 0), DataError);
  std::vector<ItemId> bad{0, 0, 0, 0, 7};
  CHECK_THROWS_AS(embed_history(p, bad, 1), DataError);
}

TEST_CASE("routing: uniform logits, single valid position, closed-form softmax") {
  auto p = fixture_params();  // W2 = 0 makes every logit 0
  std::vector<ItemId> ids{0, 0, 1, 2, 3};
  auto h = embed_history(p, ids, 3);
  auto r = route(p, h.H, h.mask);
  for (Eigen::Index k = 0; k < 2; ++k) {
    CHECK(r.A(0, k) == 0.0);
    CHECK(r.A(1, k) == 0.0);
    for (Eigen::Index t = 2; t < 5; ++t) CHECK(r.A(t, k) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }

  auto one = embed_history(p, std::vector<ItemId>{0, 0, 0, 0, 1}, 1);
  auto r1 = route(fixture_params(), one.H, one.mask);
  CHECK(r1.A(4, 0) == 1.0);
  CHECK(r1.A(4, 1) == 1.0);

  Matrix logits(1, 3);
  logits << std::log(1.0), std::log(2.0), std::log(3.0);
  auto r3 = masked_softmax_routing(logits, {true, true, true});
  CHECK(r3.A(0, 0) == doctest::Approx(1.0 / 6).epsilon(1e-14));
  CHECK(r3.A(1, 0) == doctest::Approx(2.0 / 6).epsilon(1e-14));
  CHECK(r3.A(2, 0) == doctest::Approx(3.0 / 6).epsilon(1e-14));

  CHECK_THROWS_AS(masked_softmax_routing(logits, {false, false, false}), DataError);
}

TEST_CASE("routing columns are distributions over valid positions") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = oracle::tiny_instance(100 + trial, 6, 12, 3, 7, 30, 5, 4);
    inst.params.w2 *= 10.0;
    for (std::size_t r = 0; r < inst.batch.batch_size; ++r) {
      auto enc = encode_user(inst.params, inst.batch.history(r), inst.batch.valid_lengths[r]);
      for (Eigen::Index k = 0; k < 3; ++k) {
        double sum = 0.0;
        for (Eigen::Index t = 0; t < 7; ++t) {
          if (enc.routing.mask[t]) {
            CHECK(enc.routing.A(t, k) >= 0.0);
            sum += enc.routing.A(t, k);
          } else {
            CHECK(enc.routing.A(t, k) == 0.0);
          }
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
      }
    }
  }
}

TEST_CASE("extract_interests") {
  Matrix H(2, 3);
  H << 1, 2, 3, 4, 5, 6;
  Matrix A = Matrix::Zero(3, 2);
  A(1, 0) = 1.0;
  A(2, 1) = 1.0;
  Matrix V = extract_interests(H, A);
  CHECK(V.col(0) == H.col(1));
  CHECK(V.col(1) == H.col(2));

  Matrix U = Matrix::Zero(3, 1);
  U(0, 0) = 0.5;
  U(2, 0) = 0.5;
  Matrix M = extract_interests(H, U);
  CHECK(M(0, 0) == doctest::Approx(2.0));
  CHECK(M(1, 0) == doctest::Approx(5.0));

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  Matrix Hr(8, 4), Ar(4, 2);
  for (Eigen::Index i = 0; i < Hr.size(); ++i) Hr.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < Ar.size(); ++i) Ar.data()[i] = u(rng);
  Matrix got = extract_interests(Hr, Ar);
  for (int i = 0; i < 8; ++i) {
    for (int k = 0; k < 2; ++k) {
      double s = 0.0;
      for (int t = 0; t < 4; ++t) s += Hr(i, t) * Ar(t, k);
      CHECK(std::abs(got(i, k) - s) <= 1e-12);
    }
  }
  CHECK_THROWS_AS(extract_interests(Hr, Matrix::Zero(3, 2)), DataError);
}

TEST_CASE("select_interest argmax, tie rule and scale invariance") {
  Matrix V(2, 2);
  V << 1, 0, 0, 1;
  Vector e(2);
  e << 0.9, 0.1;
  CHECK(select_interest(V, e).k == 0);
  e << 0.1, 0.9;
  auto s = select_interest(V, e);
  CHECK(s.k == 1);
  CHECK(s.v == V.col(1));

  Matrix same(3, 4);
  same.colwise() = Vector::Constant(3, 0.7);
  CHECK(select_interest(same, Vector::Ones(3)).k == 0);

  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_real_distribution<double> c(1e-3, 1e3);
  for (int trial = 0; trial < 200; ++trial) {
    Matrix W(5, 4);
    Vector t(5);
    for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = u(rng);
    for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = u(rng);
    double scale = c(rng);
    auto k = select_interest(W, t).k;
    CHECK(select_interest(scale * W, t).k == k);
    CHECK(select_interest(W, scale * t).k == k);
  }
}

TEST_CASE("score_item") {
  Matrix V(2, 2);
  V << 1, 0, 0, 2;
  Vector e(2);
  e << 3, 1;
  CHECK(score_item(V, e) == 3.0);
  CHECK(score_item(V, Vector::Zero(2)) == 0.0);
  Matrix one(2, 1);
  one << 0.5, -2;
  CHECK(score_item(one, e) == doctest::Approx(1.5 - 2.0));
}

TEST_CASE("forward pass is bit-identical across calls") {
  auto inst = oracle::tiny_instance(9);
  auto a = encode_user(inst.params, inst.batch.history(0), inst.batch.valid_lengths[0]);
  auto b = encode_user(inst.params, inst.batch.history(0), inst.batch.valid_lengths[0]);
  CHECK(a.V == b.V);
  CHECK(a.routing.A == b.routing.A);
}

TEST_CASE("init: bounds and zero padding row") {
  auto p = ModelParams::init({16, 8, 2, 4, 50}, 3);
  const double bound = 1.0 / 4.0;
  CHECK(p.item_emb.col(0).isZero(0.0));
  CHECK(p.item_emb.cwiseAbs().maxCoeff() <= bound);
  CHECK(p.w1.cwiseAbs().maxCoeff() <= bound);
  CHECK(p.all_finite());
  CHECK(ModelParams::init({16, 8, 2, 4, 50}, 3) == p);
}

TEST_CASE("checkpoint layout and round trip") {
  auto p = ModelParams::init({3, 4, 2, 5, 6}, 77);
  auto path = std::filesystem::temp_directory_path() / "remi_model_test.ckpt";
  save_checkpoint(p, path);
  auto back = load_checkpoint(path);
  CHECK(back == p);

  std::ifstream in(path, std::ios::binary);
  std::string header;
  std::getline(in, header);
  CHECK(header == "3 4 2 5 6");
  auto read_u64 = [&] {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  };
  auto read_tag = [&] {
    std::string t(4, '\0');
    in.read(t.data(), 4);
    return t;
  };
  CHECK(read_tag() == "EMBD");
  CHECK(read_u64() == 7 * 3);
  // Row-major (item, dim): first row is padding, second row is item 1.
  for (int i = 0; i < 3; ++i) CHECK(std::bit_cast<double>(read_u64()) == 0.0);
  for (int i = 0; i < 3; ++i) CHECK(std::bit_cast<double>(read_u64()) == p.item_emb(i, 1));
  in.seekg(static_cast<std::streamoff>(8 * (5 * 3)), std::ios::cur);
  CHECK(read_tag() == "POSE");
  CHECK(read_u64() == 5 * 3);
  in.seekg(static_cast<std::streamoff>(8 * 15), std::ios::cur);
  CHECK(read_tag() == "ATW1");
  CHECK(read_u64() == 4 * 3);
  CHECK(std::bit_cast<double>(read_u64()) == p.w1(0, 0));
  CHECK(std::bit_cast<double>(read_u64()) == p.w1(0, 1));
  in.close();

  std::ofstream trunc(path, std::ios::binary);
  trunc << "3 4 2 5 6\nEMBD";
  trunc.close();
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
  std::filesystem::remove(path);
}

}  // TEST_SUITE
