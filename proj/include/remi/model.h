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
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "remi/corpus.h"

namespace remi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct ModelDims {
  std::size_t d = 64;          // embedding width
  std::size_t d_a = 256;       // attention hidden width
  std::size_t K = 4;           // interests per user
  std::size_t n = 20;          // history window
  std::size_t num_items = 0;   // real items; the table has num_items + 1 rows

  bool operator==(const ModelDims&) const = default;
};

// Parameters of the self-attentive multi-interest encoder.
//
// Embedding tables are stored one column per row-entity (item or position)
// so that a lookup is a contiguous d-vector. Column 0 of item_emb is the
// padding item and is kept at exactly zero.
struct ModelParams {
  ModelDims dims;
  Matrix item_emb;  // d x (num_items + 1)
  Matrix pos_emb;   // d x n
  Matrix w1;        // d_a x d
  Matrix w2;        // d_a x K

  static ModelParams zeros(const ModelDims& dims);
  // Uniform in [-1/sqrt(d), 1/sqrt(d)]; padding column forced to zero.
  static ModelParams init(const ModelDims& dims, std::uint64_t seed);

  bool all_finite() const;
  bool operator==(const ModelParams& other) const;
};

// Checkpoint format: text header "d d_a K n num_items\n" followed by four
// blocks (E, P, W1, W2), each a 4-byte tag, a little-endian uint64 count of
// doubles, then the doubles in little-endian order. Each block is written
// row-major in its declared shape: E is (num_items+1) x d, P is n x d,
// W1 is d_a x d, W2 is d_a x K.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

// d x n history encoding plus validity mask. Valid positions are the last
// valid_length columns (histories are left padded).
struct EmbeddedHistory {
  Matrix H;
  std::vector<bool> mask;
  std::size_t valid_length = 0;
};

EmbeddedHistory embed_history(const ModelParams& params, std::span<const ItemId> history_ids,
                              std::size_t valid_length);

// n x K routing weights; each column is a distribution over valid positions.
struct RoutingMatrix {
  Matrix A;
  std::vector<bool> mask;
};

// A = softmax over valid positions of (W2^T tanh(W1 H))^T.
RoutingMatrix route(const ModelParams& params, const Matrix& H, const std::vector<bool>& mask);

// Column-wise masked softmax of K x n logits, returned transposed as n x K.
RoutingMatrix masked_softmax_routing(const Matrix& logits, const std::vector<bool>& mask);

// V = H A, d x K.
Matrix extract_interests(const Matrix& H, const Matrix& A);

struct InterestSelection {
  std::size_t k = 0;
  Vector v;
};

// argmax_k V[:,k] . target, lowest index wins ties.
InterestSelection select_interest(const Matrix& V, const Eigen::Ref<const Vector>& target);

// max_k V[:,k] . item
double score_item(const Matrix& V, const Eigen::Ref<const Vector>& item);

// Full per-user encoding: embed, route, extract.
struct UserEncoding {
  EmbeddedHistory history;
  RoutingMatrix routing;
  Matrix V;
};

UserEncoding encode_user(const ModelParams& params, std::span<const ItemId> history_ids,
                         std::size_t valid_length);

// Encodes the most recent dims.n items of an arbitrary-length prefix.
UserEncoding encode_prefix(const ModelParams& params, std::span<const ItemId> prefix);

}  // namespace remi
