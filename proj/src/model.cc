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

#include "remi/model.h"

#include <cmath>
#include <limits>
#include <random>

#include "remi/error.h"

namespace remi {

ModelParams ModelParams::zeros(const ModelDims& dims) {
  if (dims.d == 0 || dims.d_a == 0 || dims.K == 0 || dims.n == 0) {
    throw ConfigError("model dims must be positive");
  }
  ModelParams p;
  p.dims = dims;
  p.item_emb = Matrix::Zero(dims.d, dims.num_items + 1);
  p.pos_emb = Matrix::Zero(dims.d, dims.n);
  p.w1 = Matrix::Zero(dims.d_a, dims.d);
  p.w2 = Matrix::Zero(dims.d_a, dims.K);
  return p;
}

ModelParams ModelParams::init(const ModelDims& dims, std::uint64_t seed) {
  ModelParams p = zeros(dims);
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dims.d));
  auto fill = [&](Matrix& m) {
    // Column-major fill order is part of the reproducibility contract.
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      m.data()[i] = (2.0 * u - 1.0) * bound;
    }
  };
  fill(p.item_emb);
  fill(p.pos_emb);
  fill(p.w1);
  fill(p.w2);
  p.item_emb.col(kPaddingItem).setZero();
  return p;
}

bool ModelParams::all_finite() const {
  return item_emb.allFinite() && pos_emb.allFinite() && w1.allFinite() && w2.allFinite();
}

bool ModelParams::operator==(const ModelParams& o) const {
  return dims == o.dims && item_emb == o.item_emb && pos_emb == o.pos_emb && w1 == o.w1 &&
         w2 == o.w2;
}

EmbeddedHistory embed_history(const ModelParams& params, std::span<const ItemId> history_ids,
                              std::size_t valid_length) {
  const auto& dims = params.dims;
  if (history_ids.size() != dims.n) throw DataError("embed_history: history length != n");
  if (valid_length == 0) throw DataError("embed_history: valid_length must be >= 1");
  if (valid_length > dims.n) throw DataError("embed_history: valid_length exceeds n");

  EmbeddedHistory out;
  out.valid_length = valid_length;
  out.H = Matrix::Zero(dims.d, dims.n);
  out.mask.assign(dims.n, false);
  const std::size_t first = dims.n - valid_length;
  for (std::size_t t = first; t < dims.n; ++t) {
    ItemId id = history_ids[t];
    if (id <= kPaddingItem || static_cast<std::size_t>(id) > dims.num_items) {
      throw DataError("embed_history: item id " + std::to_string(id) + " out of range");
    }
    out.H.col(t) = params.item_emb.col(id) + params.pos_emb.col(t);
    out.mask[t] = true;
  }
  return out;
}

RoutingMatrix masked_softmax_routing(const Matrix& logits, const std::vector<bool>& mask) {
  const Eigen::Index K = logits.rows();
  const Eigen::Index n = logits.cols();
  bool any = false;
  for (bool m : mask) any = any || m;
  if (!any) throw DataError("route: every position is masked");

  RoutingMatrix r;
  r.mask = mask;
  r.A = Matrix::Zero(n, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (mask[t]) mx = std::max(mx, logits(k, t));
    }
    double sum = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!mask[t]) continue;
      double e = std::exp(logits(k, t) - mx);
      r.A(t, k) = e;
      sum += e;
    }
    r.A.col(k) /= sum;
  }
  return r;
}

RoutingMatrix route(const ModelParams& params, const Matrix& H, const std::vector<bool>& mask) {
  Matrix hidden = (params.w1 * H).array().tanh().matrix();
  Matrix logits = params.w2.transpose() * hidden;
  return masked_softmax_routing(logits, mask);
}

Matrix extract_interests(const Matrix& H, const Matrix& A) {
  if (H.cols() != A.rows()) throw DataError("extract_interests: shape mismatch");
  return H * A;
}

InterestSelection select_interest(const Matrix& V, const Eigen::Ref<const Vector>& target) {
  Vector scores = V.transpose() * target;
  InterestSelection sel;
  for (Eigen::Index k = 1; k < scores.size(); ++k) {
    if (scores[k] > scores[static_cast<Eigen::Index>(sel.k)]) sel.k = static_cast<std::size_t>(k);
  }
  sel.v = V.col(static_cast<Eigen::Index>(sel.k));
  return sel;
}

double score_item(const Matrix& V, const Eigen::Ref<const Vector>& item) {
  return (V.transpose() * item).maxCoeff();
}

UserEncoding encode_user(const ModelParams& params, std::span<const ItemId> history_ids,
                         std::size_t valid_length) {
  UserEncoding enc;
  enc.history = embed_history(params, history_ids, valid_length);
  enc.routing = route(params, enc.history.H, enc.history.mask);
  enc.V = extract_interests(enc.history.H, enc.routing.A);
  return enc;
}

UserEncoding encode_prefix(const ModelParams& params, std::span<const ItemId> prefix) {
  std::vector<ItemId> row(params.dims.n);
  fill_history_row(prefix, row);
  return encode_user(params, row, std::min(prefix.size(), params.dims.n));
}

}  // namespace remi
