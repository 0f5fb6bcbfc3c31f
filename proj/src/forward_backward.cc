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
#include <string>

#include "remi/error.h"
#include "remi/objective.h"
#include "remi/trainer.h"

namespace remi {

namespace {

struct RowLayout {
  std::vector<Eigen::Index> offset;  // first column of row r in the packed matrices
  std::vector<Eigen::Index> length;  // valid positions of row r
  Eigen::Index total = 0;
};

RowLayout layout_rows(const TrainingBatch& batch) {
  RowLayout lay;
  lay.offset.resize(batch.batch_size);
  lay.length.resize(batch.batch_size);
  for (std::size_t r = 0; r < batch.batch_size; ++r) {
    auto len = static_cast<Eigen::Index>(batch.valid_lengths[r]);
    if (len < 1 || static_cast<std::size_t>(len) > batch.max_len) {
      throw DataError("batch row " + std::to_string(r) + " has invalid length");
    }
    lay.offset[r] = lay.total;
    lay.length[r] = len;
    lay.total += len;
  }
  return lay;
}

void check_item(ItemId id, std::size_t num_items) {
  if (id <= kPaddingItem || static_cast<std::size_t>(id) > num_items) {
    throw DataError("batch references item id " + std::to_string(id) + " out of range");
  }
}

// Everything the backward pass needs from the forward pass. Valid history
// positions of all rows are packed side by side into T columns.
struct ForwardCache {
  RowLayout layout;
  Matrix H;          // d x T
  Matrix hidden;     // d_a x T, tanh(W1 H)
  std::vector<Matrix> routing;  // per row, n_v x K
  Matrix v_sel;      // d x B
  Matrix pos_emb;    // d x B, embeddings of the targets
  Matrix neg_emb;    // d x L
  Matrix neg_logits; // L x B
  Vector pos_logits; // B
  std::vector<std::size_t> selected;
  std::vector<double> reg;
  std::vector<double> max_weight;
};

ForwardCache run_forward(const ModelParams& params, const TrainingBatch& batch) {
  const auto& dims = params.dims;
  if (batch.max_len != dims.n) throw DataError("batch history width != model n");
  if (batch.negatives.empty()) throw DataError("batch has no negatives");
  const auto B = static_cast<Eigen::Index>(batch.batch_size);
  const auto L = static_cast<Eigen::Index>(batch.negatives.size());
  const auto d = static_cast<Eigen::Index>(dims.d);
  const auto n = static_cast<Eigen::Index>(dims.n);

  ForwardCache c;
  c.layout = layout_rows(batch);
  const auto& lay = c.layout;
  for (std::size_t r = 0; r < batch.batch_size; ++r) {
    check_item(batch.targets[r], dims.num_items);
    for (std::size_t t = dims.n - batch.valid_lengths[r]; t < dims.n; ++t) {
      check_item(batch.histories[r * dims.n + t], dims.num_items);
    }
  }
  for (ItemId id : batch.negatives) check_item(id, dims.num_items);

  c.H.resize(d, lay.total);
#pragma omp parallel for schedule(static)
  for (Eigen::Index r = 0; r < B; ++r) {
    const Eigen::Index first = n - lay.length[r];
    for (Eigen::Index j = 0; j < lay.length[r]; ++j) {
      ItemId id = batch.histories[static_cast<std::size_t>(r * n + first + j)];
      c.H.col(lay.offset[r] + j) = params.item_emb.col(id) + params.pos_emb.col(first + j);
    }
  }

  c.hidden.noalias() = params.w1 * c.H;
  c.hidden = c.hidden.array().tanh().matrix();
  Matrix logits = params.w2.transpose() * c.hidden;  // K x T

  c.routing.resize(static_cast<std::size_t>(B));
  c.v_sel.resize(d, B);
  c.pos_emb.resize(d, B);
  c.selected.resize(static_cast<std::size_t>(B));
  c.reg.resize(static_cast<std::size_t>(B));
  c.max_weight.resize(static_cast<std::size_t>(B));
  c.pos_logits.resize(B);

#pragma omp parallel for schedule(static)
  for (Eigen::Index r = 0; r < B; ++r) {
    const auto ru = static_cast<std::size_t>(r);
    const Eigen::Index len = lay.length[r];
    std::vector<bool> mask(static_cast<std::size_t>(len), true);
    auto routing = masked_softmax_routing(logits.middleCols(lay.offset[r], len), mask);
    Matrix V = c.H.middleCols(lay.offset[r], len) * routing.A;
    c.pos_emb.col(r) = params.item_emb.col(batch.targets[ru]);
    auto sel = select_interest(V, c.pos_emb.col(r));
    c.selected[ru] = sel.k;
    c.v_sel.col(r) = sel.v;
    c.pos_logits[r] = sel.v.dot(c.pos_emb.col(r));
    c.reg[ru] = routing_regularizer(routing.A, mask);
    c.max_weight[ru] = routing.A.colwise().maxCoeff().mean();
    c.routing[ru] = std::move(routing.A);
  }

  c.neg_emb.resize(d, L);
  for (Eigen::Index j = 0; j < L; ++j) {
    c.neg_emb.col(j) = params.item_emb.col(batch.negatives[static_cast<std::size_t>(j)]);
  }
  c.neg_logits.noalias() = c.neg_emb.transpose() * c.v_sel;
  return c;
}

// Sorted unique item ids touched by the batch.
std::vector<ItemId> touched_items(const TrainingBatch& batch) {
  std::vector<ItemId> ids;
  ids.reserve(batch.histories.size() + batch.targets.size() + batch.negatives.size());
  for (ItemId id : batch.histories) {
    if (id != kPaddingItem) ids.push_back(id);
  }
  ids.insert(ids.end(), batch.targets.begin(), batch.targets.end());
  ids.insert(ids.end(), batch.negatives.begin(), batch.negatives.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

Eigen::Index slot_of(const std::vector<ItemId>& rows, ItemId id) {
  return std::lower_bound(rows.begin(), rows.end(), id) - rows.begin();
}

}  // namespace

Matrix GradientSet::dense_item_grad(std::size_t num_items) const {
  Matrix dense = Matrix::Zero(item_grad.rows(), static_cast<Eigen::Index>(num_items + 1));
  for (std::size_t s = 0; s < item_rows.size(); ++s) {
    dense.col(item_rows[s]) = item_grad.col(static_cast<Eigen::Index>(s));
  }
  return dense;
}

double batch_loss(const ModelParams& params, const TrainingBatch& batch, ObjectiveWeights weights) {
  auto c = run_forward(params, batch);
  const std::size_t B = batch.batch_size;
  std::vector<double> base(B);
  for (std::size_t r = 0; r < B; ++r) {
    LogitBundle bundle;
    bundle.pos_logit = c.pos_logits[static_cast<Eigen::Index>(r)];
    auto col = c.neg_logits.col(static_cast<Eigen::Index>(r));
    bundle.neg_logits.assign(col.data(), col.data() + col.size());
    bundle.beta = weights.beta;
    base[r] = ihn_loss(bundle);
  }
  return total_loss(base, c.reg, weights.lambda);
}

ForwardBackwardResult forward_backward(const ModelParams& params, const TrainingBatch& batch,
                                       ObjectiveWeights weights) {
  const auto& dims = params.dims;
  ForwardCache c = run_forward(params, batch);
  const auto& lay = c.layout;
  const auto B = static_cast<Eigen::Index>(batch.batch_size);
  const auto L = static_cast<Eigen::Index>(batch.negatives.size());
  const auto d = static_cast<Eigen::Index>(dims.d);
  const auto K = static_cast<Eigen::Index>(dims.K);
  const auto n = static_cast<Eigen::Index>(dims.n);
  const double inv_b = 1.0 / static_cast<double>(B);

  // Loss and logit gradients per row, already scaled by 1/B.
  std::vector<double> base(static_cast<std::size_t>(B));
  Vector d_pos(B);
  Matrix d_neg(L, B);
#pragma omp parallel for schedule(static)
  for (Eigen::Index r = 0; r < B; ++r) {
    LogitBundle bundle;
    bundle.pos_logit = c.pos_logits[r];
    auto col = c.neg_logits.col(r);
    bundle.neg_logits.assign(col.data(), col.data() + L);
    bundle.beta = weights.beta;
    auto g = ihn_loss_grad(bundle);
    base[static_cast<std::size_t>(r)] = g.loss;
    d_pos[r] = g.d_pos * inv_b;
    for (Eigen::Index j = 0; j < L; ++j) d_neg(j, r) = g.d_neg[static_cast<std::size_t>(j)] * inv_b;
  }

  ForwardBackwardResult out;
  out.loss = total_loss(base, c.reg, weights.lambda);
  if (!std::isfinite(out.loss)) throw NumericError("non-finite training loss");

  // Selected interest vectors and the shared negative embeddings.
  Matrix d_vsel = c.neg_emb * d_neg;
  d_vsel += c.pos_emb * d_pos.asDiagonal();
  Matrix d_neg_emb = c.v_sel * d_neg.transpose();  // d x L

  // Back through interest extraction and the routing softmax.
  Matrix d_logits(K, lay.total);
  Matrix dH(d, lay.total);
  const double reg_scale = weights.lambda * inv_b;
#pragma omp parallel for schedule(static)
  for (Eigen::Index r = 0; r < B; ++r) {
    const auto ru = static_cast<std::size_t>(r);
    const Eigen::Index len = lay.length[r];
    const Matrix& A = c.routing[ru];
    const auto k_sel = static_cast<Eigen::Index>(c.selected[ru]);
    auto Hr = c.H.middleCols(lay.offset[r], len);

    Matrix dA(len, K);
    if (reg_scale != 0.0) {
      std::vector<bool> mask(static_cast<std::size_t>(len), true);
      dA = reg_scale * routing_regularizer_grad(A, mask);
    } else {
      dA.setZero();
    }
    dA.col(k_sel).noalias() += Hr.transpose() * d_vsel.col(r);

    for (Eigen::Index k = 0; k < K; ++k) {
      double inner = A.col(k).dot(dA.col(k));
      for (Eigen::Index t = 0; t < len; ++t) {
        d_logits(k, lay.offset[r] + t) = A(t, k) * (dA(t, k) - inner);
      }
    }
    // Only the selected column of V carries loss gradient.
    dH.middleCols(lay.offset[r], len).noalias() = d_vsel.col(r) * A.col(k_sel).transpose();
  }

  // Attention layers over the packed columns.
  out.grads.w2.noalias() = c.hidden * d_logits.transpose();
  Matrix d_pre = params.w2 * d_logits;
  d_pre.array() *= 1.0 - c.hidden.array().square();
  out.grads.w1.noalias() = d_pre * c.H.transpose();
  dH.noalias() += params.w1.transpose() * d_pre;

  // Scatter into positions and item rows in a fixed order.
  out.grads.pos_emb = Matrix::Zero(d, n);
  out.grads.item_rows = touched_items(batch);
  out.grads.item_grad = Matrix::Zero(d, static_cast<Eigen::Index>(out.grads.item_rows.size()));
  auto& rows = out.grads.item_rows;
  auto& ig = out.grads.item_grad;
  for (Eigen::Index r = 0; r < B; ++r) {
    const Eigen::Index first = n - lay.length[r];
    for (Eigen::Index j = 0; j < lay.length[r]; ++j) {
      auto col = dH.col(lay.offset[r] + j);
      out.grads.pos_emb.col(first + j) += col;
      ItemId id = batch.histories[static_cast<std::size_t>(r * n + first + j)];
      ig.col(slot_of(rows, id)) += col;
    }
    ig.col(slot_of(rows, batch.targets[static_cast<std::size_t>(r)])) += d_pos[r] * c.v_sel.col(r);
  }
  for (Eigen::Index j = 0; j < L; ++j) {
    ig.col(slot_of(rows, batch.negatives[static_cast<std::size_t>(j)])) += d_neg_emb.col(j);
  }

  auto& diag = out.diagnostics;
  diag.selected_k = c.selected;
  double sum_base = 0.0, sum_reg = 0.0, sum_max = 0.0;
  for (std::size_t r = 0; r < batch.batch_size; ++r) {
    sum_base += base[r];
    sum_reg += c.reg[r];
    sum_max += c.max_weight[r];
  }
  diag.mean_base_loss = sum_base * inv_b;
  diag.mean_reg = sum_reg * inv_b;
  diag.mean_max_routing_weight = sum_max * inv_b;
  return out;
}

}  // namespace remi
