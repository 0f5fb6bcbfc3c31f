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

// Serial reference for forward_backward: one row at a time, explicit loops,
// dense item gradient. Slow on purpose; tests and the benchmark compare the
// batched kernel against it.

#include <cmath>
#include <limits>
#include <map>

#include "remi/error.h"
#include "remi/objective.h"
#include "remi/trainer.h"

namespace remi::reference {

ForwardBackwardResult forward_backward(const ModelParams& params, const TrainingBatch& batch,
                                       ObjectiveWeights weights) {
  const auto& dims = params.dims;
  const std::size_t d = dims.d, da = dims.d_a, K = dims.K, n = dims.n;
  const std::size_t B = batch.batch_size;
  const std::size_t L = batch.negatives.size();
  const double inv_b = 1.0 / static_cast<double>(B);
  if (batch.max_len != n) throw DataError("batch history width != model n");

  Matrix g_item = Matrix::Zero(d, static_cast<Eigen::Index>(dims.num_items + 1));
  Matrix g_pos = Matrix::Zero(d, n);
  Matrix g_w1 = Matrix::Zero(da, d);
  Matrix g_w2 = Matrix::Zero(da, K);
  std::map<ItemId, bool> touched;

  ForwardBackwardResult out;
  out.diagnostics.selected_k.resize(B);
  std::vector<double> base(B), regs(B);
  double sum_max = 0.0;

  for (std::size_t r = 0; r < B; ++r) {
    const std::size_t len = batch.valid_lengths[r];
    const std::size_t first = n - len;
    std::vector<ItemId> ids(len);
    for (std::size_t j = 0; j < len; ++j) {
      ids[j] = batch.histories[r * n + first + j];
      touched[ids[j]] = true;
    }
    const ItemId target = batch.targets[r];
    touched[target] = true;

    // H[i][j], hidden[a][j], logits[k][j], A[j][k]
    std::vector<std::vector<double>> H(d, std::vector<double>(len));
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < len; ++j) {
        H[i][j] = params.item_emb(i, ids[j]) + params.pos_emb(i, first + j);
      }
    }
    std::vector<std::vector<double>> hidden(da, std::vector<double>(len));
    for (std::size_t a = 0; a < da; ++a) {
      for (std::size_t j = 0; j < len; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) s += params.w1(a, i) * H[i][j];
        hidden[a][j] = std::tanh(s);
      }
    }
    std::vector<std::vector<double>> A(len, std::vector<double>(K));
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<double> z(len);
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < len; ++j) {
        double s = 0.0;
        for (std::size_t a = 0; a < da; ++a) s += params.w2(a, k) * hidden[a][j];
        z[j] = s;
        mx = std::max(mx, s);
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < len; ++j) sum += std::exp(z[j] - mx);
      for (std::size_t j = 0; j < len; ++j) A[j][k] = std::exp(z[j] - mx) / sum;
    }
    std::vector<std::vector<double>> V(d, std::vector<double>(K, 0.0));
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t j = 0; j < len; ++j) V[i][k] += H[i][j] * A[j][k];
      }
    }
    std::size_t k_sel = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) s += V[i][k] * params.item_emb(i, target);
      if (s > best) {
        best = s;
        k_sel = k;
      }
    }
    out.diagnostics.selected_k[r] = k_sel;

    LogitBundle bundle;
    bundle.beta = weights.beta;
    bundle.pos_logit = best;
    bundle.neg_logits.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) s += V[i][k_sel] * params.item_emb(i, batch.negatives[l]);
      bundle.neg_logits[l] = s;
    }
    auto lg = ihn_loss_grad(bundle);
    base[r] = lg.loss;

    // Regularizer: c_k = sum_j (A_jk - mean_k)^2, reg = sum_k c_k^2.
    std::vector<double> mean(K, 0.0), var(K, 0.0);
    double row_max = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      double mk = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        mean[k] += A[j][k];
        mk = std::max(mk, A[j][k]);
      }
      mean[k] /= static_cast<double>(len);
      for (std::size_t j = 0; j < len; ++j) var[k] += (A[j][k] - mean[k]) * (A[j][k] - mean[k]);
      regs[r] += var[k] * var[k];
      row_max += mk;
    }
    sum_max += row_max / static_cast<double>(K);

    // Backward.
    std::vector<double> dv(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      dv[i] += lg.d_pos * inv_b * params.item_emb(i, target);
      g_item(i, target) += lg.d_pos * inv_b * V[i][k_sel];
      for (std::size_t l = 0; l < L; ++l) {
        double gl = lg.d_neg[l] * inv_b;
        dv[i] += gl * params.item_emb(i, batch.negatives[l]);
        g_item(i, batch.negatives[l]) += gl * V[i][k_sel];
      }
    }
    std::vector<std::vector<double>> dA(len, std::vector<double>(K, 0.0));
    for (std::size_t j = 0; j < len; ++j) {
      for (std::size_t k = 0; k < K; ++k) {
        dA[j][k] = weights.lambda * inv_b * 4.0 * var[k] * (A[j][k] - mean[k]);
      }
      for (std::size_t i = 0; i < d; ++i) dA[j][k_sel] += H[i][j] * dv[i];
    }
    std::vector<std::vector<double>> dH(d, std::vector<double>(len, 0.0));
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < len; ++j) dH[i][j] = dv[i] * A[j][k_sel];
    }
    std::vector<std::vector<double>> dz(K, std::vector<double>(len));
    for (std::size_t k = 0; k < K; ++k) {
      double inner = 0.0;
      for (std::size_t j = 0; j < len; ++j) inner += A[j][k] * dA[j][k];
      for (std::size_t j = 0; j < len; ++j) dz[k][j] = A[j][k] * (dA[j][k] - inner);
    }
    for (std::size_t a = 0; a < da; ++a) {
      for (std::size_t j = 0; j < len; ++j) {
        double dh = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          dh += params.w2(a, k) * dz[k][j];
          g_w2(a, k) += hidden[a][j] * dz[k][j];
        }
        double dpre = dh * (1.0 - hidden[a][j] * hidden[a][j]);
        for (std::size_t i = 0; i < d; ++i) {
          g_w1(a, i) += dpre * H[i][j];
          dH[i][j] += params.w1(a, i) * dpre;
        }
      }
    }
    for (std::size_t j = 0; j < len; ++j) {
      for (std::size_t i = 0; i < d; ++i) {
        g_item(i, ids[j]) += dH[i][j];
        g_pos(i, first + j) += dH[i][j];
      }
    }
  }
  for (ItemId id : batch.negatives) touched[id] = true;

  out.loss = total_loss(base, regs, weights.lambda);
  if (!std::isfinite(out.loss)) throw NumericError("non-finite training loss");
  double sum_base = 0.0, sum_reg = 0.0;
  for (std::size_t r = 0; r < B; ++r) {
    sum_base += base[r];
    sum_reg += regs[r];
  }
  out.diagnostics.mean_base_loss = sum_base * inv_b;
  out.diagnostics.mean_reg = sum_reg * inv_b;
  out.diagnostics.mean_max_routing_weight = sum_max * inv_b;

  for (const auto& [id, _] : touched) out.grads.item_rows.push_back(id);
  out.grads.item_grad.resize(d, static_cast<Eigen::Index>(out.grads.item_rows.size()));
  for (std::size_t s = 0; s < out.grads.item_rows.size(); ++s) {
    out.grads.item_grad.col(static_cast<Eigen::Index>(s)) = g_item.col(out.grads.item_rows[s]);
  }
  out.grads.pos_emb = std::move(g_pos);
  out.grads.w1 = std::move(g_w1);
  out.grads.w2 = std::move(g_w2);
  return out;
}

}  // namespace remi::reference
