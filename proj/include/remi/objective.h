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

#include <span>
#include <vector>

#include "remi/model.h"

namespace remi {

// Logits of the selected interest against the positive item and the L shared
// negatives, plus the hardness concentration beta >= 0.
struct LogitBundle {
  double pos_logit = 0.0;
  std::vector<double> neg_logits;
  double beta = 0.0;
};

// Loss value and its derivatives w.r.t. every logit in the bundle.
struct LossGrad {
  double loss = 0.0;
  double d_pos = 0.0;
  std::vector<double> d_neg;
};

double log_sum_exp(std::span<const double> x, double scale = 1.0);

// -log(e^pos / (e^pos + sum_i e^neg_i)), no log-Q correction.
double sampled_softmax_loss(const LogitBundle& bundle);
LossGrad sampled_softmax_loss_grad(const LogitBundle& bundle);

// Importance-reweighted negative aggregate. With x_i = exp(neg_i):
//   Neg = sum_i x_i^(beta+1) / mean_i x_i^beta
//   log Neg = lse((beta+1) neg) - lse(beta neg) + log L
// `weights` are the self-normalised importance weights x_i^beta / sum_j x_j^beta
// and `d_log_neg` is d(log Neg)/d(neg_i).
struct NegativeTerm {
  double log_neg = 0.0;
  std::vector<double> weights;
  std::vector<double> d_log_neg;

  double value() const;
};

NegativeTerm ihn_negative_term(std::span<const double> neg_logits, double beta);

// -log(e^pos / (e^pos + Neg)).
double ihn_loss(const LogitBundle& bundle);
LossGrad ihn_loss_grad(const LogitBundle& bundle);

// Squared Frobenius norm of diag((A - mean)^T (A - mean)) over the valid
// rows of A. Padded rows take no part in the mean.
double routing_regularizer(const Matrix& A, const std::vector<bool>& mask);

// d L_reg / d A; zero on padded rows.
Matrix routing_regularizer_grad(const Matrix& A, const std::vector<bool>& mask);

// Per-interest raw sum of squared deviations, i.e. diag of the covariance.
Vector routing_variance(const Matrix& A, const std::vector<bool>& mask);

// loss + lambda * reg for one example.
inline double total_loss(double base_loss, double reg, double lambda) {
  return base_loss + lambda * reg;
}

// Batch mean of base_loss[r] + lambda * reg[r].
double total_loss(std::span<const double> base_losses, std::span<const double> regs,
                  double lambda);

}  // namespace remi
