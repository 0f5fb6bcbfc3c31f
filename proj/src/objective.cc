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

#include "remi/objective.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "remi/error.h"

namespace remi {

namespace {

double log_add_exp(double a, double b) {
  double hi = std::max(a, b);
  double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

// softmax(scale * x) written into out.
void scaled_softmax(std::span<const double> x, double scale, double lse, std::span<double> out) {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::exp(scale * x[i] - lse);
}

}  // namespace

double log_sum_exp(std::span<const double> x, double scale) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : x) mx = std::max(mx, scale * v);
  double sum = 0.0;
  for (double v : x) sum += std::exp(scale * v - mx);
  return mx + std::log(sum);
}

double sampled_softmax_loss(const LogitBundle& bundle) {
  return log_add_exp(bundle.pos_logit, log_sum_exp(bundle.neg_logits)) - bundle.pos_logit;
}

LossGrad sampled_softmax_loss_grad(const LogitBundle& bundle) {
  const auto& neg = bundle.neg_logits;
  double lse_neg = log_sum_exp(neg);
  double log_z = log_add_exp(bundle.pos_logit, lse_neg);
  LossGrad g;
  g.loss = log_z - bundle.pos_logit;
  g.d_pos = std::exp(bundle.pos_logit - log_z) - 1.0;
  g.d_neg.resize(neg.size());
  scaled_softmax(neg, 1.0, log_z, g.d_neg);
  return g;
}

double NegativeTerm::value() const { return std::exp(log_neg); }

NegativeTerm ihn_negative_term(std::span<const double> neg_logits, double beta) {
  if (neg_logits.empty()) throw NumericError("ihn_negative_term: no negatives");
  if (!(beta >= 0.0)) throw NumericError("ihn_negative_term: beta must be >= 0");
  const double L = static_cast<double>(neg_logits.size());
  const double lse_hard = log_sum_exp(neg_logits, beta + 1.0);
  const double lse_imp = log_sum_exp(neg_logits, beta);

  // lse_hard - lse_imp equals m + log E_w[exp(x - m)] with w = softmax(beta x)
  // and m the max logit. Forming the mean through expm1 keeps the small
  // beta-dependent part exact instead of cancelling two large sums.
  double m = -std::numeric_limits<double>::infinity();
  for (double v : neg_logits) m = std::max(m, v);
  double s_imp = 0.0, s_diff = 0.0;
  for (double v : neg_logits) {
    double w = std::exp(beta * (v - m));
    s_imp += w;
    s_diff += w * std::expm1(v - m);
  }
  NegativeTerm term;
  term.log_neg = m + std::log1p(s_diff / s_imp) + std::log(L);
  term.weights.resize(neg_logits.size());
  scaled_softmax(neg_logits, beta, lse_imp, term.weights);
  term.d_log_neg.resize(neg_logits.size());
  for (std::size_t i = 0; i < neg_logits.size(); ++i) {
    double hard = std::exp((beta + 1.0) * neg_logits[i] - lse_hard);
    term.d_log_neg[i] = (beta + 1.0) * hard - beta * term.weights[i];
  }
  return term;
}

double ihn_loss(const LogitBundle& bundle) {
  auto term = ihn_negative_term(bundle.neg_logits, bundle.beta);
  return log_add_exp(bundle.pos_logit, term.log_neg) - bundle.pos_logit;
}

LossGrad ihn_loss_grad(const LogitBundle& bundle) {
  auto term = ihn_negative_term(bundle.neg_logits, bundle.beta);
  double log_z = log_add_exp(bundle.pos_logit, term.log_neg);
  double p_pos = std::exp(bundle.pos_logit - log_z);
  double p_neg = std::exp(term.log_neg - log_z);
  LossGrad g;
  g.loss = log_z - bundle.pos_logit;
  g.d_pos = p_pos - 1.0;
  g.d_neg.resize(term.d_log_neg.size());
  for (std::size_t i = 0; i < g.d_neg.size(); ++i) g.d_neg[i] = p_neg * term.d_log_neg[i];
  return g;
}

Vector routing_variance(const Matrix& A, const std::vector<bool>& mask) {
  const Eigen::Index n = A.rows();
  const Eigen::Index K = A.cols();
  std::size_t n_valid = 0;
  for (Eigen::Index t = 0; t < n; ++t) n_valid += mask[t] ? 1 : 0;
  Vector var = Vector::Zero(K);
  if (n_valid == 0) return var;
  for (Eigen::Index k = 0; k < K; ++k) {
    double mean = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (mask[t]) mean += A(t, k);
    }
    mean /= static_cast<double>(n_valid);
    double ss = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!mask[t]) continue;
      double dev = A(t, k) - mean;
      ss += dev * dev;
    }
    var[k] = ss;
  }
  return var;
}

double routing_regularizer(const Matrix& A, const std::vector<bool>& mask) {
  return routing_variance(A, mask).squaredNorm();
}

Matrix routing_regularizer_grad(const Matrix& A, const std::vector<bool>& mask) {
  const Eigen::Index n = A.rows();
  const Eigen::Index K = A.cols();
  Matrix grad = Matrix::Zero(n, K);
  std::size_t n_valid = 0;
  for (Eigen::Index t = 0; t < n; ++t) n_valid += mask[t] ? 1 : 0;
  if (n_valid == 0) return grad;
  Vector var = routing_variance(A, mask);
  for (Eigen::Index k = 0; k < K; ++k) {
    double mean = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (mask[t]) mean += A(t, k);
    }
    mean /= static_cast<double>(n_valid);
    // The mean's own derivative cancels because deviations sum to zero.
    for (Eigen::Index t = 0; t < n; ++t) {
      if (mask[t]) grad(t, k) = 4.0 * var[k] * (A(t, k) - mean);
    }
  }
  return grad;
}

double total_loss(std::span<const double> base_losses, std::span<const double> regs,
                  double lambda) {
  if (base_losses.size() != regs.size() || base_losses.empty()) {
    throw NumericError("total_loss: mismatched or empty batch");
  }
  double sum = 0.0;
  for (std::size_t r = 0; r < base_losses.size(); ++r) {
    sum += total_loss(base_losses[r], regs[r], lambda);
  }
  return sum / static_cast<double>(base_losses.size());
}

}  // namespace remi
