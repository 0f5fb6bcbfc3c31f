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

#include <cmath>

#include "remi/error.h"
#include "remi/trainer.h"

namespace remi {

AdamState AdamState::for_params(const ModelParams& params, AdamHyper hyper) {
  AdamState s;
  s.hyper = hyper;
  s.m = ModelParams::zeros(params.dims);
  s.v = ModelParams::zeros(params.dims);
  return s;
}

namespace {

template <typename P, typename G, typename M>
void adam_update(P&& param, const G& grad, M&& m, M&& v, const AdamHyper& h, double step_size,
                 double bias2) {
  m = h.beta1 * m + (1.0 - h.beta1) * grad;
  v = h.beta2 * v + (1.0 - h.beta2) * grad.cwiseProduct(grad);
  param.array() -= step_size * m.array() / ((v.array() / bias2).sqrt() + h.eps);
}

}  // namespace

void adam_step(ModelParams& params, const GradientSet& grads, AdamState& state) {
  if (grads.w1.rows() != params.w1.rows() || grads.w1.cols() != params.w1.cols() ||
      grads.w2.rows() != params.w2.rows() || grads.w2.cols() != params.w2.cols() ||
      grads.pos_emb.rows() != params.pos_emb.rows() ||
      grads.pos_emb.cols() != params.pos_emb.cols() ||
      grads.item_grad.cols() != static_cast<Eigen::Index>(grads.item_rows.size())) {
    throw DataError("adam_step: gradient shapes do not match parameters");
  }
  const auto& h = state.hyper;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(h.beta1, t);
  const double bias2 = 1.0 - std::pow(h.beta2, t);
  const double step_size = h.lr / bias1;

  adam_update(params.pos_emb, grads.pos_emb, state.m.pos_emb, state.v.pos_emb, h, step_size, bias2);
  adam_update(params.w1, grads.w1, state.m.w1, state.v.w1, h, step_size, bias2);
  adam_update(params.w2, grads.w2, state.m.w2, state.v.w2, h, step_size, bias2);

  for (std::size_t s = 0; s < grads.item_rows.size(); ++s) {
    const ItemId id = grads.item_rows[s];
    if (id == kPaddingItem) continue;
    adam_update(params.item_emb.col(id), grads.item_grad.col(static_cast<Eigen::Index>(s)),
                state.m.item_emb.col(id), state.v.item_emb.col(id), h, step_size, bias2);
  }
}

}  // namespace remi
