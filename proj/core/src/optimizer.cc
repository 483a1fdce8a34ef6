//
// Copyright 2026 The PCM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "pcm/optimizer.h"

#include <cmath>

namespace pcm {

AdamW::AdamW(std::vector<ParamGroup> groups, AdamWOptions options)
    : groups_(std::move(groups)), options_(options) {
  for (const auto& g : groups_) slots_.emplace_back(g.params.size());
}

double AdamW::Step() {
  double sq = 0.0;
  for (const auto& g : groups_) {
    for (const auto& p : g.params) {
      if (p->HasGrad()) sq += p->grad.squaredNorm();
    }
  }
  const double norm = std::sqrt(sq);
  double clip = 1.0;
  if (options_.max_grad_norm > 0.0 && norm > options_.max_grad_norm) clip = options_.max_grad_norm / (norm + 1e-6);

  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const ParamGroup& g = groups_[gi];
    for (std::size_t pi = 0; pi < g.params.size(); ++pi) {
      ag::Node& p = *g.params[pi];
      if (!p.HasGrad()) continue;
      Slot& s = slots_[gi][pi];
      if (s.t == 0) {
        s.m = ag::Mat::Zero(p.value.rows(), p.value.cols());
        s.v = ag::Mat::Zero(p.value.rows(), p.value.cols());
      }
      ++s.t;
      const ag::Mat grad = p.grad * clip;
      s.m = options_.beta1 * s.m + (1.0 - options_.beta1) * grad;
      s.v = options_.beta2 * s.v + (1.0 - options_.beta2) * grad.cwiseProduct(grad);
      const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(s.t));
      const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(s.t));
      if (g.weight_decay > 0.0) p.value *= (1.0 - g.lr * g.weight_decay);
      p.value.array() -= g.lr * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + options_.eps);
    }
  }
  ++steps_;
  ZeroGrad();
  return norm;
}

void AdamW::ZeroGrad() {
  for (auto& g : groups_) {
    for (auto& p : g.params) p->ZeroGrad();
  }
}

}  // namespace pcm
