/*
 * Copyright 2026 The BotUmc Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <vector>

#include "botumc/tensor.hpp"

namespace botumc {

struct AdamOptions {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over a fixed list of parameter tensors owned by the caller.
class Adam {
 public:
  Adam(std::vector<Tensor*> params, AdamOptions opts) : params_(std::move(params)), opts_(opts) {
    for (Tensor* p : params_) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  }

  void step(const std::vector<Tensor>& grads) {
    if (grads.size() != params_.size()) {
      fail<ContractError>("adam: ", grads.size(), " gradients for ", params_.size(), " params");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor& p = *params_[k];
      const Tensor& g = grads[k];
      if (g.shape() != p.shape()) {
        fail<DimensionError>("adam: gradient ", shape_str(g.shape()), " for parameter ",
                             shape_str(p.shape()));
      }
      for (std::size_t i = 0; i < p.size(); ++i) {
        m_[k][i] = opts_.beta1 * m_[k][i] + (1 - opts_.beta1) * g[i];
        v_[k][i] = opts_.beta2 * v_[k][i] + (1 - opts_.beta2) * g[i] * g[i];
        p[i] -= opts_.lr * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + opts_.eps);
      }
    }
  }

  long steps() const { return t_; }

 private:
  std::vector<Tensor*> params_;
  AdamOptions opts_;
  std::vector<Tensor> m_, v_;
  long t_ = 0;
};

}  // namespace botumc
