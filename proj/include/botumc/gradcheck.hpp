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
#include <functional>

#include "botumc/autodiff.hpp"

namespace botumc::ad {

using ScalarFn = std::function<Var(Tape&, Var)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  Tensor analytic;
  Tensor numeric;
};

// Compares the tape gradient of f at x0 against central differences:
// max_i |a_i - c_i| / (|a_i| + |c_i| + 1e-12).
inline GradCheckResult finite_diff_check_detailed(const ScalarFn& f, const Tensor& x0,
                                                  double h = 1e-5) {
  if (!(h >= 1e-7 && h <= 1e-3)) fail<ContractError>("finite-difference step ", h, " outside [1e-7, 1e-3]");
  GradCheckResult res;
  {
    Tape tape;
    Var x = tape.leaf(x0);
    Var y = f(tape, x);
    if (!y.value().all_finite()) fail<DomainError>("f is not finite at x0");
    tape.backward(y);
    res.analytic = x.grad();
  }
  auto eval = [&](const Tensor& at) {
    Tape tape;
    double v = f(tape, tape.constant(at)).value().item();
    if (!std::isfinite(v)) fail<DomainError>("f is not finite near x0");
    return v;
  };
  res.numeric = Tensor(x0.shape());
  Tensor probe = x0;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    probe[i] = x0[i] + h;
    double up = eval(probe);
    probe[i] = x0[i] - h;
    double down = eval(probe);
    probe[i] = x0[i];
    res.numeric[i] = (up - down) / (2 * h);
    double a = res.analytic[i], c = res.numeric[i];
    double err = std::abs(a - c) / (std::abs(a) + std::abs(c) + 1e-12);
    if (err > res.max_relative_error) {
      res.max_relative_error = err;
      res.worst_index = i;
    }
  }
  return res;
}

inline double finite_diff_check(const ScalarFn& f, const Tensor& x0, double h = 1e-5) {
  return finite_diff_check_detailed(f, x0, h).max_relative_error;
}

}  // namespace botumc::ad
