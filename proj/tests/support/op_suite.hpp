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

// Scalar-valued probes for every tape op, plus the two training losses, for
// finite-difference checks. Each probe takes the checked input as its only
// variable; any other operand is a fixed constant.

#include <memory>
#include <string>
#include <vector>

#include "botumc/evidential.hpp"
#include "botumc/gradcheck.hpp"
#include "botumc/interventional.hpp"
#include "support/oracles.hpp"

namespace botumc::testing {

struct OpCase {
  std::string name;
  Shape shape;
  double lo = -1.0, hi = 1.0;
  ad::ScalarFn f;
};

namespace detail {

// sum(y * W) with W fixed per output shape, so every output entry matters.
inline ad::Var project(ad::Tape& tape, ad::Var y) {
  Rng rng(4242);
  Tensor w = random_tensor(y.shape(), rng, 0.5, 1.5);
  return ad::sum(ad::mul(y, tape.constant(std::move(w))));
}

inline Tensor fixed(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  return random_tensor(std::move(s), rng, lo, hi);
}

inline std::shared_ptr<const ad::Adjacency> fixed_adjacency(std::size_t n) {
  auto adj = std::make_shared<ad::Adjacency>();
  adj->offsets.push_back(0);
  Rng rng(77);
  for (std::size_t i = 0; i < n; ++i) {
    // Node 0 has no in-neighbours; others get 1-3, repeats allowed.
    const std::size_t deg = i == 0 ? 0 : 1 + rng.below(3);
    for (std::size_t k = 0; k < deg; ++k) adj->sources.push_back(rng.below(n));
    adj->offsets.push_back(adj->sources.size());
  }
  return adj;
}

}  // namespace detail

inline std::vector<OpCase> op_cases() {
  using ad::Tape;
  using ad::Var;
  using detail::fixed;
  using detail::project;
  std::vector<OpCase> c;
  auto add = [&](std::string name, Shape s, ad::ScalarFn f, double lo = -1.0, double hi = 1.0) {
    c.push_back({std::move(name), std::move(s), lo, hi, std::move(f)});
  };
  const Shape m34{3, 4};

  add("add", m34, [](Tape& t, Var x) { return project(t, ad::add(x, t.constant(fixed({3, 4}, 1)))); });
  add("add.rhs", m34, [](Tape& t, Var x) { return project(t, ad::add(t.constant(fixed({3, 4}, 1)), x)); });
  add("add.column", {3, 1}, [](Tape& t, Var x) { return project(t, ad::add(t.constant(fixed({3, 4}, 1)), x)); });
  add("add.scalar_operand", {1}, [](Tape& t, Var x) { return project(t, ad::add(x, t.constant(fixed({3, 4}, 1)))); });
  add("sub", m34, [](Tape& t, Var x) { return project(t, ad::sub(x, t.constant(fixed({3, 4}, 2)))); });
  add("sub.rhs", m34, [](Tape& t, Var x) { return project(t, ad::sub(t.constant(fixed({3, 4}, 2)), x)); });
  add("mul", m34, [](Tape& t, Var x) { return project(t, ad::mul(x, t.constant(fixed({3, 4}, 3)))); });
  add("mul.rhs", m34, [](Tape& t, Var x) { return project(t, ad::mul(t.constant(fixed({3, 4}, 3)), x)); });
  add("mul.column", {3, 1}, [](Tape& t, Var x) { return project(t, ad::mul(t.constant(fixed({3, 4}, 3)), x)); });
  add("div", m34, [](Tape& t, Var x) { return project(t, ad::div(x, t.constant(fixed({3, 4}, 4, 0.5, 2.0)))); });
  add(
      "div.rhs", m34, [](Tape& t, Var x) { return project(t, ad::div(t.constant(fixed({3, 4}, 4)), x)); }, 0.5, 2.0);
  add("scale", m34, [](Tape& t, Var x) { return project(t, ad::scale(x, -2.5)); });
  add("add_scalar", m34, [](Tape& t, Var x) { return project(t, ad::add_scalar(x, 0.75)); });
  add("square", m34, [](Tape& t, Var x) { return project(t, ad::square(x)); });
  add("clamp_max", m34, [](Tape& t, Var x) { return project(t, ad::clamp_max(x, 0.3)); });
  add("matmul", {3, 5}, [](Tape& t, Var x) { return project(t, ad::matmul(x, t.constant(fixed({5, 2}, 5)))); });
  add("matmul.rhs", {5, 2}, [](Tape& t, Var x) { return project(t, ad::matmul(t.constant(fixed({3, 5}, 5)), x)); });
  add("add_bias", m34, [](Tape& t, Var x) { return project(t, ad::add_bias(x, t.constant(fixed({4}, 6)))); });
  add("add_bias.bias", {4}, [](Tape& t, Var x) { return project(t, ad::add_bias(t.constant(fixed({3, 4}, 6)), x)); });
  add("leaky_relu", m34, [](Tape& t, Var x) { return project(t, ad::leaky_relu(x, 0.01)); });
  add("softplus", m34, [](Tape& t, Var x) { return project(t, ad::softplus(x)); }, -4.0, 4.0);
  add("exp", m34, [](Tape& t, Var x) { return project(t, ad::exp(x)); });
  add("log", m34, [](Tape& t, Var x) { return project(t, ad::log(x)); }, 0.2, 3.0);
  add("softmax_rows", m34, [](Tape& t, Var x) { return project(t, ad::softmax_rows(x)); }, -3.0, 3.0);
  add("log_softmax_rows", m34, [](Tape& t, Var x) { return project(t, ad::log_softmax_rows(x)); }, -3.0, 3.0);
  add("sum", m34, [](Tape& t, Var x) { return project(t, ad::sum(ad::square(x))); });
  add("mean", m34, [](Tape& t, Var x) { return project(t, ad::mean(ad::square(x))); });
  add("row_sum", m34, [](Tape& t, Var x) { return project(t, ad::row_sum(x)); });
  add("column", m34, [](Tape& t, Var x) { return project(t, ad::column(x, 2)); });
  add("select_rows", {4, 3}, [](Tape& t, Var x) { return project(t, ad::select_rows(x, {3, 0, 3})); });
  add("concat_cols", {3, 2}, [](Tape& t, Var x) {
    return project(t, ad::concat_cols({t.constant(fixed({3, 3}, 7)), x, ad::square(x)}));
  });
  add("aggregate", {6, 3}, [](Tape& t, Var x) { return project(t, ad::aggregate(x, detail::fixed_adjacency(6))); });
  add("rowwise_kl.p", m34, [](Tape& t, Var x) {
    return project(t, ad::rowwise_kl(ad::softmax_rows(x), ad::softmax_rows(t.constant(fixed({3, 4}, 8)))));
  });
  add("rowwise_kl.q", m34, [](Tape& t, Var x) {
    return project(t, ad::rowwise_kl(ad::softmax_rows(t.constant(fixed({3, 4}, 8))), ad::softmax_rows(x)));
  });
  add("categorical_kl", m34, [](Tape& t, Var x) {
    return ad::categorical_kl(ad::softmax_rows(x), ad::softmax_rows(t.constant(fixed({3, 4}, 9))));
  });
  add("cross_entropy", m34, [](Tape&, Var x) { return ad::cross_entropy(x, {0, 3, 1}); }, -3.0, 3.0);
  return c;
}

// Small fixed problem for the intervention loss: random graph, two
// environments, features as the checked input.
struct InterventionProbe {
  HeteroGraph graph;
  EnvironmentModel env1, env2;
  LabeledSubset train;
  double lambda1 = 0.8;
  double tau = 10.0;

  static InterventionProbe make(std::uint64_t seed, std::size_t n = 12, std::size_t hidden = 4) {
    Rng rng(seed);
    HeteroGraph g = random_graph(n, 0.2, rng);
    EnvironmentModel e1 = EnvironmentModel::init(1, hidden, 2, 2, derive_seed(seed, 1));
    EnvironmentModel e2 = EnvironmentModel::init(2, hidden, 2, 2, derive_seed(seed, 2));
    LabeledSubset train = LabeledSubset::of(g, Split::kTrain);
    return {std::move(g), std::move(e1), std::move(e2), std::move(train)};
  }

  Shape input_shape() const { return {graph.node_count(), env1.hidden()}; }

  ad::ScalarFn loss() const {
    return [this](ad::Tape& tape, ad::Var x) {
      ParamBinder bind(tape, false);
      ViewVars v1 = rgcn_forward(tape, graph, x, env1, bind, {});
      ViewVars v2 = rgcn_forward(tape, graph, x, env2, bind, {});
      return intervention_loss(v1, v2, train, lambda1, tau).total;
    };
  }
};

// Evidence head on a fixed representation-sized input, then the uncertainty
// loss; alpha = softplus(r W + b) + 1 sits between input and loss.
struct UncertaintyProbe {
  EvidenceHead head;
  std::vector<int> labels;
  double lambda2 = 0.7;

  static UncertaintyProbe make(std::uint64_t seed, std::size_t n = 8, std::size_t hidden = 4,
                               double lambda2 = 0.7) {
    Rng rng(seed);
    UncertaintyProbe p{EvidenceHead::init(hidden, rng), {}, lambda2};
    for (std::size_t i = 0; i < n; ++i) p.labels.push_back(rng.bernoulli(0.5) ? kBot : kHuman);
    return p;
  }

  Shape input_shape() const { return {labels.size(), head.map.weight.rows()}; }

  ad::ScalarFn loss() const {
    return [this](ad::Tape& tape, ad::Var r) {
      ParamBinder bind(tape, false);
      return uncertainty_loss(evidence_alpha(r, head, bind), labels, lambda2);
    };
  }
};

}  // namespace botumc::testing
