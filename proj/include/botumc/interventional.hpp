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
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "botumc/autodiff.hpp"
#include "botumc/config.hpp"
#include "botumc/features.hpp"
#include "botumc/graph.hpp"
#include "botumc/optim.hpp"
#include "botumc/params.hpp"
#include "botumc/random.hpp"

namespace botumc {

// One relational GCN environment: L message-passing layers, the
// representation head r = phi(x W2 + b2), and a 2-class classifier on r.
struct EnvironmentModel {
  int env_id = 1;
  std::vector<Tensor> self_weights;                   // [L] of [H,H]
  std::vector<std::vector<Tensor>> relation_weights;  // [L][R] of [H,H]
  Linear head;                                        // [H,H], [H]
  Linear classifier;                                  // [H,2], [2]

  static EnvironmentModel init(int env_id, std::size_t hidden, std::size_t layers,
                               std::size_t relations, std::uint64_t seed) {
    Rng rng(seed);
    EnvironmentModel m;
    m.env_id = env_id;
    for (std::size_t l = 0; l < layers; ++l) {
      m.self_weights.push_back(uniform_init({hidden, hidden}, hidden, rng));
      m.relation_weights.emplace_back();
      for (std::size_t r = 0; r < relations; ++r)
        m.relation_weights.back().push_back(uniform_init({hidden, hidden}, hidden, rng));
    }
    m.head = Linear::init(hidden, hidden, rng);
    m.classifier = Linear::init(hidden, 2, rng);
    return m;
  }

  std::size_t hidden() const { return head.weight.rows(); }
  std::size_t layers() const { return self_weights.size(); }

  NamedParams parameters() {
    NamedParams p;
    for (std::size_t l = 0; l < self_weights.size(); ++l) {
      p.emplace_back("layer" + std::to_string(l) + ".self", &self_weights[l]);
      for (std::size_t r = 0; r < relation_weights[l].size(); ++r)
        p.emplace_back("layer" + std::to_string(l) + ".rel" + std::to_string(r), &relation_weights[l][r]);
    }
    p.emplace_back("head.w", &head.weight);
    p.emplace_back("head.b", &head.bias);
    p.emplace_back("cls.w", &classifier.weight);
    p.emplace_back("cls.b", &classifier.bias);
    return p;
  }

  ConstNamedParams parameters() const {
    ConstNamedParams out;
    for (auto& [n, t] : const_cast<EnvironmentModel*>(this)->parameters()) out.emplace_back(n, t);
    return out;
  }

  std::size_t message_passing_parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < layers(); ++l) {
      n += self_weights[l].size();
      for (const auto& w : relation_weights[l]) n += w.size();
    }
    return n;
  }
  std::size_t head_parameter_count() const { return head.weight.size() + head.bias.size(); }
};

struct ViewOutput {
  Tensor hidden;          // x^(L), [n,H]
  Tensor representation;  // r, [n,H]
  Tensor logits;          // [n,2]
  Tensor distribution;    // softmax(logits), [n,2]
};

struct ViewVars {
  ad::Var hidden, representation, logits, distribution;

  ViewOutput values() const {
    return {hidden.value(), representation.value(), logits.value(), distribution.value()};
  }
};

struct ForwardOptions {
  ad::Activation activation = ad::Activation::kLeakyRelu;
  double slope = 0.01;
  double dropout = 0.0;   // on r; only applied when rng is set
  Rng* rng = nullptr;
};

namespace detail {

inline ad::Var dropout(ad::Var x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  Tensor mask(x.value().shape());
  const double keep = 1.0 - rate;
  for (double& m : mask.values()) m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  return ad::mul(x, x.tape->constant(std::move(mask)));
}

}  // namespace detail

// x^(l+1)_i = x_i Theta_self + sum_r mean_{j in N_r(i)} x_j Theta_r, with the
// activation between layers, then r = phi(x^(L) W2 + b2) and the classifier.
inline ViewVars rgcn_forward(ad::Tape& tape, const HeteroGraph& g, ad::Var features,
                             const EnvironmentModel& env, ParamBinder& bind,
                             const ForwardOptions& opts = {}) {
  (void)tape;
  const Tensor& xv = features.value();
  if (xv.rank() != 2 || xv.rows() != g.node_count()) {
    fail<ContractError>("features ", shape_str(xv.shape()), " for a graph of ", g.node_count(), " nodes");
  }
  if (xv.cols() != env.hidden()) {
    fail<ContractError>("features have ", xv.cols(), " columns but the environment expects ", env.hidden());
  }
  if (!env.relation_weights.empty() && env.relation_weights[0].size() != g.relations().size()) {
    fail<ContractError>("environment has ", env.relation_weights[0].size(), " relation transforms, graph has ",
                        g.relations().size(), " relations");
  }
  ad::Var x = features;
  for (std::size_t l = 0; l < env.layers(); ++l) {
    ad::Var next = ad::matmul(x, bind(env.self_weights[l]));
    for (std::size_t r = 0; r < g.relations().size(); ++r) {
      ad::Var msg = ad::aggregate(x, g.index().adjacency(r));
      next = ad::add(next, ad::matmul(msg, bind(env.relation_weights[l][r])));
    }
    x = (l + 1 < env.layers()) ? ad::activation(opts.activation, next, opts.slope) : next;
  }
  ad::Var rep = ad::activation(opts.activation, ad::linear(x, bind(env.head.weight), bind(env.head.bias)),
                               opts.slope);
  ad::Var dropped = opts.rng ? detail::dropout(rep, opts.dropout, *opts.rng) : rep;
  ad::Var logits = ad::linear(dropped, bind(env.classifier.weight), bind(env.classifier.bias));
  return {x, rep, logits, ad::softmax_rows(logits)};
}

inline ViewOutput rgcn_forward(const HeteroGraph& g, const Tensor& features, const EnvironmentModel& env,
                               const ForwardOptions& opts = {}) {
  ad::Tape tape;
  ParamBinder bind(tape, false);
  ForwardOptions eval = opts;
  eval.rng = nullptr;
  return rgcn_forward(tape, g, tape.constant(features), env, bind, eval).values();
}

// ---- losses ----------------------------------------------------------------

// Labels restricted to a node subset, in subset order.
struct LabeledSubset {
  std::vector<std::size_t> nodes;
  std::vector<int> labels;

  static LabeledSubset of(const HeteroGraph& g, Split split) {
    LabeledSubset s;
    s.nodes = g.labeled_in(split);
    for (auto i : s.nodes) s.labels.push_back(*g.node(i).label);
    return s;
  }
};

// -(1/|V|) sum_{i in V} min(KL(p_i||q_i) + KL(q_i||p_i), tau).
// Always in [-tau, 0]; symmetric in its arguments.
inline ad::Var environment_divergence_loss(ad::Var p, ad::Var q, const std::vector<std::size_t>& nodes,
                                           double tau) {
  if (!(tau > 0)) fail<ContractError>("divergence clamp must be positive");
  if (p.shape() != q.shape()) {
    fail<ContractError>("views cover different node sets: ", shape_str(p.shape()), " vs ", shape_str(q.shape()));
  }
  if (nodes.empty()) fail<ContractError>("divergence over an empty node set");
  ad::Var ps = ad::select_rows(p, nodes);
  ad::Var qs = ad::select_rows(q, nodes);
  ad::Var sym = ad::clamp_max(ad::add(ad::rowwise_kl(ps, qs), ad::rowwise_kl(qs, ps)), tau);
  return ad::scale(ad::mean(sym), -1.0);
}

inline double environment_divergence_loss(const ViewOutput& v1, const ViewOutput& v2,
                                          const std::vector<std::size_t>& nodes, double tau) {
  if (v1.distribution.shape() != v2.distribution.shape()) {
    fail<ContractError>("views cover different node sets");
  }
  ad::Tape tape;
  return environment_divergence_loss(tape.constant(v1.distribution), tape.constant(v2.distribution), nodes, tau)
      .value()
      .item();
}

struct InterventionTerms {
  ad::Var divergence, ce1, ce2, total;
};

// lambda1 * divergence + (1 - lambda1) * (CE_1 + CE_2) over the labeled subset.
inline InterventionTerms intervention_loss(const ViewVars& v1, const ViewVars& v2, const LabeledSubset& train,
                                           double lambda1, double tau) {
  if (!(lambda1 >= 0.0 && lambda1 <= 1.0)) fail<ConfigError>("lambda1 = ", lambda1, " is outside [0, 1]");
  InterventionTerms t;
  t.divergence = environment_divergence_loss(v1.distribution, v2.distribution, train.nodes, tau);
  t.ce1 = ad::cross_entropy(ad::select_rows(v1.logits, train.nodes), train.labels);
  t.ce2 = ad::cross_entropy(ad::select_rows(v2.logits, train.nodes), train.labels);
  t.total = ad::add(ad::scale(t.divergence, lambda1), ad::scale(ad::add(t.ce1, t.ce2), 1.0 - lambda1));
  return t;
}

struct LossRecord {
  int epoch;
  double divergence, ce1, ce2, total;
};

inline void write_loss_trace(const std::vector<LossRecord>& trace, std::ostream& out) {
  out << "epoch,L_KL,CE1,CE2,L_Inter\n";
  out.precision(17);
  for (const auto& r : trace) {
    out << r.epoch << ',' << r.divergence << ',' << r.ce1 << ',' << r.ce2 << ',' << r.total << '\n';
  }
}

// ---- training --------------------------------------------------------------

struct StageOneResult {
  FeatureProjector projector;
  EnvironmentModel env1, env2;
  Tensor features;  // assembled X, [n,H]
  ViewOutput view1, view2;
  ViewOutput initial_view1, initial_view2;
  std::vector<LossRecord> trace;
};

struct EnvironmentSeeds {
  std::uint64_t projector, env1, env2;

  static EnvironmentSeeds from(const RunConfig& c) {
    std::uint64_t e1 = derive_seed(c.seed, 101);
    return {derive_seed(c.seed, 1), e1, c.tie_environment_seeds ? e1 : derive_seed(c.seed, 102)};
  }
};

namespace detail {

inline void check_trainable(const LabeledSubset& train) {
  if (train.nodes.empty()) fail<DegenerateDataError>("the train split has no labeled nodes");
  bool human = false, bot = false;
  for (int y : train.labels) (y == kBot ? bot : human) = true;
  if (!(human && bot)) fail<DegenerateDataError>("the train split holds a single class");
}

}  // namespace detail

// Trains the feature projector and both environments jointly on the
// intervention loss. With fixed_features set, the projector is skipped and
// the given matrix is used as X.
inline StageOneResult train_environments(const HeteroGraph& g, const RawBlocks* raw, const RunConfig& config,
                                         const Tensor* fixed_features = nullptr) {
  config.validate();
  const LabeledSubset train = LabeledSubset::of(g, Split::kTrain);
  detail::check_trainable(train);
  if (!raw && !fixed_features) fail<ContractError>("train_environments needs raw blocks or features");

  const EnvironmentSeeds seeds = EnvironmentSeeds::from(config);
  StageOneResult res;
  Rng proj_rng(seeds.projector);
  if (raw) res.projector = FeatureProjector::init(*raw, config.hidden, proj_rng);
  const std::size_t R = g.relations().size();
  res.env1 = EnvironmentModel::init(1, config.hidden, config.layers, R, seeds.env1);
  res.env2 = EnvironmentModel::init(2, config.hidden, config.layers, R, seeds.env2);

  NamedParams params;
  if (raw) params = res.projector.parameters();
  for (auto& p : res.env1.parameters()) params.push_back(p);
  for (auto& p : res.env2.parameters()) params.push_back(p);
  Adam adam(tensors_of(params), {config.stage1_lr, config.adam_beta1, config.adam_beta2, config.adam_eps});

  Rng drop1(derive_seed(seeds.env1, 7)), drop2(derive_seed(seeds.env2, 7));
  ForwardOptions eval_opts{config.activation, config.leaky_slope, 0.0, nullptr};

  auto evaluate_views = [&](ViewOutput& v1, ViewOutput& v2) {
    ad::Tape tape;
    ParamBinder bind(tape, false);
    ad::Var x = raw ? assemble_features(tape, *raw, res.projector, bind, config.leaky_slope)
                    : tape.constant(*fixed_features);
    res.features = x.value();
    v1 = rgcn_forward(tape, g, x, res.env1, bind, eval_opts).values();
    v2 = rgcn_forward(tape, g, x, res.env2, bind, eval_opts).values();
  };
  evaluate_views(res.initial_view1, res.initial_view2);

  for (int epoch = 0; epoch < config.stage1_epochs; ++epoch) {
    ad::Tape tape;
    ParamBinder bind(tape, true);
    ad::Var x = raw ? assemble_features(tape, *raw, res.projector, bind, config.leaky_slope)
                    : tape.constant(*fixed_features);
    ForwardOptions o1{config.activation, config.leaky_slope, config.stage1_dropout, &drop1};
    ForwardOptions o2{config.activation, config.leaky_slope, config.stage1_dropout, &drop2};
    ViewVars v1 = rgcn_forward(tape, g, x, res.env1, bind, o1);
    ViewVars v2 = rgcn_forward(tape, g, x, res.env2, bind, o2);
    InterventionTerms loss = intervention_loss(v1, v2, train, config.lambda1, config.kl_clamp);
    res.trace.push_back({epoch, loss.divergence.value().item(), loss.ce1.value().item(), loss.ce2.value().item(),
                         loss.total.value().item()});
    tape.backward(loss.total);
    adam.step(bind.grads(params));
  }
  evaluate_views(res.view1, res.view2);
  return res;
}

inline StageOneResult train_environments(const HeteroGraph& g, const Tensor& features, const RunConfig& config) {
  return train_environments(g, nullptr, config, &features);
}

}  // namespace botumc
