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
#include <span>
#include <vector>

#include "botumc/autodiff.hpp"
#include "botumc/config.hpp"
#include "botumc/interventional.hpp"
#include "botumc/optim.hpp"
#include "botumc/params.hpp"

namespace botumc {

inline constexpr std::size_t kClasses = 2;

// Dirichlet evidence per node for the binary task.
//   alpha_k = evidence_k + 1,  S = sum_k alpha_k,  U = 2 / S,  p = alpha / S.
struct DirichletOutput {
  Tensor alpha;                   // [n,2], entries >= 1
  Tensor evidence;                // alpha - 1
  std::vector<double> strength;   // S
  std::vector<double> uncertainty;  // U
  Tensor expected;                // p-hat, [n,2]
  std::vector<int> predicted;     // argmax p-hat; ties go to class 0

  std::size_t size() const { return strength.size(); }

  static DirichletOutput from_alpha(Tensor alpha) {
    if (alpha.rank() != 2 || alpha.cols() != kClasses) {
      fail<DimensionError>("alpha must be [n,2], got ", shape_str(alpha.shape()));
    }
    DirichletOutput d;
    const std::size_t n = alpha.rows();
    d.evidence = Tensor(alpha.shape());
    d.expected = Tensor(alpha.shape());
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < kClasses; ++k) {
        if (!(alpha(i, k) > 0)) fail<DomainError>("alpha(", i, ",", k, ") = ", alpha(i, k), " is not positive");
        d.evidence(i, k) = alpha(i, k) - 1.0;
        s += alpha(i, k);
      }
      d.strength.push_back(s);
      d.uncertainty.push_back(static_cast<double>(kClasses) / s);
      for (std::size_t k = 0; k < kClasses; ++k) d.expected(i, k) = alpha(i, k) / s;
      d.predicted.push_back(d.expected(i, 1) > d.expected(i, 0) ? kBot : kHuman);
    }
    d.alpha = std::move(alpha);
    return d;
  }
};

// Linear map H -> 2 followed by alpha = softplus(.) + 1.
struct EvidenceHead {
  Linear map;

  static EvidenceHead init(std::size_t hidden, Rng& rng) { return {Linear::init(hidden, kClasses, rng)}; }
  static EvidenceHead from_classifier(const Linear& classifier) { return {classifier}; }

  NamedParams parameters() { return {{"evidence.w", &map.weight}, {"evidence.b", &map.bias}}; }
  ConstNamedParams parameters() const { return {{"evidence.w", &map.weight}, {"evidence.b", &map.bias}}; }
};

inline ad::Var evidence_alpha(ad::Var representation, const EvidenceHead& head, ParamBinder& bind) {
  return ad::add_scalar(ad::softplus(ad::linear(representation, bind(head.map.weight), bind(head.map.bias))), 1.0);
}

inline DirichletOutput evidence_forward(const Tensor& representation, const EvidenceHead& head) {
  for (std::size_t i = 0; i < representation.rows(); ++i) {
    for (double v : representation.row(i)) {
      if (!std::isfinite(v)) fail<ContractError>("representation of node ", i, " is not finite");
    }
  }
  ad::Tape tape;
  ParamBinder bind(tape, false);
  return DirichletOutput::from_alpha(evidence_alpha(tape.constant(representation), head, bind).value());
}

// log Dir(p | alpha) on the 1-simplex, with log B(alpha) via lgamma.
inline double dirichlet_log_density(std::span<const double> p, std::span<const double> alpha) {
  if (p.size() != kClasses || alpha.size() != kClasses) fail<DimensionError>("dirichlet density is binary");
  double log_beta = -std::lgamma(alpha[0] + alpha[1]);
  double s = 0.0;
  for (std::size_t k = 0; k < kClasses; ++k) {
    if (!(alpha[k] > 0)) fail<DomainError>("dirichlet parameter alpha_", k, " = ", alpha[k], " is not positive");
    if (p[k] < 0.0 || p[k] > 1.0) fail<DomainError>("p_", k, " = ", p[k], " is outside [0, 1]");
    if (p[k] == 0.0) {
      if (alpha[k] < 1.0) fail<DomainError>("density is unbounded at the simplex boundary for alpha_", k, " < 1");
      if (alpha[k] > 1.0) return -INFINITY;
      // alpha_k == 1: the factor p^0 is 1.
    } else {
      s += (alpha[k] - 1.0) * std::log(p[k]);
    }
    log_beta += std::lgamma(alpha[k]);
  }
  if (std::abs(p[0] + p[1] - 1.0) > 1e-12) fail<DomainError>("p is not on the simplex");
  return s - log_beta;
}

// Per-row loss, mean over rows:
//   lambda2 * (log S - log alpha_y) + (1 - lambda2) * (Y - p1)^2 * (1 - U)
// with Y the bot indicator and p1 = alpha_1 / S.
inline ad::Var uncertainty_loss(ad::Var alpha, const std::vector<int>& labels, double lambda2) {
  if (!(lambda2 >= 0.0 && lambda2 <= 1.0)) fail<ConfigError>("lambda2 = ", lambda2, " is outside [0, 1]");
  const Tensor& av = alpha.value();
  if (av.rank() != 2 || av.cols() != kClasses || av.rows() != labels.size()) {
    fail<DimensionError>("uncertainty_loss: alpha ", shape_str(av.shape()), " for ", labels.size(), " labels");
  }
  if (labels.empty()) fail<ContractError>("uncertainty_loss over zero rows");
  ad::Tape& tape = *alpha.tape;
  Tensor onehot(av.shape()), ycol({labels.size(), 1});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != kHuman && labels[i] != kBot) fail<ValidationError>("label ", labels[i], " at row ", i);
    onehot(i, static_cast<std::size_t>(labels[i])) = 1.0;
    ycol[i] = labels[i] == kBot ? 1.0 : 0.0;
  }
  ad::Var strength = ad::row_sum(alpha);
  ad::Var marginal = ad::row_sum(ad::mul(tape.constant(onehot), ad::sub(ad::log(strength), ad::log(alpha))));
  ad::Var p_bot = ad::div(ad::column(alpha, 1), strength);
  ad::Var u = ad::div(tape.constant(Tensor::scalar(static_cast<double>(kClasses))), strength);
  ad::Var miss = ad::mul(ad::square(ad::sub(tape.constant(ycol), p_bot)),
                         ad::sub(tape.constant(Tensor::scalar(1.0)), u));
  return ad::mean(ad::add(ad::scale(marginal, lambda2), ad::scale(miss, 1.0 - lambda2)));
}

inline double uncertainty_loss(const Tensor& alpha, const std::vector<int>& labels, double lambda2) {
  ad::Tape tape;
  return uncertainty_loss(tape.constant(alpha), labels, lambda2).value().item();
}

// ---- fusion ----------------------------------------------------------------

struct FusedPrediction {
  int label;
  double uncertainty;
  int view;  // 1 or 2
};

// View 1 wins only on strictly lower uncertainty; ties go to view 2.
inline std::vector<FusedPrediction> fuse_predictions(std::span<const int> labels1, std::span<const double> u1,
                                                     std::span<const int> labels2, std::span<const double> u2) {
  if (labels1.size() != u1.size() || labels2.size() != u2.size() || labels1.size() != labels2.size()) {
    fail<ContractError>("fusion inputs cover different node sets");
  }
  std::vector<FusedPrediction> out;
  out.reserve(labels1.size());
  for (std::size_t i = 0; i < labels1.size(); ++i) {
    if (u1[i] < u2[i]) out.push_back({labels1[i], u1[i], 1});
    else out.push_back({labels2[i], u2[i], 2});
  }
  return out;
}

inline std::vector<FusedPrediction> fuse_predictions(const DirichletOutput& view1, const DirichletOutput& view2) {
  return fuse_predictions(view1.predicted, view1.uncertainty, view2.predicted, view2.uncertainty);
}

// ---- training --------------------------------------------------------------

struct StageTwoResult {
  EvidenceHead head1, head2;
  DirichletOutput out1, out2;
  std::vector<double> trace1, trace2;  // per-epoch uncertainty loss
};

// Trains one evidence head per view on frozen representations. With
// share_evidence_head, a single head is fit to both views.
inline StageTwoResult train_uncertainty(const Tensor& rep1, const Tensor& rep2, EvidenceHead head1,
                                        EvidenceHead head2, const LabeledSubset& train, const RunConfig& config) {
  config.validate();
  detail::check_trainable(train);
  if (rep1.shape() != rep2.shape()) fail<ContractError>("view representations differ in shape");

  StageTwoResult res;
  const AdamOptions adam_opts{config.stage2_lr, config.adam_beta1, config.adam_beta2, config.adam_eps};
  const std::uint64_t base = derive_seed(config.seed, 200);
  const Tensor rep1_train = ad::evaluate([&](ad::Tape&, std::vector<ad::Var>& v) { return ad::select_rows(v[0], train.nodes); }, {rep1});
  const Tensor rep2_train = ad::evaluate([&](ad::Tape&, std::vector<ad::Var>& v) { return ad::select_rows(v[0], train.nodes); }, {rep2});

  auto fit = [&](std::vector<EvidenceHead*> heads, std::vector<const Tensor*> reps, std::vector<std::vector<double>*> traces,
                 std::uint64_t seed) {
    NamedParams params;
    for (auto* h : heads)
      for (auto& p : h->parameters()) params.push_back(p);
    Adam adam(tensors_of(params), adam_opts);
    Rng drop(seed);
    for (int epoch = 0; epoch < config.stage2_epochs; ++epoch) {
      ad::Tape tape;
      ParamBinder bind(tape, true);
      ad::Var total;
      bool first = true;
      for (std::size_t k = 0; k < reps.size(); ++k) {
        const EvidenceHead& h = *heads[std::min(k, heads.size() - 1)];
        ad::Var r = detail::dropout(tape.constant(*reps[k]), config.stage2_dropout, drop);
        ad::Var loss = uncertainty_loss(evidence_alpha(r, h, bind), train.labels, config.lambda2);
        traces[k]->push_back(loss.value().item());
        total = first ? loss : ad::add(total, loss);
        first = false;
      }
      tape.backward(total);
      adam.step(bind.grads(params));
    }
  };

  res.head1 = std::move(head1);
  res.head2 = std::move(head2);
  if (config.share_evidence_head) {
    fit({&res.head1}, {&rep1_train, &rep2_train}, {&res.trace1, &res.trace2}, base);
    res.head2 = res.head1;
  } else {
    fit({&res.head1}, {&rep1_train}, {&res.trace1}, derive_seed(base, 1));
    fit({&res.head2}, {&rep2_train}, {&res.trace2}, derive_seed(base, 2));
  }
  res.out1 = evidence_forward(rep1, res.head1);
  res.out2 = evidence_forward(rep2, res.head2);
  return res;
}

}  // namespace botumc
