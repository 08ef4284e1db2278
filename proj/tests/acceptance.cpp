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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Criteria 6-8 train the full pipeline on five seeded
// synthetic graphs and take a few minutes on one core.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "botumc/botumc.hpp"
#include "support/logistic_baseline.hpp"
#include "support/op_suite.hpp"
#include "support/oracles.hpp"

namespace {

using namespace botumc;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int id, const std::string& what, bool pass, const std::string& detail) {
  std::printf("criterion %d %-4s %s: %s\n", id, pass ? "PASS" : "FAIL", what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::string list(const std::vector<double>& v) {
  std::ostringstream o;
  o << '[';
  for (std::size_t i = 0; i < v.size(); ++i) o << (i ? " " : "") << fmt("%.4f", v[i]);
  return o.str() + ']';
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0;
  std::string worst_name;
  std::size_t checks = 0;
  auto check = [&](const std::string& name, const ad::ScalarFn& f, const Tensor& x) {
    const double e = ad::finite_diff_check(f, x);
    ++checks;
    if (e > worst) worst = e, worst_name = name;
  };
  Rng rng(2026);
  for (const auto& c : testing::op_cases())
    for (int p = 0; p < 10; ++p) check(c.name, c.f, testing::random_tensor(c.shape, rng, c.lo, c.hi));
  for (std::uint64_t p = 0; p < 10; ++p) {
    auto probe = testing::InterventionProbe::make(500 + p);
    check("intervention_loss", probe.loss(), testing::random_tensor(probe.input_shape(), rng));
  }
  for (std::uint64_t p = 0; p < 10; ++p) {
    auto probe = testing::UncertaintyProbe::make(600 + p, 8, 4, 0.1 * static_cast<double>(p + 1) - 0.05);
    check("uncertainty_loss", probe.loss(), testing::random_tensor(probe.input_shape(), rng, -2, 2));
  }
  const double secs = seconds_since(t0);
  report(1, "gradient suite", worst <= 1e-4 && secs < 60,
         std::to_string(checks) + " checks, max rel err " + fmt("%.3g", worst) + " (" + worst_name + "), " +
             fmt("%.2f s", secs));
}

void evidential_identities() {
  Rng rng(2027);
  EvidenceHead head = EvidenceHead::init(8, rng);
  Tensor r = testing::random_tensor({10000, 8}, rng, -15, 15);
  DirichletOutput d = evidence_forward(r, head);
  double min_alpha = INFINITY, us = 0, psum = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    min_alpha = std::min({min_alpha, d.alpha(i, 0), d.alpha(i, 1)});
    us = std::max(us, std::abs(d.uncertainty[i] * d.strength[i] - 2.0));
    psum = std::max(psum, std::abs(d.expected(i, 0) + d.expected(i, 1) - 1.0));
  }
  report(2, "evidential identities", min_alpha >= 1.0 && us <= 1e-12 && psum <= 1e-12,
         fmt("min alpha %.6f, max |U*S-2| %.2g, max |sum p-1| %.2g over 10000 rows", min_alpha, us, psum));
}

void closed_form_loss() {
  const double hand = uncertainty_loss(Tensor::matrix({{2, 1}}), {kHuman}, 1.0);
  const double hand_err = std::abs(hand - (std::log(3.0) - std::log(2.0)));
  Rng rng(2028);
  double worst = 0;
  for (int k = 0; k < 10; ++k) {
    const double a0 = rng.uniform(1, 10), a1 = rng.uniform(1, 10);
    const int y = k % 2;
    const double lb = std::lgamma(a0) + std::lgamma(a1) - std::lgamma(a0 + a1);
    const double integral = testing::simplex_integral([&](double p0) {
      const double py = y == kHuman ? p0 : 1 - p0;
      return py * std::exp((a0 - 1) * std::log(p0) + (a1 - 1) * std::log1p(-p0) - lb);
    });
    const double loss = uncertainty_loss(Tensor::matrix({{a0, a1}}), {y}, 1.0);
    worst = std::max(worst, std::abs(loss - (-std::log(integral))));
  }
  report(3, "closed-form loss", hand_err <= 1e-9 && worst <= 1e-6,
         fmt("|L - log(3/2)| = %.2g; max |L + log integral| = %.2g over 10 alphas", hand_err, worst));
}

void rgcn_oracle() {
  Rng rng(2029);
  double worst = 0, worst_perm = 0;
  for (int k = 0; k < 20; ++k) {
    const std::size_t n = 2 + rng.below(49), H = 8;
    HeteroGraph g = testing::random_graph(n, 3.0 / static_cast<double>(n), rng);
    EnvironmentModel env = EnvironmentModel::init(1, H, 2, 2, rng.next());
    Tensor x = testing::random_tensor({n, H}, rng);
    ViewOutput a = rgcn_forward(g, x, env);
    ViewOutput o = testing::naive_rgcn(g, x, env, 0.01);
    worst = std::max({worst, max_abs_diff(a.hidden, o.hidden), max_abs_diff(a.representation, o.representation),
                      max_abs_diff(a.logits, o.logits)});

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Tensor px({n, H});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < H; ++c) px(perm[i], c) = x(i, c);
    ViewOutput b = rgcn_forward(permute_graph(g, perm), px, env);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < H; ++c)
        worst_perm = std::max(worst_perm, std::abs(a.representation(i, c) - b.representation(perm[i], c)));
  }
  report(4, "rgcn oracle", worst <= 1e-6 && worst_perm <= 1e-9,
         fmt("max |rgcn - oracle| = %.2g; max permutation gap = %.2g over 20 graphs", worst, worst_perm));
}

void fusion_contract() {
  Rng rng(2030);
  const std::size_t n = 10000;
  std::vector<int> l1(n), l2(n);
  std::vector<double> u1(n), u2(n), t1(n), t2(n);
  for (std::size_t i = 0; i < n; ++i) {
    l1[i] = rng.bernoulli(0.5);
    l2[i] = rng.bernoulli(0.5);
    u1[i] = rng.uniform(1e-6, 1.0);
    u2[i] = rng.bernoulli(0.1) ? u1[i] : rng.uniform(1e-6, 1.0);  // some exact ties
    t1[i] = std::log(u1[i]) * 3.0 + 1.0;
    t2[i] = std::log(u2[i]) * 3.0 + 1.0;
  }
  auto f = fuse_predictions(l1, u1, l2, u2);
  auto g = fuse_predictions(l1, t1, l2, t2);
  std::size_t wrong = 0, changed = 0, ties = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int expect = u1[i] < u2[i] ? l1[i] : l2[i];
    ties += u1[i] == u2[i];
    wrong += f[i].label != expect || f[i].view != (u1[i] < u2[i] ? 1 : 2);
    changed += g[i].label != f[i].label || g[i].view != f[i].view;
  }
  report(5, "fusion contract", wrong == 0 && changed == 0,
         std::to_string(wrong) + " rule violations, " + std::to_string(changed) +
             " changes under a monotone transform, " + std::to_string(ties) + " ties in 10000 pairs");
}

struct SeedRun {
  double base_f1, acc, f1, rho, secs;
  std::vector<double> ablation_f1;  // key_knowledge, intervention_kl, uncertainty_fusion off
  bool fusion_off_is_max;
};

void benchmark() {
  const std::vector<std::uint64_t> seeds{7, 8, 9, 10, 11};
  const std::vector<std::string> disabled{"key_knowledge", "intervention_kl", "uncertainty_fusion"};
  const fs::path work = fs::temp_directory_path() / "botumc_acceptance";
  fs::remove_all(work);
  std::vector<SeedRun> runs;
  std::string first_metrics, first_preds;
  bool identical = true;

  for (std::uint64_t seed : seeds) {
    SyntheticSpec spec;  // 1000 nodes, 30% bots, camouflage rate 0.3
    HeteroGraph g = generate_synthetic(spec, seed).graph;
    RunConfig c = profile_config("small");
    c.seed = seed;
    SeedRun s{};
    s.base_f1 = testing::logistic_baseline(g).f1;
    const auto t0 = Clock::now();
    PipelineResult r = run_pipeline(c, g, work / ("seed" + std::to_string(seed)));
    s.secs = seconds_since(t0);
    s.acc = r.metrics.accuracy;
    s.f1 = r.metrics.f1;
    s.rho = r.calibration.rank_correlation.value_or(0.0);
    for (const auto& name : disabled) {
      PipelineResult a = run_pipeline(c, g, parse_toggle_set(name));
      s.ablation_f1.push_back(a.metrics.f1);
      if (name == "uncertainty_fusion") s.fusion_off_is_max = a.metrics.f1 == std::max(a.view1_metrics.f1, a.view2_metrics.f1);
    }
    std::printf("  seed %llu: baseline f1 %.4f | fused acc %.4f f1 %.4f | rho %s | ablations f1 %s | %.1f s\n",
                static_cast<unsigned long long>(seed), s.base_f1, s.acc, s.f1,
                r.calibration.rank_correlation ? fmt("%.3f", s.rho).c_str() : "undefined",
                list(s.ablation_f1).c_str(), s.secs);
    std::fflush(stdout);
    runs.push_back(s);

    if (seed == seeds.front()) {
      // Same config and seed again, into a second directory.
      run_pipeline(c, g, work / "rerun");
      for (const char* f : {"metrics.json", "predictions.jsonl"})
        identical = identical && slurp(work / "seed7" / f) == slurp(work / "rerun" / f) &&
                    !slurp(work / "rerun" / f).empty();
    }
  }

  auto column = [&](auto field) {
    std::vector<double> v;
    for (const auto& s : runs) v.push_back(field(s));
    return v;
  };
  const double acc = median(column([](const SeedRun& s) { return s.acc; }));
  const double f1 = median(column([](const SeedRun& s) { return s.f1; }));
  const double base = median(column([](const SeedRun& s) { return s.base_f1; }));
  const auto secs = column([](const SeedRun& s) { return s.secs; });
  const double slowest = *std::max_element(secs.begin(), secs.end());
  report(6, "synthetic benchmark", acc >= 0.85 && f1 >= 0.80 && f1 - base >= 0.02 && slowest < 300,
         fmt("median acc %.4f, median f1 %.4f, baseline median f1 %.4f (margin %+.4f)", acc, f1, base, f1 - base) +
             fmt(", slowest seed %.1f s", slowest));

  const auto rhos = column([](const SeedRun& s) { return s.rho; });
  report(7, "calibration trend", median(rhos) >= 0.5, "median rho " + fmt("%.4f", median(rhos)) + " over " + list(rhos));

  bool ordered = true, fusion_max = true;
  std::string detail = "full " + fmt("%.4f", f1);
  for (std::size_t k = 0; k < disabled.size(); ++k) {
    const double m = median(column([k](const SeedRun& s) { return s.ablation_f1[k]; }));
    ordered = ordered && f1 >= m;
    detail += ", -" + disabled[k] + " " + fmt("%.4f", m);
  }
  for (const auto& s : runs) fusion_max = fusion_max && s.fusion_off_is_max;
  detail += fusion_max ? "; fusion-off equals max of views on every seed" : "; fusion-off differs from max of views";
  report(8, "ablation trend", ordered && fusion_max, detail);

  report(9, "determinism", identical,
         identical ? "metrics.json and predictions.jsonl byte-identical across reruns" : "rerun output differs");
  fs::remove_all(work);
}

}  // namespace

int main() {
  try {
    gradient_suite();
    evidential_identities();
    closed_form_loss();
    rgcn_oracle();
    fusion_contract();
    benchmark();
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
