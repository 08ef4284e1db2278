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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "botumc/errors.hpp"

namespace botumc {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }
};

struct Metrics {
  double accuracy = 0.0;
  double f1 = 0.0;  // bot is the positive class
  ConfusionCounts counts;
};

inline ConfusionCounts confusion(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) fail<ContractError>("metrics: ", predicted.size(), " predictions for ", truth.size(), " labels");
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted[i] == 1, t = truth[i] == 1;
    if (p && t) ++c.tp;
    else if (p && !t) ++c.fp;
    else if (!p && t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

// Accuracy and binary F1 = 2TP / (2TP + FP + FN).
inline Metrics evaluate_metrics(std::span<const int> predicted, std::span<const int> truth) {
  if (truth.empty()) fail<ContractError>("metrics over an empty evaluation split");
  const bool has_pos = std::find(truth.begin(), truth.end(), 1) != truth.end();
  const bool has_neg = std::find_if(truth.begin(), truth.end(), [](int y) { return y != 1; }) != truth.end();
  if (!(has_pos && has_neg)) {
    fail<DegenerateDataError>("binary F1 is undefined: evaluation labels hold a single class");
  }
  Metrics m;
  m.counts = confusion(predicted, truth);
  const auto& c = m.counts;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  const double denom = static_cast<double>(2 * c.tp + c.fp + c.fn);
  m.f1 = denom > 0 ? 2.0 * static_cast<double>(c.tp) / denom : 0.0;
  return m;
}

// Average ranks (1-based), ties share the mean rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

// Spearman correlation; nullopt with fewer than two points or a constant side.
inline std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail<ContractError>("spearman: length mismatch");
  if (x.size() < 2) return std::nullopt;
  auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

struct CalibrationReport {
  std::vector<double> edges;                   // bins + 1 edges over [0,1]
  std::vector<std::size_t> counts;
  std::vector<std::optional<double>> accuracy;  // empty bins have none
  std::vector<std::optional<double>> mean_uncertainty;
  std::optional<double> rank_correlation;      // bin mean U vs bin error rate

  std::size_t total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }
};

// Equal-width uncertainty bins; bin b holds U in [b/B, (b+1)/B), the last
// bin also holds U = 1.
inline CalibrationReport calibration_report(std::span<const double> uncertainty, std::span<const int> predicted,
                                            std::span<const int> truth, std::size_t bins = 10) {
  if (bins == 0) fail<ContractError>("calibration needs at least one bin");
  if (uncertainty.size() != predicted.size() || predicted.size() != truth.size()) {
    fail<ContractError>("calibration inputs differ in length");
  }
  CalibrationReport rep;
  for (std::size_t b = 0; b <= bins; ++b) rep.edges.push_back(static_cast<double>(b) / static_cast<double>(bins));
  rep.counts.assign(bins, 0);
  std::vector<std::size_t> correct(bins, 0);
  std::vector<double> usum(bins, 0.0);
  for (std::size_t i = 0; i < uncertainty.size(); ++i) {
    const double u = uncertainty[i];
    if (!(u > 0.0 && u <= 1.0)) fail<ValidationError>("uncertainty ", u, " at row ", i, " is outside (0, 1]");
    auto b = std::min(bins - 1, static_cast<std::size_t>(u * static_cast<double>(bins)));
    ++rep.counts[b];
    usum[b] += u;
    if (predicted[i] == truth[i]) ++correct[b];
  }
  std::vector<double> bin_u, bin_err;
  for (std::size_t b = 0; b < bins; ++b) {
    if (rep.counts[b] == 0) {
      rep.accuracy.emplace_back();
      rep.mean_uncertainty.emplace_back();
      continue;
    }
    const double n = static_cast<double>(rep.counts[b]);
    rep.accuracy.emplace_back(static_cast<double>(correct[b]) / n);
    rep.mean_uncertainty.emplace_back(usum[b] / n);
    bin_u.push_back(usum[b] / n);
    bin_err.push_back(1.0 - *rep.accuracy.back());
  }
  rep.rank_correlation = spearman(bin_u, bin_err);
  return rep;
}

inline nlohmann::ordered_json to_json(const CalibrationReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  nlohmann::ordered_json j;
  j["edges"] = r.edges;
  j["counts"] = r.counts;
  j["accuracy"] = nlohmann::ordered_json::array();
  j["mean_uncertainty"] = nlohmann::ordered_json::array();
  for (std::size_t b = 0; b < r.counts.size(); ++b) {
    j["accuracy"].push_back(opt(r.accuracy[b]));
    j["mean_uncertainty"].push_back(opt(r.mean_uncertainty[b]));
  }
  j["rank_correlation"] = opt(r.rank_correlation);
  return j;
}

}  // namespace botumc
