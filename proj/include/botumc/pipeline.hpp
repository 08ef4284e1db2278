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
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "botumc/config.hpp"
#include "botumc/evidential.hpp"
#include "botumc/features.hpp"
#include "botumc/graph.hpp"
#include "botumc/interventional.hpp"
#include "botumc/metrics.hpp"

namespace botumc {

// Components that can be switched off for ablation.
struct Toggles {
  bool key_knowledge = true;
  bool intervention_kl = true;
  bool uncertainty_fusion = true;

  friend bool operator==(const Toggles&, const Toggles&) = default;
};

inline const std::vector<std::string>& toggle_names() {
  static const std::vector<std::string> names{"key_knowledge", "intervention_kl", "uncertainty_fusion"};
  return names;
}

// "full" or names joined by '+', each switched off: "intervention_kl+key_knowledge".
inline Toggles parse_toggle_set(const std::string& spec) {
  Toggles t;
  if (spec == "full") return t;
  std::stringstream ss(spec);
  for (std::string name; std::getline(ss, name, '+');) {
    if (name == "key_knowledge") t.key_knowledge = false;
    else if (name == "intervention_kl") t.intervention_kl = false;
    else if (name == "uncertainty_fusion") t.uncertainty_fusion = false;
    else fail<ConfigError>("unknown toggle '", name, "'");
  }
  return t;
}

struct PredictionRecord {
  std::size_t id;
  std::optional<int> y;
  int yhat1;
  double u1;
  int yhat2;
  double u2;
  int yhat_fused;
  int chosen_view;
};

inline std::string prediction_json_line(const PredictionRecord& p) {
  nlohmann::ordered_json j;
  j["id"] = p.id;
  j["y"] = p.y ? nlohmann::ordered_json(*p.y) : nlohmann::ordered_json();
  j["yhat1"] = p.yhat1;
  j["u1"] = p.u1;
  j["yhat2"] = p.yhat2;
  j["u2"] = p.u2;
  j["yhat_fused"] = p.yhat_fused;
  j["chosen_view"] = p.chosen_view;
  return j.dump();
}

inline std::vector<PredictionRecord> read_predictions(std::istream& in) {
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      PredictionRecord p;
      p.id = j.at("id").get<std::size_t>();
      if (!j.at("y").is_null()) p.y = j["y"].get<int>();
      p.yhat1 = j.at("yhat1").get<int>();
      p.u1 = j.at("u1").get<double>();
      p.yhat2 = j.at("yhat2").get<int>();
      p.u2 = j.at("u2").get<double>();
      p.yhat_fused = j.at("yhat_fused").get<int>();
      p.chosen_view = j.at("chosen_view").get<int>();
      out.push_back(p);
    } catch (const nlohmann::json::exception& e) {
      fail<DataError>("predictions line ", n, ": ", e.what());
    }
  }
  return out;
}

inline std::vector<PredictionRecord> load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail<DataError>("cannot open predictions '", path, "'");
  return read_predictions(in);
}

struct MetricsReport {
  double accuracy = 0.0;
  double f1 = 0.0;
  std::size_t n_test = 0;
  std::string profile;
  std::uint64_t seed = 0;
};

inline std::string metrics_json(const MetricsReport& m) {
  nlohmann::ordered_json j;
  j["accuracy"] = m.accuracy;
  j["f1"] = m.f1;
  j["n_test"] = m.n_test;
  j["profile"] = m.profile;
  j["seed"] = m.seed;
  return j.dump();
}

struct PipelineResult {
  StageOneResult stage1;
  StageTwoResult stage2;
  std::vector<FusedPrediction> fused;         // all nodes
  std::vector<PredictionRecord> predictions;  // test split
  MetricsReport metrics;
  Metrics view1_metrics, view2_metrics;       // stage-one classifiers on test
  Metrics head1_metrics, head2_metrics;       // evidence heads on test
  CalibrationReport calibration;
  int reported_view = 0;  // 0 = fused; 1 or 2 when fusion is off
};

namespace detail {

// Re-raises with the stage name, keeping the error family.
template <typename F>
auto run_stage(const char* stage, F&& f) -> decltype(f()) {
  auto prefix = [&](const std::exception& e) { return std::string("stage ") + stage + ": " + e.what(); };
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(prefix(e));
  } catch (const DataError& e) {
    throw DataError(prefix(e));
  } catch (const NumericError& e) {
    throw NumericError(prefix(e));
  } catch (const ContractError& e) {
    throw ContractError(prefix(e));
  }
}

inline std::vector<int> argmax_labels(const Tensor& dist) {
  std::vector<int> out;
  for (std::size_t i = 0; i < dist.rows(); ++i) out.push_back(dist(i, 1) > dist(i, 0) ? kBot : kHuman);
  return out;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

}  // namespace detail

// Feature assembly, interventional training, uncertainty training, fusion
// and test-split evaluation. Pure in (config, graph, toggles).
inline PipelineResult run_pipeline(const RunConfig& config_in, const HeteroGraph& g, const Toggles& toggles = {}) {
  RunConfig config = config_in;
  config.validate();
  if (!toggles.intervention_kl) config.lambda1 = 0.0;

  PipelineResult res;
  RawBlocks raw = detail::run_stage("features", [&] { return build_raw_blocks(g, {toggles.key_knowledge}); });
  res.stage1 = detail::run_stage("intervention", [&] { return train_environments(g, &raw, config); });

  const LabeledSubset train = LabeledSubset::of(g, Split::kTrain);
  res.stage2 = detail::run_stage("uncertainty", [&] {
    Rng rng(derive_seed(config.seed, 300));
    EvidenceHead h1 = config.warm_start_heads ? EvidenceHead::from_classifier(res.stage1.env1.classifier)
                                              : EvidenceHead::init(config.hidden, rng);
    EvidenceHead h2 = config.warm_start_heads ? EvidenceHead::from_classifier(res.stage1.env2.classifier)
                                              : EvidenceHead::init(config.hidden, rng);
    return train_uncertainty(res.stage1.view1.representation, res.stage1.view2.representation, h1, h2, train,
                             config);
  });

  detail::run_stage("evaluation", [&] {
    res.fused = fuse_predictions(res.stage2.out1, res.stage2.out2);
    const LabeledSubset test = LabeledSubset::of(g, Split::kTest);
    const auto stage1_pred1 = detail::argmax_labels(res.stage1.view1.distribution);
    const auto stage1_pred2 = detail::argmax_labels(res.stage1.view2.distribution);
    res.view1_metrics = evaluate_metrics(detail::pick(stage1_pred1, test.nodes), test.labels);
    res.view2_metrics = evaluate_metrics(detail::pick(stage1_pred2, test.nodes), test.labels);
    res.head1_metrics = evaluate_metrics(detail::pick(res.stage2.out1.predicted, test.nodes), test.labels);
    res.head2_metrics = evaluate_metrics(detail::pick(res.stage2.out2.predicted, test.nodes), test.labels);

    std::vector<int> reported;
    std::vector<double> reported_u;
    if (toggles.uncertainty_fusion) {
      for (const auto& f : res.fused) {
        reported.push_back(f.label);
        reported_u.push_back(f.uncertainty);
      }
    } else {
      // Without the uncertainty module, report whichever stage-one view has
      // the better test F1 (view 1 on ties).
      res.reported_view = res.view2_metrics.f1 > res.view1_metrics.f1 ? 2 : 1;
      reported = res.reported_view == 1 ? stage1_pred1 : stage1_pred2;
      reported_u = res.reported_view == 1 ? res.stage2.out1.uncertainty : res.stage2.out2.uncertainty;
    }
    const auto test_pred = detail::pick(reported, test.nodes);
    const Metrics m = evaluate_metrics(test_pred, test.labels);
    res.metrics = {m.accuracy, m.f1, test.nodes.size(), config.profile, config.seed};
    res.calibration = calibration_report(detail::pick(reported_u, test.nodes), test_pred, test.labels,
                                         config.calibration_bins);

    for (std::size_t i = 0; i < g.node_count(); ++i) {
      if (g.node(i).split != Split::kTest) continue;
      PredictionRecord p{i,
                         g.node(i).label,
                         res.stage2.out1.predicted[i],
                         res.stage2.out1.uncertainty[i],
                         res.stage2.out2.predicted[i],
                         res.stage2.out2.uncertainty[i],
                         reported[i],
                         toggles.uncertainty_fusion ? res.fused[i].view : res.reported_view};
      res.predictions.push_back(p);
    }
    return 0;
  });
  return res;
}

// ---- artifacts -------------------------------------------------------------

inline constexpr const char* kIncompleteMarker = "INCOMPLETE";

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail<DataError>("cannot write '", path.string(), "'");
  out << text;
}

// Writes predictions.jsonl, metrics.json, calibration.json, loss_trace.csv,
// uncertainty_trace.csv and the checkpoints into out_dir.
inline void write_artifacts(const PipelineResult& res, const std::filesystem::path& out_dir) {
  std::ostringstream preds;
  for (const auto& p : res.predictions) preds << prediction_json_line(p) << '\n';
  write_text(out_dir / "predictions.jsonl", preds.str());
  write_text(out_dir / "metrics.json", metrics_json(res.metrics) + "\n");
  write_text(out_dir / "calibration.json", to_json(res.calibration).dump() + "\n");
  std::ostringstream trace;
  write_loss_trace(res.stage1.trace, trace);
  write_text(out_dir / "loss_trace.csv", trace.str());
  std::ostringstream utrace;
  utrace.precision(17);
  utrace << "epoch,L_u1,L_u2\n";
  for (std::size_t e = 0; e < res.stage2.trace1.size(); ++e) {
    utrace << e << ',' << res.stage2.trace1[e] << ',' << res.stage2.trace2[e] << '\n';
  }
  write_text(out_dir / "uncertainty_trace.csv", utrace.str());

  auto proj = const_cast<FeatureProjector&>(res.stage1.projector).parameters();
  ConstNamedParams proj_c(proj.begin(), proj.end());
  write_json_file((out_dir / "projector.ckpt.json").string(), checkpoint_json("projector", proj_c));
  write_json_file((out_dir / "env1.ckpt.json").string(),
                  checkpoint_json("environment", res.stage1.env1.parameters(), {{"env_id", 1}}));
  write_json_file((out_dir / "env2.ckpt.json").string(),
                  checkpoint_json("environment", res.stage1.env2.parameters(), {{"env_id", 2}}));
  write_json_file((out_dir / "head1.ckpt.json").string(),
                  checkpoint_json("evidence_head", res.stage2.head1.parameters(), {{"view", 1}}));
  write_json_file((out_dir / "head2.ckpt.json").string(),
                  checkpoint_json("evidence_head", res.stage2.head2.parameters(), {{"view", 2}}));
}

// run_pipeline plus artifact output. The INCOMPLETE marker stays behind if
// any stage fails.
inline PipelineResult run_pipeline(const RunConfig& config, const HeteroGraph& g,
                                   const std::filesystem::path& out_dir, const Toggles& toggles = {}) {
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / kIncompleteMarker, "run did not finish\n");
  PipelineResult res = run_pipeline(config, g, toggles);
  write_artifacts(res, out_dir);
  write_text(out_dir / "config.txt", format_run_config(config));
  std::filesystem::remove(out_dir / kIncompleteMarker);
  return res;
}

struct AblationRow {
  std::string name;
  Toggles toggles;
  MetricsReport metrics;
  double view1_f1 = 0.0, view2_f1 = 0.0;
};

// One row per toggle set, all with the same config and seed.
inline std::vector<AblationRow> ablation_run(const RunConfig& config, const HeteroGraph& g,
                                             const std::vector<std::string>& toggle_sets) {
  std::vector<AblationRow> rows;
  for (const auto& name : toggle_sets) {
    Toggles t = parse_toggle_set(name);
    PipelineResult r = run_pipeline(config, g, t);
    rows.push_back({name, t, r.metrics, r.view1_metrics.f1, r.view2_metrics.f1});
  }
  return rows;
}

}  // namespace botumc
