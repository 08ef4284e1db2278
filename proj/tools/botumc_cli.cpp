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

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "botumc/botumc.hpp"

namespace fs = std::filesystem;
using namespace botumc;

namespace {

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::uint64_t parse_seed(const std::string& s) {
  try {
    std::size_t pos = 0;
    auto v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail<ConfigError>("bad seed '", s, "'");
  }
}

std::vector<NodeRecord> load_nodes(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail<DataError>("cannot open nodes file '", path, "'");
  return read_nodes(in);
}

double chosen_uncertainty(const PredictionRecord& p) { return p.chosen_view == 1 ? p.u1 : p.u2; }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---- subcommands -----------------------------------------------------------

struct GenerateArgs {
  std::string spec, out;
  std::string seed = "7";
};

int cmd_generate(const GenerateArgs& a) {
  SyntheticSpec spec = a.spec.empty() ? SyntheticSpec{} : load_synthetic_spec(a.spec);
  auto data = generate_synthetic(spec, parse_seed(a.seed));
  fs::create_directories(a.out);
  save_graph(data.graph, (fs::path(a.out) / "nodes.jsonl").string(), (fs::path(a.out) / "edges.tsv").string());
  const auto sum = data.graph.summary();
  std::cout << "nodes " << sum.nodes << " (humans " << sum.humans << ", bots " << sum.bots << ", camouflaged "
            << std::count(data.camouflaged.begin(), data.camouflaged.end(), true) << ")\n";
  for (const auto& [rel, count] : sum.edges_per_relation) std::cout << "edges " << rel << ' ' << count << '\n';
  return 0;
}

struct TrainArgs {
  std::string config, nodes, edges, out;
  std::string toggles = "full";
};

int cmd_train(const TrainArgs& a) {
  RunConfig config = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  HeteroGraph g = load_graph(a.nodes, a.edges);
  auto res = run_pipeline(config, g, a.out, parse_toggle_set(a.toggles));
  std::cout << metrics_json(res.metrics) << '\n';
  return 0;
}

struct EvalArgs {
  std::string pred, nodes;
  std::string view = "fused";
};

int cmd_eval(const EvalArgs& a) {
  auto preds = load_predictions(a.pred);
  auto nodes = load_nodes(a.nodes);
  std::vector<int> yhat, truth;
  for (const auto& p : preds) {
    if (p.id >= nodes.size()) fail<LookupError>("prediction for node ", p.id, " which is not in the nodes file");
    const auto& label = nodes[p.id].label;
    if (!label) continue;
    truth.push_back(*label);
    if (a.view == "fused") yhat.push_back(p.yhat_fused);
    else if (a.view == "1") yhat.push_back(p.yhat1);
    else if (a.view == "2") yhat.push_back(p.yhat2);
    else fail<ConfigError>("--view must be fused, 1 or 2");
  }
  auto m = evaluate_metrics(yhat, truth);
  nlohmann::ordered_json j;
  j["accuracy"] = m.accuracy;
  j["f1"] = m.f1;
  j["n"] = truth.size();
  j["tp"] = m.counts.tp;
  j["fp"] = m.counts.fp;
  j["fn"] = m.counts.fn;
  j["tn"] = m.counts.tn;
  std::cout << j.dump() << '\n';
  return 0;
}

struct CalibrateArgs {
  std::string pred;
  int bins = 10;
};

int cmd_calibrate(const CalibrateArgs& a) {
  if (a.bins < 1) fail<ConfigError>("--bins must be at least 1");
  auto preds = load_predictions(a.pred);
  std::vector<double> u;
  std::vector<int> yhat, truth;
  for (const auto& p : preds) {
    if (!p.y) fail<DataError>("prediction for node ", p.id, " has no label");
    u.push_back(chosen_uncertainty(p));
    yhat.push_back(p.yhat_fused);
    truth.push_back(*p.y);
  }
  std::cout << to_json(calibration_report(u, yhat, truth, static_cast<std::size_t>(a.bins))).dump(2) << '\n';
  return 0;
}

struct AblateArgs {
  std::string config, spec, nodes, edges, out;
  std::string toggles = "full,key_knowledge,intervention_kl,uncertainty_fusion";
  std::string seeds = "7,8,9,10,11";
};

int cmd_ablate(const AblateArgs& a) {
  RunConfig base = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  const auto sets = split_list(a.toggles);
  if (sets.empty()) fail<ConfigError>("--toggles is empty");
  for (const auto& s : sets) parse_toggle_set(s);
  const auto seeds = split_list(a.seeds);
  if (seeds.empty()) fail<ConfigError>("--seeds is empty");
  if (a.nodes.empty() != a.edges.empty()) fail<ConfigError>("--nodes and --edges go together");
  const SyntheticSpec spec = a.spec.empty() ? SyntheticSpec{} : load_synthetic_spec(a.spec);

  std::ofstream csv;
  if (!a.out.empty()) {
    csv.open(a.out);
    if (!csv) fail<DataError>("cannot write '", a.out, "'");
    csv << "seed,toggles,accuracy,f1,view1_f1,view2_f1\n";
  }
  std::map<std::string, std::vector<double>> f1s;
  std::cout << std::fixed << std::setprecision(4);
  for (const auto& s : seeds) {
    RunConfig c = base;
    c.seed = parse_seed(s);
    HeteroGraph g = a.nodes.empty() ? generate_synthetic(spec, c.seed).graph : load_graph(a.nodes, a.edges);
    for (const auto& row : ablation_run(c, g, sets)) {
      std::cout << "seed " << c.seed << "  " << std::left << std::setw(40) << row.name << std::right
                << " acc " << row.metrics.accuracy << "  f1 " << row.metrics.f1 << '\n';
      f1s[row.name].push_back(row.metrics.f1);
      if (csv) {
        csv << c.seed << ',' << row.name << ',' << row.metrics.accuracy << ',' << row.metrics.f1 << ','
            << row.view1_f1 << ',' << row.view2_f1 << '\n';
      }
    }
  }
  std::cout << "median f1 over " << seeds.size() << " seed(s):\n";
  for (const auto& name : sets) std::cout << "  " << std::left << std::setw(40) << name << std::right << ' ' << median(f1s[name]) << '\n';
  return 0;
}

struct ExtractArgs {
  std::string users, out, stub_dir, endpoint, prompt;
  std::string route = "/generate";
  int timeout_ms = 30000;
  int max_tokens = 256;
  int retries = 2;
  int parallel = 4;
};

// Input: JSON Lines {"id": "...", "tweets": ["...", ...]}.
int cmd_extract(const ExtractArgs& a) {
  if (a.stub_dir.empty() == a.endpoint.empty()) fail<ConfigError>("give exactly one of --stub-dir and --endpoint");
  std::ifstream in(a.users);
  if (!in) fail<DataError>("cannot open '", a.users, "'");
  std::vector<UserTweets> users;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("id") || !j.contains("tweets") || !j["tweets"].is_array()) {
      fail<ValidationError>(a.users, ":", n, ": expected {\"id\", \"tweets\": [...]}");
    }
    UserTweets u;
    u.user_id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    for (const auto& t : j["tweets"]) u.tweets.push_back(t.get<std::string>());
    users.push_back(std::move(u));
  }
  ExtractionOptions opts;
  if (!a.prompt.empty()) opts.prompt_template = load_prompt_template(a.prompt);
  opts.max_tokens = a.max_tokens;
  opts.max_retries = a.retries;
  std::unique_ptr<TextClient> client;
  if (!a.stub_dir.empty()) client = std::make_unique<StubTextClient>(a.stub_dir);
  else client = std::make_unique<HttpTextClient>(a.endpoint, a.route, std::chrono::milliseconds(a.timeout_ms));
  auto results = extract_all(users, *client, opts, static_cast<std::size_t>(std::max(1, a.parallel)));
  std::ofstream out(a.out);
  if (!out) fail<DataError>("cannot write '", a.out, "'");
  for (std::size_t i = 0; i < users.size(); ++i) {
    nlohmann::ordered_json j;
    j["id"] = users[i].user_id;
    j["key_knowledge"] = to_json(results[i]);
    out << j.dump() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BotUmc: uncertainty-aware bot detection on heterogeneous social graphs"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic camouflaged-bot graph");
  g->add_option("--spec", gen.spec, "Synthetic spec file (key = value)");
  g->add_option("--seed", gen.seed, "Generator seed");
  g->add_option("--out", gen.out, "Output directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Run both training stages and write predictions and reports");
  t->add_option("--config", tr.config, "Run config file (key = value)");
  t->add_option("--nodes", tr.nodes, "Nodes file (JSON Lines)")->required();
  t->add_option("--edges", tr.edges, "Edges file (TSV)")->required();
  t->add_option("--out", tr.out, "Output directory")->required();
  t->add_option("--toggles", tr.toggles, "Disabled components joined by '+', or 'full'");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Accuracy and bot-positive F1 of a predictions file");
  e->add_option("--pred", ev.pred, "predictions.jsonl")->required();
  e->add_option("--nodes", ev.nodes, "Nodes file with labels")->required();
  e->add_option("--view", ev.view, "fused, 1 or 2");

  CalibrateArgs ca;
  auto* c = app.add_subcommand("calibrate", "Bin fused predictions by uncertainty");
  c->add_option("--pred", ca.pred, "predictions.jsonl")->required();
  c->add_option("--bins", ca.bins, "Number of equal-width bins");

  AblateArgs ab;
  auto* a = app.add_subcommand("ablate", "Run toggle sets over several seeds");
  a->add_option("--config", ab.config, "Run config file");
  a->add_option("--toggles", ab.toggles, "Comma-separated toggle sets");
  a->add_option("--seeds", ab.seeds, "Comma-separated seeds");
  a->add_option("--spec", ab.spec, "Synthetic spec used when no graph is given");
  a->add_option("--nodes", ab.nodes, "Nodes file (otherwise a synthetic graph per seed)");
  a->add_option("--edges", ab.edges, "Edges file");
  a->add_option("--out", ab.out, "Optional CSV of all rows");

  ExtractArgs ex;
  auto* x = app.add_subcommand("extract", "Key-knowledge extraction through a text-generation endpoint");
  x->add_option("--users", ex.users, "JSON Lines of {id, tweets}")->required();
  x->add_option("--out", ex.out, "Output JSON Lines")->required();
  x->add_option("--stub-dir", ex.stub_dir, "Directory of canned <id>.txt responses");
  x->add_option("--endpoint", ex.endpoint, "Base URL of the generation server");
  x->add_option("--route", ex.route, "Request path");
  x->add_option("--prompt", ex.prompt, "Prompt template file containing {TWEETS}");
  x->add_option("--timeout-ms", ex.timeout_ms, "Per-request timeout");
  x->add_option("--max-tokens", ex.max_tokens, "Generation budget");
  x->add_option("--retries", ex.retries, "Retries after a timeout");
  x->add_option("--parallel", ex.parallel, "Concurrent requests");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
    if (*c) return cmd_calibrate(ca);
    if (*a) return cmd_ablate(ab);
    if (*x) return cmd_extract(ex);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return 2;
  } catch (const DataError& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return 3;
  } catch (const NumericError& err) {
    std::cerr << "numeric failure: " << err.what() << '\n';
    return 4;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
