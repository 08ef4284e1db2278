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
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "botumc/config.hpp"
#include "botumc/graph.hpp"
#include "botumc/random.hpp"

namespace botumc {

// Desk-scale stand-in for a crawled bot benchmark. Humans and bots draw
// Gaussian feature blocks around opposite class means; a camouflaged bot
// instead draws every block from the human distribution and forges mutual
// friend ties (plus incoming follows) with random humans.
struct SyntheticSpec {
  std::size_t nodes = 1000;
  double bot_fraction = 0.3;

  std::size_t desc_dim = 16;
  std::size_t tweet_dim = 16;  // first half raw tweets, second half key knowledge
  std::size_t num_dim = 6;
  std::size_t bool_dim = 4;
  double separation = 1.0;          // distance between class means, per dimension
  double raw_tweet_separation = 0.3;
  double knowledge_separation = 1.0;  // key-knowledge half of the tweet block
  double spread = 1.0;              // per-dimension standard deviation
  double bool_prob_human = 0.3;
  double bool_prob_bot = 0.6;
  // Each user gets an activity level a ~ U(min_activity, 1) that scales how
  // much class signal its features carry; quiet accounts are harder to call.
  double min_activity = 0.0;

  double human_intra_prob = 0.008;
  double bot_intra_prob = 0.01;
  double background_prob = 0.0005;  // cross-class ties
  double camouflage_rate = 0.3;
  std::size_t camouflage_ties = 5;
  std::vector<std::string> relations = default_relations();

  double unlabeled_fraction = 0.0;
  double train_fraction = 0.6;
  double valid_fraction = 0.1;
  double test_fraction = 0.3;

  void validate() const {
    auto prob = [](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) fail<ConfigError>(name, " = ", p, " is outside [0, 1]");
    };
    if (nodes < 10) fail<ConfigError>("synthetic graphs need at least 10 nodes");
    prob(bot_fraction, "bot_fraction");
    prob(bool_prob_human, "bool_prob_human");
    prob(bool_prob_bot, "bool_prob_bot");
    prob(human_intra_prob, "human_intra_prob");
    prob(bot_intra_prob, "bot_intra_prob");
    prob(background_prob, "background_prob");
    prob(camouflage_rate, "camouflage_rate");
    prob(min_activity, "min_activity");
    prob(unlabeled_fraction, "unlabeled_fraction");
    prob(train_fraction, "train_fraction");
    prob(valid_fraction, "valid_fraction");
    prob(test_fraction, "test_fraction");
    if (std::abs(train_fraction + valid_fraction + test_fraction - 1.0) > 1e-9) {
      fail<ConfigError>("split fractions must sum to 1");
    }
    const auto bots = bot_count();
    if (bots == 0 || bots == nodes) fail<ConfigError>("degenerate spec: bot_fraction leaves a single class");
    if (desc_dim == 0 || num_dim == 0 || bool_dim == 0 || tweet_dim < 2) {
      fail<ConfigError>("feature dimensions must be positive (tweet_dim >= 2)");
    }
    if (!(spread > 0)) fail<ConfigError>("spread must be positive");
    if (relations.empty()) fail<ConfigError>("at least one relation is required");
    for (const auto& r : relations)
      if (r != "friend" && r != "follower") fail<ConfigError>("synthetic relation '", r, "' is not friend or follower");
  }

  std::size_t bot_count() const {
    return static_cast<std::size_t>(std::llround(bot_fraction * static_cast<double>(nodes)));
  }
  bool emits(const std::string& r) const { return std::find(relations.begin(), relations.end(), r) != relations.end(); }
};

inline SyntheticSpec parse_synthetic_spec(std::istream& in) {
  auto kv = detail::parse_key_values(in, "synthetic spec");
  SyntheticSpec s;
  using detail::to_double, detail::to_size;
  for (const auto& [k, v] : kv) {
    if (k == "nodes") s.nodes = to_size(k, v);
    else if (k == "bot_fraction") s.bot_fraction = to_double(k, v);
    else if (k == "desc_dim") s.desc_dim = to_size(k, v);
    else if (k == "tweet_dim") s.tweet_dim = to_size(k, v);
    else if (k == "num_dim") s.num_dim = to_size(k, v);
    else if (k == "bool_dim") s.bool_dim = to_size(k, v);
    else if (k == "separation") s.separation = to_double(k, v);
    else if (k == "knowledge_separation") s.knowledge_separation = to_double(k, v);
    else if (k == "raw_tweet_separation") s.raw_tweet_separation = to_double(k, v);
    else if (k == "spread") s.spread = to_double(k, v);
    else if (k == "bool_prob_human") s.bool_prob_human = to_double(k, v);
    else if (k == "bool_prob_bot") s.bool_prob_bot = to_double(k, v);
    else if (k == "human_intra_prob") s.human_intra_prob = to_double(k, v);
    else if (k == "bot_intra_prob") s.bot_intra_prob = to_double(k, v);
    else if (k == "background_prob") s.background_prob = to_double(k, v);
    else if (k == "min_activity") s.min_activity = to_double(k, v);
    else if (k == "camouflage_rate") s.camouflage_rate = to_double(k, v);
    else if (k == "camouflage_ties") s.camouflage_ties = to_size(k, v);
    else if (k == "unlabeled_fraction") s.unlabeled_fraction = to_double(k, v);
    else if (k == "train_fraction") s.train_fraction = to_double(k, v);
    else if (k == "valid_fraction") s.valid_fraction = to_double(k, v);
    else if (k == "test_fraction") s.test_fraction = to_double(k, v);
    else if (k == "relations") {
      s.relations.clear();
      std::stringstream ss(v);
      for (std::string r; std::getline(ss, r, ',');) {
        r.erase(0, r.find_first_not_of(' '));
        r.erase(r.find_last_not_of(' ') + 1);
        if (!r.empty()) s.relations.push_back(r);
      }
    } else {
      fail<ConfigError>("unknown synthetic spec key '", k, "'");
    }
  }
  s.validate();
  return s;
}

inline SyntheticSpec load_synthetic_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail<ConfigError>("cannot open synthetic spec '", path, "'");
  return parse_synthetic_spec(in);
}

struct SyntheticData {
  HeteroGraph graph;
  std::vector<bool> camouflaged;  // per node; only bots can be camouflaged
};

inline SyntheticData generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(derive_seed(seed, 0));
  const std::size_t n = spec.nodes;

  // Class of each node: a random subset of bot_count() nodes are bots.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<int> label(n, kHuman);
  for (std::size_t k = 0; k < spec.bot_count(); ++k) label[order[k]] = kBot;

  std::vector<bool> camo(n, false);
  for (std::size_t i = 0; i < n; ++i)
    if (label[i] == kBot) camo[i] = rng.bernoulli(spec.camouflage_rate);
  std::vector<double> activity(n);
  for (auto& a : activity) a = rng.uniform(spec.min_activity, 1.0);

  // Per-dimension direction of the class offset.
  auto directions = [&](std::size_t d) {
    std::vector<double> s(d);
    for (auto& v : s) v = rng.bernoulli(0.5) ? 1.0 : -1.0;
    return s;
  };
  const auto dir_desc = directions(spec.desc_dim);
  const auto dir_tweet = directions(spec.tweet_dim);
  const auto dir_num = directions(spec.num_dim);

  auto gaussian_block = [&](const std::vector<double>& dir, bool bot_like, double sep, std::size_t from,
                            std::size_t to, std::vector<double>& out) {
    for (std::size_t j = from; j < to; ++j) {
      const double mean = (bot_like ? 0.5 : -0.5) * sep * dir[j];
      out[j] = rng.normal(mean, spec.spread);
    }
  };

  std::vector<NodeRecord> nodes(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool bot_like = label[i] == kBot && !camo[i];
    const double sep = spec.separation * activity[i];
    NodeAttributes a;
    std::vector<double> desc(spec.desc_dim), tweet(spec.tweet_dim), num(spec.num_dim);
    gaussian_block(dir_desc, bot_like, sep, 0, spec.desc_dim, desc);
    const std::size_t half = spec.tweet_dim / 2;
    gaussian_block(dir_tweet, bot_like, spec.raw_tweet_separation * activity[i], 0, half, tweet);
    gaussian_block(dir_tweet, bot_like, spec.knowledge_separation * activity[i], half, spec.tweet_dim, tweet);
    gaussian_block(dir_num, bot_like, sep, 0, spec.num_dim, num);
    // Numeric metadata lives on a raw scale; ingestion z-scores it.
    for (auto& v : num) v = 50.0 + 10.0 * v;
    std::vector<int> flags(spec.bool_dim);
    const double mid = 0.5 * (spec.bool_prob_bot + spec.bool_prob_human);
    const double half_gap = 0.5 * (spec.bool_prob_bot - spec.bool_prob_human) * activity[i];
    const double p_flag = bot_like ? mid + half_gap : mid - half_gap;
    for (auto& f : flags) f = rng.bernoulli(p_flag) ? 1 : 0;
    a.desc_emb = std::move(desc);
    a.tweet_emb = std::move(tweet);
    a.num = std::move(num);
    a.flags = std::move(flags);
    nodes[i].attributes = std::move(a);
  }

  // Splits over a fresh shuffle; a fraction of nodes can stay unlabeled.
  std::vector<std::size_t> split_order(n);
  for (std::size_t i = 0; i < n; ++i) split_order[i] = i;
  rng.shuffle(split_order);
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
  const auto n_valid = static_cast<std::size_t>(std::llround(spec.valid_fraction * static_cast<double>(n)));
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = split_order[k];
    nodes[i].split = k < n_train ? Split::kTrain : (k < n_train + n_valid ? Split::kValid : Split::kTest);
    if (rng.bernoulli(spec.unlabeled_fraction)) {
      nodes[i].split = Split::kNone;
    } else {
      nodes[i].label = label[i];
    }
  }

  std::vector<std::string> relations = default_relations();
  const std::size_t follower = 0, friend_rel = 1;
  const bool emit_friend = spec.emits("friend"), emit_follower = spec.emits("follower");
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double p = spec.background_prob;
      if (label[i] == label[j]) p = label[i] == kBot ? spec.bot_intra_prob : spec.human_intra_prob;
      const double uf = rng.uniform(), uo = rng.uniform(), ud = rng.uniform();
      if (emit_friend && uf < p) {
        edges.push_back({i, j, friend_rel});
        edges.push_back({j, i, friend_rel});
      }
      if (emit_follower && uo < p) {
        if (ud < 0.5) edges.push_back({i, j, follower});
        else edges.push_back({j, i, follower});
      }
    }
  }

  std::vector<std::size_t> humans;
  for (std::size_t i = 0; i < n; ++i)
    if (label[i] == kHuman) humans.push_back(i);
  for (std::size_t b = 0; b < n; ++b) {
    if (!camo[b]) continue;
    std::vector<std::size_t> pool = humans;
    const std::size_t ties = std::min(spec.camouflage_ties, pool.size());
    for (std::size_t t = 0; t < ties; ++t) {
      std::swap(pool[t], pool[t + rng.below(pool.size() - t)]);
      const std::size_t h = pool[t];
      if (emit_friend) {
        edges.push_back({b, h, friend_rel});
        edges.push_back({h, b, friend_rel});
      }
      if (emit_follower) edges.push_back({h, b, follower});
    }
  }
  return {HeteroGraph(std::move(relations), std::move(nodes), std::move(edges)), std::move(camo)};
}

}  // namespace botumc
