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

#include <gtest/gtest.h>

#include <filesystem>
#include <set>
#include <sstream>
#include <utility>

#include "botumc/config.hpp"
#include "botumc/interventional.hpp"
#include "botumc/params.hpp"
#include "botumc/synthetic.hpp"

namespace botumc {
namespace {

TEST(Synthetic, ReplaysFromSeed) {
  SyntheticSpec spec;
  spec.nodes = 200;
  SyntheticData a = generate_synthetic(spec, 5), b = generate_synthetic(spec, 5), c = generate_synthetic(spec, 6);
  EXPECT_TRUE(a.graph == b.graph);
  EXPECT_EQ(a.camouflaged, b.camouflaged);
  EXPECT_FALSE(a.graph == c.graph);
}

TEST(Synthetic, ClassesSplitsAndCamouflage) {
  SyntheticSpec spec;
  SyntheticData d = generate_synthetic(spec, 9);
  const HeteroGraph& g = d.graph;
  GraphSummary s = g.summary();
  EXPECT_EQ(s.nodes, 1000u);
  EXPECT_EQ(s.bots, 300u);
  EXPECT_EQ(s.unlabeled, 0u);
  EXPECT_EQ(g.labeled_in(Split::kTrain).size(), 600u);
  EXPECT_EQ(g.labeled_in(Split::kValid).size(), 100u);
  EXPECT_EQ(g.labeled_in(Split::kTest).size(), 300u);

  std::size_t camo = 0;
  const std::size_t follower = g.relation_id("follower");
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (!d.camouflaged[i]) continue;
    ++camo;
    EXPECT_EQ(*g.node(i).label, kBot);
    // Every camouflaged bot is followed by at least camouflage_ties humans.
    std::set<std::size_t> human_followers;
    for (auto j : g.index().neighbors(follower, i))
      if (*g.node(j).label == kHuman) human_followers.insert(j);
    EXPECT_GE(human_followers.size(), spec.camouflage_ties);
  }
  EXPECT_GT(camo, 60u);
  EXPECT_LT(camo, 120u);
}

TEST(Synthetic, SpecParsing) {
  std::istringstream in("nodes = 50  # small\nbot_fraction = 0.4\nrelations = friend\n");
  SyntheticSpec s = parse_synthetic_spec(in);
  EXPECT_EQ(s.nodes, 50u);
  EXPECT_EQ(s.relations, (std::vector<std::string>{"friend"}));
  SyntheticData d = generate_synthetic(s, 1);
  EXPECT_EQ(d.graph.summary().edges_per_relation.at("follower"), 0u);

  std::istringstream unknown("nodez = 50\n");
  EXPECT_THROW(parse_synthetic_spec(unknown), ConfigError);
  std::istringstream degenerate("bot_fraction = 0\n");
  EXPECT_THROW(parse_synthetic_spec(degenerate), ConfigError);
  std::istringstream splits("train_fraction = 0.9\n");
  EXPECT_THROW(parse_synthetic_spec(splits), ConfigError);
}

TEST(RunConfig, DefaultsAreTheSmallProfile) {
  RunConfig c;
  RunConfig small = profile_config("small");
  EXPECT_EQ(format_run_config(c), format_run_config(small));
  EXPECT_EQ(c.hidden, 32u);
  EXPECT_EQ(c.lambda1, 0.8);
  EXPECT_EQ(c.lambda2, 0.7);
  EXPECT_EQ(c.stage2_lr, 5e-5);
  RunConfig large = profile_config("large");
  EXPECT_EQ(large.lambda1, 0.1);
  EXPECT_EQ(large.stage1_epochs, 3000);
  EXPECT_THROW(profile_config("medium"), ConfigError);
}

TEST(RunConfig, ParseAndFormatRoundTrip) {
  std::istringstream in("profile = large\nseed = 12\nlambda1 = 0.25\nshare_evidence_head = on\n");
  RunConfig c = parse_run_config(in);
  EXPECT_EQ(c.profile, "large");
  EXPECT_EQ(c.seed, 12u);
  EXPECT_EQ(c.lambda1, 0.25);  // explicit keys override the profile
  EXPECT_TRUE(c.share_evidence_head);
  std::istringstream again(format_run_config(c));
  EXPECT_EQ(format_run_config(parse_run_config(again)), format_run_config(c));
}

TEST(RunConfig, RejectsBadInput) {
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return parse_run_config(in);
  };
  EXPECT_THROW(parse("stage1_epoch = 3\n"), ConfigError);
  EXPECT_THROW(parse("lambda1 = 1.5\n"), ConfigError);
  EXPECT_THROW(parse("hidden = 30\n"), ConfigError);
  EXPECT_THROW(parse("seed = seven\n"), ConfigError);
  EXPECT_THROW(parse("seed = 1\nseed = 2\n"), ConfigError);
  EXPECT_THROW(parse("just words\n"), ConfigError);
  EXPECT_THROW(parse("activation = tanh\n"), ConfigError);
  EXPECT_THROW(load_run_config("/nonexistent/run.txt"), ConfigError);
}

TEST(Checkpoint, RoundTripsEnvironmentWeights) {
  EnvironmentModel env = EnvironmentModel::init(1, 8, 2, 2, 42);
  auto j = checkpoint_json("environment", std::as_const(env).parameters(), {{"env_id", 1}});
  auto path = std::filesystem::temp_directory_path() / "botumc_ckpt_test.json";
  write_json_file(path.string(), j);
  EnvironmentModel back = EnvironmentModel::init(1, 8, 2, 2, 43);
  restore_checkpoint(read_json_file(path.string()), "environment", back.parameters());
  auto a = env.parameters(), b = back.parameters();
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(*a[k].second, *b[k].second) << a[k].first;
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsMismatches) {
  EnvironmentModel env = EnvironmentModel::init(1, 8, 2, 2, 42);
  auto j = checkpoint_json("environment", std::as_const(env).parameters());
  EnvironmentModel other = EnvironmentModel::init(1, 8, 2, 2, 1);
  EXPECT_THROW(restore_checkpoint(j, "evidence_head", other.parameters()), DataError);
  EnvironmentModel wide = EnvironmentModel::init(1, 12, 2, 2, 1);
  EXPECT_THROW(restore_checkpoint(j, "environment", wide.parameters()), DataError);
  EnvironmentModel deep = EnvironmentModel::init(1, 8, 3, 2, 1);
  EXPECT_THROW(restore_checkpoint(j, "environment", deep.parameters()), DataError);
  auto bad = j;
  bad["version"] = 99;
  EXPECT_THROW(restore_checkpoint(bad, "environment", other.parameters()), DataError);
}

}  // namespace
}  // namespace botumc
