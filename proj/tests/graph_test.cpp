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

#include <algorithm>
#include <numeric>
#include <sstream>

#include "botumc/graph.hpp"
#include "support/oracles.hpp"

namespace botumc {
namespace {

const char* kNodes =
    R"({"id":1,"num":[3.0,4.0],"bool":[1,0],"desc_emb":[0.5],"tweet_emb":[1,2],"label":1,"split":"test"}
{"id":0,"num":[1.0,2.0],"bool":[0,0],"desc_emb":[0.25],"tweet_emb":[3,4],"label":0,"split":"train"}

{"id":2,"num":[5.0,6.0],"bool":[0,1],"desc_emb":[0.75],"tweet_emb":[5,6],"label":null}
)";

HeteroGraph parse(const std::string& nodes, const std::string& edges) {
  std::istringstream n(nodes), e(edges);
  return read_graph(n, e);
}

TEST(GraphIo, ReadsNodesInIdOrder) {
  HeteroGraph g = parse(kNodes, "0\t1\tfollower\n2\t1\tfollower\n1\t0\tfriend\n");
  ASSERT_EQ(g.node_count(), 3u);
  EXPECT_EQ(*g.node(0).label, 0);
  EXPECT_EQ(g.node(0).split, Split::kTrain);
  EXPECT_EQ(*g.node(1).attributes.num, (std::vector<double>{3.0, 4.0}));
  EXPECT_FALSE(g.node(2).label.has_value());
  EXPECT_EQ(g.node(2).split, Split::kNone);
  EXPECT_EQ(relation_neighbors(g, "follower", 1), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(relation_neighbors(g, "friend", 0), (std::vector<std::size_t>{1}));
  EXPECT_TRUE(relation_neighbors(g, "friend", 2).empty());
  EXPECT_THROW(relation_neighbors(g, "likes", 0), LookupError);
}

TEST(GraphIo, Summary) {
  GraphSummary s = parse(kNodes, "0\t1\tfollower\n2\t1\tfollower\n1\t0\tfriend\n").summary();
  EXPECT_EQ(s.nodes, 3u);
  EXPECT_EQ(s.edges_per_relation.at("follower"), 2u);
  EXPECT_EQ(s.edges_per_relation.at("friend"), 1u);
  EXPECT_EQ(s.humans, 1u);
  EXPECT_EQ(s.bots, 1u);
  EXPECT_EQ(s.unlabeled, 1u);
}

TEST(GraphIo, ExtraRelationsAreAppended) {
  HeteroGraph g = parse(kNodes, "0\t1\tmention\n");
  EXPECT_EQ(g.relations(), (std::vector<std::string>{"follower", "friend", "mention"}));
  EXPECT_EQ(g.relation_id("mention"), 2u);
}

TEST(GraphIo, DanglingEndpointIsAnIntegrityError) {
  EXPECT_THROW(parse(kNodes, "0\t3\tfollower\n"), IntegrityError);
  EXPECT_THROW(parse(kNodes, "-1\t0\tfollower\n"), IntegrityError);
  EXPECT_THROW(parse(kNodes, "0\t1x\tfollower\n"), IntegrityError);
  EXPECT_THROW(parse(kNodes, "0\t1\n"), IntegrityError);
}

TEST(GraphIo, BadNodeRecords) {
  EXPECT_THROW(parse(R"({"id":0}
{"id":0})", ""),
               IntegrityError);
  EXPECT_THROW(parse(R"({"id":1})", ""), IntegrityError);
  EXPECT_THROW(parse(R"({"id":0,"label":2,"split":"train"})", ""), IntegrityError);
  EXPECT_THROW(parse(R"({"id":0,"label":1})", ""), IntegrityError);
  EXPECT_THROW(parse(R"({"id":0,"label":1,"split":"dev"})", ""), IntegrityError);
  EXPECT_THROW(parse("{not json", ""), IntegrityError);
  EXPECT_THROW(parse(R"({"id":0,"num":"x"})", ""), IntegrityError);
}

TEST(GraphIo, MissingFiles) {
  EXPECT_THROW(load_graph("/nonexistent/nodes.jsonl", "/nonexistent/edges.tsv"), DataError);
}

TEST(GraphIo, RoundTrip) {
  Rng rng(3);
  HeteroGraph g = testing::random_graph(15, 0.15, rng);
  std::ostringstream n, e;
  write_graph(g, n, e);
  HeteroGraph back = parse(n.str(), e.str());
  EXPECT_TRUE(back == g);
}

// The CSR index must agree with a plain scan over the edge list.
TEST(NeighborIndex, MatchesEdgeScan) {
  Rng rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    HeteroGraph g = testing::random_graph(5 + rng.below(30), 0.1, rng);
    for (std::size_t r = 0; r < g.relations().size(); ++r)
      for (std::size_t i = 0; i < g.node_count(); ++i) {
        std::vector<std::size_t> scan;
        for (const Edge& e : g.edges())
          if (e.relation == r && e.dst == i) scan.push_back(e.src);
        auto got = relation_neighbors(g, g.relations()[r], i);
        std::sort(scan.begin(), scan.end());
        std::sort(got.begin(), got.end());
        EXPECT_EQ(got, scan);
      }
  }
}

TEST(Permute, RelabelsNodesAndEdges) {
  Rng rng(21);
  HeteroGraph g = testing::random_graph(12, 0.2, rng);
  std::vector<std::size_t> perm(12);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  HeteroGraph p = permute_graph(g, perm);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_TRUE(p.node(perm[i]) == g.node(i));
    for (const auto& rel : g.relations()) {
      std::vector<std::size_t> expect;
      for (auto j : relation_neighbors(g, rel, i)) expect.push_back(perm[j]);
      auto got = relation_neighbors(p, rel, perm[i]);
      std::sort(expect.begin(), expect.end());
      std::sort(got.begin(), got.end());
      EXPECT_EQ(got, expect);
    }
  }
  std::vector<std::size_t> bad(12, 0);
  EXPECT_THROW(permute_graph(g, bad), ContractError);
}

TEST(Graph, ConstructorValidatesEdges) {
  std::vector<NodeRecord> nodes(2);
  EXPECT_THROW(HeteroGraph(default_relations(), nodes, {{0, 2, 0}}), IntegrityError);
  EXPECT_THROW(HeteroGraph(default_relations(), nodes, {{0, 1, 5}}), IntegrityError);
}

}  // namespace
}  // namespace botumc
