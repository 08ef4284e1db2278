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
#include <cstddef>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "botumc/autodiff.hpp"
#include "botumc/errors.hpp"

namespace botumc {

enum class Split { kTrain, kValid, kTest, kNone };

inline std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
    case Split::kNone: return "none";
  }
  return "none";
}

inline constexpr int kHuman = 0;
inline constexpr int kBot = 1;

// Raw per-user inputs as they appear in the nodes file. Absent blocks stay
// empty optionals; validation happens where a block is consumed.
struct NodeAttributes {
  std::optional<std::vector<double>> num;
  std::optional<std::vector<int>> flags;
  std::optional<std::vector<double>> desc_emb;
  std::optional<std::vector<double>> tweet_emb;

  friend bool operator==(const NodeAttributes&, const NodeAttributes&) = default;
};

struct NodeRecord {
  NodeAttributes attributes;
  std::optional<int> label;
  Split split = Split::kNone;

  friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
};

struct Edge {
  std::size_t src;
  std::size_t dst;
  std::size_t relation;

  friend bool operator==(const Edge&, const Edge&) = default;
};

inline const std::vector<std::string>& default_relations() {
  static const std::vector<std::string> rel{"follower", "friend"};
  return rel;
}

// In-neighbour lists per relation: N_r(i) holds the sources of every edge
// j -> i of relation r, in edge-file order.
class NeighborIndex {
 public:
  NeighborIndex() = default;

  NeighborIndex(std::size_t node_count, std::size_t relation_count, std::span<const Edge> edges) {
    for (std::size_t r = 0; r < relation_count; ++r) {
      auto adj = std::make_shared<ad::Adjacency>();
      adj->offsets.assign(node_count + 1, 0);
      for (const Edge& e : edges)
        if (e.relation == r) ++adj->offsets[e.dst + 1];
      for (std::size_t i = 0; i < node_count; ++i) adj->offsets[i + 1] += adj->offsets[i];
      adj->sources.resize(adj->offsets[node_count]);
      std::vector<std::size_t> cursor(adj->offsets.begin(), adj->offsets.end() - 1);
      for (const Edge& e : edges)
        if (e.relation == r) adj->sources[cursor[e.dst]++] = e.src;
      per_relation_.push_back(std::move(adj));
    }
  }

  std::span<const std::size_t> neighbors(std::size_t relation, std::size_t node) const {
    const auto& adj = *per_relation_.at(relation);
    return std::span<const std::size_t>(adj.sources)
        .subspan(adj.offsets[node], adj.degree(node));
  }

  const std::shared_ptr<const ad::Adjacency>& adjacency(std::size_t relation) const {
    return per_relation_.at(relation);
  }

  std::size_t relation_count() const { return per_relation_.size(); }

 private:
  std::vector<std::shared_ptr<const ad::Adjacency>> per_relation_;
};

struct GraphSummary {
  std::size_t nodes = 0;
  std::map<std::string, std::size_t> edges_per_relation;
  std::size_t humans = 0, bots = 0, unlabeled = 0;
};

// Immutable heterogeneous user graph: typed directed edges, raw node
// attributes, labels and split assignment.
class HeteroGraph {
 public:
  HeteroGraph(std::vector<std::string> relations, std::vector<NodeRecord> nodes,
              std::vector<Edge> edges)
      : relations_(std::move(relations)), nodes_(std::move(nodes)), edges_(std::move(edges)) {
    for (std::size_t k = 0; k < edges_.size(); ++k) {
      const Edge& e = edges_[k];
      if (e.src >= nodes_.size() || e.dst >= nodes_.size()) {
        fail<IntegrityError>("edge ", k, " (", e.src, "->", e.dst, ") has an endpoint outside [0, ",
                             nodes_.size(), ")");
      }
      if (e.relation >= relations_.size()) fail<IntegrityError>("edge ", k, " has an unknown relation id");
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      if (n.label && *n.label != kHuman && *n.label != kBot) {
        fail<IntegrityError>("node ", i, " has label ", *n.label, "; expected 0, 1 or null");
      }
      if (n.label && n.split == Split::kNone) {
        fail<IntegrityError>("labeled node ", i, " has no split assignment");
      }
    }
    index_ = NeighborIndex(nodes_.size(), relations_.size(), edges_);
  }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<std::string>& relations() const { return relations_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<NodeRecord>& nodes() const { return nodes_; }
  const NodeRecord& node(std::size_t i) const { return nodes_.at(i); }
  const NeighborIndex& index() const { return index_; }

  std::size_t relation_id(std::string_view name) const {
    auto it = std::find(relations_.begin(), relations_.end(), name);
    if (it == relations_.end()) fail<LookupError>("unknown relation '", name, "'");
    return static_cast<std::size_t>(it - relations_.begin());
  }

  // Node ids carrying a label in the given split, ascending.
  std::vector<std::size_t> labeled_in(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].label && nodes_[i].split == split) out.push_back(i);
    return out;
  }

  GraphSummary summary() const {
    GraphSummary s;
    s.nodes = nodes_.size();
    for (const auto& r : relations_) s.edges_per_relation[r] = 0;
    for (const Edge& e : edges_) ++s.edges_per_relation[relations_[e.relation]];
    for (const auto& n : nodes_) {
      if (!n.label) ++s.unlabeled;
      else if (*n.label == kBot) ++s.bots;
      else ++s.humans;
    }
    return s;
  }

  friend bool operator==(const HeteroGraph& a, const HeteroGraph& b) {
    return a.relations_ == b.relations_ && a.nodes_ == b.nodes_ && a.edges_ == b.edges_;
  }

 private:
  std::vector<std::string> relations_;
  std::vector<NodeRecord> nodes_;
  std::vector<Edge> edges_;
  NeighborIndex index_;
};

// Exact in-neighbour list of node i under the named relation.
inline std::vector<std::size_t> relation_neighbors(const HeteroGraph& g, std::string_view relation,
                                                   std::size_t node) {
  const std::size_t r = g.relation_id(relation);
  if (node >= g.node_count()) fail<ContractError>("node ", node, " out of range");
  auto span = g.index().neighbors(r, node);
  return {span.begin(), span.end()};
}

// perm[i] is the new id of old node i.
inline HeteroGraph permute_graph(const HeteroGraph& g, std::span<const std::size_t> perm) {
  const std::size_t n = g.node_count();
  if (perm.size() != n) fail<ContractError>("permutation of size ", perm.size(), " for ", n, " nodes");
  std::vector<bool> seen(n, false);
  for (std::size_t p : perm) {
    if (p >= n || seen[p]) fail<ContractError>("permutation is not a bijection on [0, ", n, ")");
    seen[p] = true;
  }
  std::vector<NodeRecord> nodes(n);
  for (std::size_t i = 0; i < n; ++i) nodes[perm[i]] = g.node(i);
  std::vector<Edge> edges;
  edges.reserve(g.edge_count());
  for (const Edge& e : g.edges()) edges.push_back({perm[e.src], perm[e.dst], e.relation});
  return HeteroGraph(g.relations(), std::move(nodes), std::move(edges));
}

// ---- file formats ----------------------------------------------------------
// nodes: JSON Lines, {"id","num","bool","desc_emb","tweet_emb","label","split"}
// edges: src<TAB>dst<TAB>relation, no header.

namespace detail {

inline Split parse_split(const std::string& s, std::size_t line) {
  if (s == "train") return Split::kTrain;
  if (s == "valid") return Split::kValid;
  if (s == "test") return Split::kTest;
  fail<IntegrityError>("nodes line ", line, ": unknown split '", s, "'");
}

template <typename T>
std::optional<std::vector<T>> optional_array(const nlohmann::ordered_json& rec, const char* key,
                                             std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end() || it->is_null()) return std::nullopt;
  if (!it->is_array()) fail<IntegrityError>("nodes line ", line, ": '", key, "' is not an array");
  std::vector<T> out;
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_number()) fail<IntegrityError>("nodes line ", line, ": '", key, "' holds a non-number");
    out.push_back(v.get<T>());
  }
  return out;
}

}  // namespace detail

inline std::vector<NodeRecord> read_nodes(std::istream& in) {
  std::map<long long, NodeRecord> by_id;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::ordered_json rec;
    try {
      rec = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      fail<IntegrityError>("nodes line ", line, ": ", e.what());
    }
    if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_number_integer()) {
      fail<IntegrityError>("nodes line ", line, ": missing integer 'id'");
    }
    long long id = rec["id"].get<long long>();
    NodeRecord node;
    node.attributes.num = detail::optional_array<double>(rec, "num", line);
    node.attributes.flags = detail::optional_array<int>(rec, "bool", line);
    node.attributes.desc_emb = detail::optional_array<double>(rec, "desc_emb", line);
    node.attributes.tweet_emb = detail::optional_array<double>(rec, "tweet_emb", line);
    if (rec.contains("label") && !rec["label"].is_null()) {
      if (!rec["label"].is_number_integer()) fail<IntegrityError>("nodes line ", line, ": bad label");
      node.label = rec["label"].get<int>();
    }
    if (rec.contains("split") && !rec["split"].is_null()) {
      node.split = detail::parse_split(rec["split"].get<std::string>(), line);
    }
    if (!by_id.emplace(id, std::move(node)).second) {
      fail<IntegrityError>("nodes line ", line, ": duplicate node id ", id);
    }
  }
  std::vector<NodeRecord> nodes;
  nodes.reserve(by_id.size());
  long long expect = 0;
  for (auto& [id, node] : by_id) {
    if (id != expect) fail<IntegrityError>("node ids must be 0..n-1; id ", expect, " is missing");
    nodes.push_back(std::move(node));
    ++expect;
  }
  return nodes;
}

inline std::string node_json_line(std::size_t id, const NodeRecord& node) {
  nlohmann::ordered_json rec;
  rec["id"] = id;
  const auto& a = node.attributes;
  if (a.num) rec["num"] = *a.num;
  if (a.flags) rec["bool"] = *a.flags;
  if (a.desc_emb) rec["desc_emb"] = *a.desc_emb;
  if (a.tweet_emb) rec["tweet_emb"] = *a.tweet_emb;
  rec["label"] = node.label ? nlohmann::ordered_json(*node.label) : nlohmann::ordered_json();
  if (node.split != Split::kNone) rec["split"] = split_name(node.split);
  return rec.dump();
}

inline HeteroGraph read_graph(std::istream& nodes_in, std::istream& edges_in) {
  std::vector<NodeRecord> nodes = read_nodes(nodes_in);
  std::vector<std::string> relations = default_relations();
  std::vector<Edge> edges;
  std::string text;
  std::size_t line = 0;
  while (std::getline(edges_in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(text);
    for (std::string f; std::getline(ss, f, '\t');) fields.push_back(f);
    if (fields.size() != 3) fail<IntegrityError>("edges line ", line, ": expected 3 tab-separated fields");
    long long src = 0, dst = 0;
    try {
      std::size_t p1 = 0, p2 = 0;
      src = std::stoll(fields[0], &p1);
      dst = std::stoll(fields[1], &p2);
      if (p1 != fields[0].size() || p2 != fields[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      fail<IntegrityError>("edges line ", line, ": malformed endpoint");
    }
    if (src < 0 || dst < 0 || static_cast<std::size_t>(src) >= nodes.size() ||
        static_cast<std::size_t>(dst) >= nodes.size()) {
      fail<IntegrityError>("edges line ", line, ": dangling endpoint (", src, "->", dst,
                           ") with ", nodes.size(), " nodes");
    }
    auto it = std::find(relations.begin(), relations.end(), fields[2]);
    if (it == relations.end()) {
      relations.push_back(fields[2]);
      it = relations.end() - 1;
    }
    edges.push_back({static_cast<std::size_t>(src), static_cast<std::size_t>(dst),
                     static_cast<std::size_t>(it - relations.begin())});
  }
  return HeteroGraph(std::move(relations), std::move(nodes), std::move(edges));
}

inline HeteroGraph load_graph(const std::string& nodes_path, const std::string& edges_path) {
  std::ifstream nodes_in(nodes_path), edges_in(edges_path);
  if (!nodes_in) fail<DataError>("cannot open nodes file '", nodes_path, "'");
  if (!edges_in) fail<DataError>("cannot open edges file '", edges_path, "'");
  return read_graph(nodes_in, edges_in);
}

inline void write_graph(const HeteroGraph& g, std::ostream& nodes_out, std::ostream& edges_out) {
  for (std::size_t i = 0; i < g.node_count(); ++i) nodes_out << node_json_line(i, g.node(i)) << '\n';
  for (const Edge& e : g.edges()) {
    edges_out << e.src << '\t' << e.dst << '\t' << g.relations()[e.relation] << '\n';
  }
}

inline void save_graph(const HeteroGraph& g, const std::string& nodes_path,
                       const std::string& edges_path) {
  std::ofstream nodes_out(nodes_path, std::ios::binary), edges_out(edges_path, std::ios::binary);
  if (!nodes_out || !edges_out) fail<DataError>("cannot write graph files");
  write_graph(g, nodes_out, edges_out);
}

}  // namespace botumc
