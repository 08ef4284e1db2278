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
#include <string>
#include <vector>

#include "botumc/autodiff.hpp"
#include "botumc/graph.hpp"
#include "botumc/params.hpp"

namespace botumc {

// (x - mean) / (std + eps) with the population standard deviation.
inline std::vector<double> zscore_normalize(std::span<const double> column, double eps = 1e-8) {
  if (column.empty()) fail<ContractError>("zscore of an empty column");
  if (!(eps > 0)) fail<ContractError>("zscore guard must be positive");
  const double n = static_cast<double>(column.size());
  double mean = 0.0;
  for (double v : column) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : column) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> out;
  out.reserve(column.size());
  for (double v : column) out.push_back((v - mean) / (sd + eps));
  return out;
}

// Each 0/1 flag becomes a two-entry one-hot ([1,0] for 0, [0,1] for 1).
inline std::vector<double> encode_booleans(std::span<const int> flags) {
  std::vector<double> out;
  out.reserve(2 * flags.size());
  for (std::size_t k = 0; k < flags.size(); ++k) {
    if (flags[k] != 0 && flags[k] != 1) {
      fail<ValidationError>("boolean flag ", k, " is ", flags[k], "; expected 0 or 1");
    }
    out.push_back(flags[k] == 0 ? 1.0 : 0.0);
    out.push_back(flags[k] == 1 ? 1.0 : 0.0);
  }
  return out;
}

// Precomputed text vectors per user.
struct EmbeddingBlocks {
  Tensor description;  // [n, d_des]
  Tensor tweets;       // [n, d_tweet]
};

namespace detail {

template <typename T>
Tensor stack_block(const HeteroGraph& g, std::optional<std::vector<T>> NodeAttributes::*field,
                   const char* block) {
  const std::size_t n = g.node_count();
  std::size_t dim = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = g.node(i).attributes.*field;
    if (!v) fail<ValidationError>("node ", i, " is missing block '", block, "'");
    if (i == 0) dim = v->size();
    if (v->size() != dim) {
      fail<ValidationError>("node ", i, " has ", block, " of dimension ", v->size(), ", expected ", dim);
    }
  }
  Tensor out({n, dim});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = *(g.node(i).attributes.*field);
    for (std::size_t j = 0; j < dim; ++j) out(i, j) = static_cast<double>(v[j]);
  }
  return out;
}

}  // namespace detail

inline EmbeddingBlocks ingest_embeddings(const HeteroGraph& g) {
  return {detail::stack_block(g, &NodeAttributes::desc_emb, "desc_emb"),
          detail::stack_block(g, &NodeAttributes::tweet_emb, "tweet_emb")};
}

inline EmbeddingBlocks ingest_embeddings(const std::string& nodes_path) {
  std::ifstream in(nodes_path);
  if (!in) fail<DataError>("cannot open nodes file '", nodes_path, "'");
  std::istringstream no_edges;
  return ingest_embeddings(read_graph(in, no_edges));
}

// The four raw per-user blocks, before projection.
struct RawBlocks {
  Tensor description;  // [n, d_des]
  Tensor tweets;       // [n, d_tweet]; trailing half is the key-knowledge part
  Tensor numeric;      // [n, d_num], z-scored per column
  Tensor booleans;     // [n, 2 * d_bool], one-hot

  std::size_t rows() const { return description.rows(); }
};

struct RawBlockOptions {
  // When false the key-knowledge segment of tweet_emb (columns [d/2, d)) is
  // zeroed, leaving only the raw tweet encoding.
  bool key_knowledge = true;
  double zscore_eps = 1e-8;
};

inline RawBlocks build_raw_blocks(const HeteroGraph& g, const RawBlockOptions& opts = {}) {
  RawBlocks raw;
  EmbeddingBlocks emb = ingest_embeddings(g);
  raw.description = std::move(emb.description);
  raw.tweets = std::move(emb.tweets);
  if (!opts.key_knowledge) {
    const std::size_t d = raw.tweets.cols();
    for (std::size_t i = 0; i < raw.tweets.rows(); ++i)
      for (std::size_t j = d / 2; j < d; ++j) raw.tweets(i, j) = 0.0;
  }

  Tensor num = detail::stack_block(g, &NodeAttributes::num, "num");
  for (std::size_t j = 0; j < num.cols(); ++j) {
    std::vector<double> col(num.rows());
    for (std::size_t i = 0; i < num.rows(); ++i) col[i] = num(i, j);
    auto z = zscore_normalize(col, opts.zscore_eps);
    for (std::size_t i = 0; i < num.rows(); ++i) num(i, j) = z[i];
  }
  raw.numeric = std::move(num);

  const std::size_t n = g.node_count();
  std::size_t k = 0;
  std::vector<std::vector<double>> encoded(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& flags = g.node(i).attributes.flags;
    if (!flags) fail<ValidationError>("node ", i, " is missing block 'bool'");
    try {
      encoded[i] = encode_booleans(*flags);
    } catch (const ValidationError& e) {
      fail<ValidationError>("node ", i, ": ", e.what());
    }
    if (i == 0) k = flags->size();
    if (flags->size() != k) fail<ValidationError>("node ", i, " has ", flags->size(), " flags, expected ", k);
  }
  raw.booleans = Tensor({n, 2 * k});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < 2 * k; ++j) raw.booleans(i, j) = encoded[i][j];
  return raw;
}

// One linear projection per block, each to hidden / 4 columns.
struct FeatureProjector {
  Linear description, tweets, numeric, booleans;

  static FeatureProjector init(const RawBlocks& raw, std::size_t hidden, Rng& rng) {
    if (hidden % 4 != 0) fail<ConfigError>("hidden size ", hidden, " is not divisible by 4");
    const std::size_t q = hidden / 4;
    FeatureProjector p;
    p.description = Linear::init(raw.description.cols(), q, rng);
    p.tweets = Linear::init(raw.tweets.cols(), q, rng);
    p.numeric = Linear::init(raw.numeric.cols(), q, rng);
    p.booleans = Linear::init(raw.booleans.cols(), q, rng);
    return p;
  }

  NamedParams parameters() {
    return {{"proj.des.w", &description.weight}, {"proj.des.b", &description.bias},
            {"proj.tweet.w", &tweets.weight},    {"proj.tweet.b", &tweets.bias},
            {"proj.num.w", &numeric.weight},     {"proj.num.b", &numeric.bias},
            {"proj.bool.w", &booleans.weight},   {"proj.bool.b", &booleans.bias}};
  }
};

// [v_des; v_concat; v_num; v_bl], each block = leaky_relu(raw W + b).
inline ad::Var assemble_features(ad::Tape& tape, const RawBlocks& raw, const FeatureProjector& proj,
                                 ParamBinder& bind, double slope = 0.01) {
  auto block = [&](const Tensor& x, const Linear& l) {
    return ad::leaky_relu(ad::linear(tape.constant(x), bind(l.weight), bind(l.bias)), slope);
  };
  return ad::concat_cols({block(raw.description, proj.description), block(raw.tweets, proj.tweets),
                          block(raw.numeric, proj.numeric), block(raw.booleans, proj.booleans)});
}

inline Tensor assemble_features(const RawBlocks& raw, const FeatureProjector& proj, double slope = 0.01) {
  ad::Tape tape;
  ParamBinder bind(tape, false);
  return assemble_features(tape, raw, proj, bind, slope).value();
}

}  // namespace botumc
