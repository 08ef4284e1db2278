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

#include <fstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "botumc/autodiff.hpp"
#include "botumc/random.hpp"

namespace botumc {

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  static Linear init(std::size_t in, std::size_t out, Rng& rng) {
    return {uniform_init({in, out}, in, rng), uniform_init({out}, in, rng)};
  }
  static Linear zeros(std::size_t in, std::size_t out) { return {Tensor({in, out}), Tensor({out})}; }
};

using NamedParams = std::vector<std::pair<std::string, Tensor*>>;
using ConstNamedParams = std::vector<std::pair<std::string, const Tensor*>>;

inline std::size_t parameter_count(const ConstNamedParams& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t->size();
  return n;
}

// Puts parameter tensors on a tape, once each. Trainable binders record
// leaves; frozen ones record constants.
class ParamBinder {
 public:
  ParamBinder(ad::Tape& tape, bool trainable) : tape_(tape), trainable_(trainable) {}

  ad::Var operator()(const Tensor& p) {
    auto it = bound_.find(&p);
    if (it != bound_.end()) return it->second;
    ad::Var v = trainable_ ? tape_.leaf(p) : tape_.constant(p);
    bound_.emplace(&p, v);
    return v;
  }

  // Gradient of the last backward pass for p; zeros when p was never bound.
  Tensor grad(const Tensor& p) const {
    auto it = bound_.find(&p);
    if (it == bound_.end() || !trainable_) return Tensor(p.shape());
    const Tensor& g = it->second.grad();
    return g.shape() == p.shape() ? g : Tensor(p.shape());
  }

  std::vector<Tensor> grads(const NamedParams& params) const {
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (const auto& [name, p] : params) out.push_back(grad(*p));
    return out;
  }

  ad::Tape& tape() { return tape_; }

 private:
  ad::Tape& tape_;
  bool trainable_;
  std::unordered_map<const Tensor*, ad::Var> bound_;
};

inline std::vector<Tensor*> tensors_of(const NamedParams& params) {
  std::vector<Tensor*> out;
  for (const auto& [name, p] : params) out.push_back(p);
  return out;
}

// ---- checkpoints -----------------------------------------------------------
// {"format":"botumc-checkpoint","version":1,"kind":...,"tensors":[{"name",
// "shape","values"}...]}. Doubles are written in shortest round-trip form.

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::ordered_json checkpoint_json(const std::string& kind, const ConstNamedParams& params,
                                              nlohmann::ordered_json meta = nlohmann::ordered_json::object()) {
  nlohmann::ordered_json j;
  j["format"] = "botumc-checkpoint";
  j["version"] = kCheckpointVersion;
  j["kind"] = kind;
  j["meta"] = std::move(meta);
  j["tensors"] = nlohmann::ordered_json::array();
  for (const auto& [name, t] : params) {
    j["tensors"].push_back({{"name", name}, {"shape", t->shape()}, {"values", t->data()}});
  }
  return j;
}

inline void restore_checkpoint(const nlohmann::ordered_json& j, const std::string& kind,
                               const NamedParams& params) {
  if (j.value("format", "") != "botumc-checkpoint") fail<DataError>("not a botumc checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) fail<DataError>("unsupported checkpoint version");
  if (j.value("kind", "") != kind) fail<DataError>("checkpoint kind '", j.value("kind", ""), "', expected '", kind, "'");
  const auto& tensors = j.at("tensors");
  if (tensors.size() != params.size()) fail<DataError>("checkpoint holds ", tensors.size(), " tensors, expected ", params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& rec = tensors[k];
    if (rec.at("name").get<std::string>() != params[k].first) {
      fail<DataError>("checkpoint tensor ", k, " is '", rec.at("name").get<std::string>(), "', expected '",
                      params[k].first, "'");
    }
    Tensor t(rec.at("shape").get<Shape>(), rec.at("values").get<std::vector<double>>());
    if (t.shape() != params[k].second->shape()) {
      fail<DataError>("checkpoint tensor '", params[k].first, "' has shape ", shape_str(t.shape()));
    }
    *params[k].second = std::move(t);
  }
}

inline void write_json_file(const std::string& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail<DataError>("cannot write '", path, "'");
  out << j.dump() << '\n';
}

inline nlohmann::ordered_json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail<DataError>("cannot open '", path, "'");
  try {
    return nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail<DataError>("'", path, "': ", e.what());
  }
}

}  // namespace botumc
