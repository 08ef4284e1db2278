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

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "botumc/autodiff.hpp"
#include "botumc/errors.hpp"

namespace botumc {

struct RunConfig {
  std::uint64_t seed = 7;
  std::string profile = "small";
  std::size_t hidden = 32;
  std::size_t layers = 2;

  // interventional stage
  double lambda1 = 0.8;
  double stage1_lr = 1e-2;
  double stage1_dropout = 0.2;
  int stage1_epochs = 200;
  double kl_clamp = 10.0;
  bool tie_environment_seeds = false;

  // uncertainty stage
  double lambda2 = 0.7;
  double stage2_lr = 5e-5;
  double stage2_dropout = 0.0;
  int stage2_epochs = 100;
  bool share_evidence_head = false;
  bool warm_start_heads = true;

  ad::Activation activation = ad::Activation::kLeakyRelu;
  double leaky_slope = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t calibration_bins = 10;

  void validate() const {
    auto unit = [](double v, const char* name) {
      if (!(v >= 0.0 && v <= 1.0)) fail<ConfigError>(name, " = ", v, " is outside [0, 1]");
    };
    unit(lambda1, "lambda1");
    unit(lambda2, "lambda2");
    if (hidden == 0 || hidden % 4 != 0) fail<ConfigError>("hidden = ", hidden, " must be a positive multiple of 4");
    if (layers == 0) fail<ConfigError>("layers must be at least 1");
    if (!(stage1_lr > 0) || !(stage2_lr > 0)) fail<ConfigError>("learning rates must be positive");
    if (!(stage1_dropout >= 0 && stage1_dropout < 1)) fail<ConfigError>("stage1_dropout must be in [0, 1)");
    if (!(stage2_dropout >= 0 && stage2_dropout < 1)) fail<ConfigError>("stage2_dropout must be in [0, 1)");
    if (stage1_epochs < 0 || stage2_epochs < 0) fail<ConfigError>("epoch counts must be nonnegative");
    if (!(kl_clamp > 0)) fail<ConfigError>("kl_clamp must be positive");
    if (!(leaky_slope >= 0)) fail<ConfigError>("leaky_slope must be nonnegative");
    if (calibration_bins == 0) fail<ConfigError>("calibration_bins must be positive");
    if (!(adam_eps > 0) || !(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1)) {
      fail<ConfigError>("invalid adam moment parameters");
    }
  }
};

// Hyperparameter presets: "small" for Cresci-15 / TwiBot-20 sized data and
// "large" for TwiBot-22 sized data.
inline void apply_profile(RunConfig& c, const std::string& profile) {
  if (profile == "small") {
    c.stage1_lr = 1e-2, c.stage1_dropout = 0.2, c.lambda1 = 0.8, c.hidden = 32, c.stage1_epochs = 200;
    c.stage2_lr = 5e-5, c.lambda2 = 0.7, c.stage2_dropout = 0.0, c.stage2_epochs = 100;
  } else if (profile == "large") {
    c.stage1_lr = 1e-2, c.stage1_dropout = 0.2, c.lambda1 = 0.1, c.hidden = 32, c.stage1_epochs = 3000;
    c.stage2_lr = 1e-5, c.lambda2 = 0.5, c.stage2_dropout = 0.0, c.stage2_epochs = 50;
  } else {
    fail<ConfigError>("unknown profile '", profile, "' (expected small or large)");
  }
  c.profile = profile;
}

inline RunConfig profile_config(const std::string& profile) {
  RunConfig c;
  apply_profile(c, profile);
  return c;
}

namespace detail {

// Reads "key = value" lines; '#' starts a comment. Duplicate keys are errors.
inline std::map<std::string, std::string> parse_key_values(std::istream& in, const char* what) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t n = 0;
  auto trim = [](std::string s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) fail<ConfigError>(what, " line ", n, ": expected key = value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) fail<ConfigError>(what, " line ", n, ": empty key");
    if (!kv.emplace(key, value).second) fail<ConfigError>(what, " line ", n, ": duplicate key '", key, "'");
  }
  return kv;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    fail<ConfigError>("key '", key, "': '", v, "' is not a number");
  }
}

inline long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    fail<ConfigError>("key '", key, "': '", v, "' is not an integer");
  }
}

inline std::size_t to_size(const std::string& key, const std::string& v) {
  long long d = to_int(key, v);
  if (d < 0) fail<ConfigError>("key '", key, "' must be nonnegative");
  return static_cast<std::size_t>(d);
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  fail<ConfigError>("key '", key, "': '", v, "' is not a boolean");
}

}  // namespace detail

inline RunConfig parse_run_config(std::istream& in) {
  auto kv = detail::parse_key_values(in, "config");
  RunConfig c;
  if (auto it = kv.find("profile"); it != kv.end()) {
    apply_profile(c, it->second);
    kv.erase(it);
  }
  using detail::to_bool, detail::to_double, detail::to_int, detail::to_size;
  const std::map<std::string, std::function<void(const std::string&, const std::string&)>> setters{
      {"seed", [&](auto& k, auto& v) { c.seed = static_cast<std::uint64_t>(to_int(k, v)); }},
      {"hidden", [&](auto& k, auto& v) { c.hidden = to_size(k, v); }},
      {"layers", [&](auto& k, auto& v) { c.layers = to_size(k, v); }},
      {"lambda1", [&](auto& k, auto& v) { c.lambda1 = to_double(k, v); }},
      {"lambda2", [&](auto& k, auto& v) { c.lambda2 = to_double(k, v); }},
      {"stage1_lr", [&](auto& k, auto& v) { c.stage1_lr = to_double(k, v); }},
      {"stage1_dropout", [&](auto& k, auto& v) { c.stage1_dropout = to_double(k, v); }},
      {"stage1_epochs", [&](auto& k, auto& v) { c.stage1_epochs = static_cast<int>(to_int(k, v)); }},
      {"stage2_lr", [&](auto& k, auto& v) { c.stage2_lr = to_double(k, v); }},
      {"stage2_dropout", [&](auto& k, auto& v) { c.stage2_dropout = to_double(k, v); }},
      {"stage2_epochs", [&](auto& k, auto& v) { c.stage2_epochs = static_cast<int>(to_int(k, v)); }},
      {"kl_clamp", [&](auto& k, auto& v) { c.kl_clamp = to_double(k, v); }},
      {"tie_environment_seeds", [&](auto& k, auto& v) { c.tie_environment_seeds = to_bool(k, v); }},
      {"share_evidence_head", [&](auto& k, auto& v) { c.share_evidence_head = to_bool(k, v); }},
      {"warm_start_heads", [&](auto& k, auto& v) { c.warm_start_heads = to_bool(k, v); }},
      {"activation",
       [&](auto& k, auto& v) {
         if (v == "leaky_relu") c.activation = ad::Activation::kLeakyRelu;
         else if (v == "softplus") c.activation = ad::Activation::kSoftplus;
         else if (v == "identity") c.activation = ad::Activation::kIdentity;
         else fail<ConfigError>("key '", k, "': unsupported activation '", v, "'");
       }},
      {"leaky_slope", [&](auto& k, auto& v) { c.leaky_slope = to_double(k, v); }},
      {"adam_beta1", [&](auto& k, auto& v) { c.adam_beta1 = to_double(k, v); }},
      {"adam_beta2", [&](auto& k, auto& v) { c.adam_beta2 = to_double(k, v); }},
      {"adam_eps", [&](auto& k, auto& v) { c.adam_eps = to_double(k, v); }},
      {"calibration_bins", [&](auto& k, auto& v) { c.calibration_bins = to_size(k, v); }},
  };
  for (const auto& [key, value] : kv) {
    auto it = setters.find(key);
    if (it == setters.end()) fail<ConfigError>("unknown config key '", key, "'");
    it->second(key, value);
  }
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail<ConfigError>("cannot open config '", path, "'");
  return parse_run_config(in);
}

inline std::string activation_name(ad::Activation a) {
  switch (a) {
    case ad::Activation::kLeakyRelu: return "leaky_relu";
    case ad::Activation::kSoftplus: return "softplus";
    case ad::Activation::kIdentity: return "identity";
    default: return "other";
  }
}

inline std::string format_run_config(const RunConfig& c) {
  std::ostringstream o;
  o.precision(17);
  o << "profile = " << c.profile << "\nseed = " << c.seed << "\nhidden = " << c.hidden
    << "\nlayers = " << c.layers << "\nlambda1 = " << c.lambda1 << "\nstage1_lr = " << c.stage1_lr
    << "\nstage1_dropout = " << c.stage1_dropout << "\nstage1_epochs = " << c.stage1_epochs
    << "\nkl_clamp = " << c.kl_clamp
    << "\ntie_environment_seeds = " << (c.tie_environment_seeds ? "true" : "false")
    << "\nlambda2 = " << c.lambda2 << "\nstage2_lr = " << c.stage2_lr
    << "\nstage2_dropout = " << c.stage2_dropout << "\nstage2_epochs = " << c.stage2_epochs
    << "\nshare_evidence_head = " << (c.share_evidence_head ? "true" : "false")
    << "\nwarm_start_heads = " << (c.warm_start_heads ? "true" : "false")
    << "\nactivation = " << activation_name(c.activation) << "\nleaky_slope = " << c.leaky_slope
    << "\nadam_beta1 = " << c.adam_beta1 << "\nadam_beta2 = " << c.adam_beta2
    << "\nadam_eps = " << c.adam_eps << "\ncalibration_bins = " << c.calibration_bins << '\n';
  return o.str();
}

}  // namespace botumc
