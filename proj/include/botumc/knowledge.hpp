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
#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "botumc/errors.hpp"

namespace botumc {

struct KeyKnowledge {
  std::vector<std::string> concepts;
  std::vector<std::string> actions;
  std::vector<std::string> objects;
  std::vector<std::string> emotions;
  std::vector<std::string> keywords;

  bool empty() const {
    return concepts.empty() && actions.empty() && objects.empty() && emotions.empty() &&
           keywords.empty();
  }
  friend bool operator==(const KeyKnowledge&, const KeyKnowledge&) = default;
};

inline nlohmann::ordered_json to_json(const KeyKnowledge& k) {
  return {{"concepts", k.concepts}, {"actions", k.actions},   {"objects", k.objects},
          {"emotions", k.emotions}, {"keywords", k.keywords}};
}

inline constexpr std::string_view kTweetsPlaceholder = "{TWEETS}";

inline const std::string& default_prompt_template() {
  static const std::string tmpl =
      "You are analysing the posts of one social media account.\n"
      "Read the tweets below and extract the key knowledge they carry.\n"
      "Answer with exactly five lines, each a label followed by a comma-separated list\n"
      "(write 'none' when nothing applies):\n"
      "Concepts: <abstract ideas or topics the tweets discuss>\n"
      "Actions: <what the author does, urges or reports>\n"
      "Objects: <entities, products, people or places mentioned>\n"
      "Emotions: <emotions or attitudes expressed>\n"
      "Keywords: <the most characteristic words>\n"
      "\n"
      "Tweets:\n"
      "{TWEETS}\n";
  return tmpl;
}

inline std::string load_prompt_template(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail<ConfigError>("cannot open prompt template '", path, "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.find(kTweetsPlaceholder) == std::string::npos) {
    fail<ConfigError>("prompt template '", path, "' has no {TWEETS} placeholder");
  }
  return text;
}

// Tweets joined by newlines in posting order, substituted for {TWEETS}.
inline std::string render_prompt(const std::string& tmpl, const std::vector<std::string>& tweets) {
  std::string joined;
  for (std::size_t i = 0; i < tweets.size(); ++i) {
    if (i) joined += '\n';
    joined += tweets[i];
  }
  std::string out = tmpl;
  auto pos = out.find(kTweetsPlaceholder);
  if (pos == std::string::npos) fail<ConfigError>("prompt template has no {TWEETS} placeholder");
  out.replace(pos, kTweetsPlaceholder.size(), joined);
  return out;
}

struct GenerationRequest {
  std::string user_id;
  std::string prompt;
  int max_tokens = 256;
};

// Raised by clients when the endpoint does not answer in time.
class EndpointTimeout : public Error {
 public:
  using Error::Error;
};

class TextClient {
 public:
  virtual ~TextClient() = default;
  virtual std::string generate(const GenerationRequest& request) = 0;
};

// Offline client: the response for user U is the file <dir>/U.txt.
class StubTextClient : public TextClient {
 public:
  explicit StubTextClient(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::string generate(const GenerationRequest& request) override {
    auto path = dir_ / (request.user_id + ".txt");
    std::ifstream in(path, std::ios::binary);
    if (!in) return {};
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  }

 private:
  std::filesystem::path dir_;
};

// POSTs {"prompt","max_tokens"} to base_url + path and reads {"text"}.
class HttpTextClient : public TextClient {
 public:
  HttpTextClient(std::string base_url, std::string path = "/generate",
                 std::chrono::milliseconds timeout = std::chrono::seconds(30))
      : base_url_(std::move(base_url)), path_(std::move(path)), timeout_(timeout) {}

  std::string generate(const GenerationRequest& request) override {
    httplib::Client cli(base_url_);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    nlohmann::json body{{"prompt", request.prompt}, {"max_tokens", request.max_tokens}};
    auto res = cli.Post(path_, body.dump(), "application/json");
    if (!res) {
      throw EndpointTimeout("endpoint " + base_url_ + path_ + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) fail<DataError>("endpoint returned HTTP ", res->status);
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("text") || !j["text"].is_string()) return {};
    return j["text"].get<std::string>();
  }

 private:
  std::string base_url_;
  std::string path_;
  std::chrono::milliseconds timeout_;
};

namespace detail {

inline std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace detail

// Parses labelled lines ("Concepts: a, b"). Returns false when no label is
// recognised at all.
inline bool parse_key_knowledge(const std::string& text, KeyKnowledge& out) {
  out = {};
  bool any = false;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string label = detail::lower(detail::trim(line.substr(0, colon)));
    label.erase(std::remove_if(label.begin(), label.end(), [](char c) { return c == '*' || c == '-'; }),
                label.end());
    label = detail::trim(label);
    std::vector<std::string>* field = nullptr;
    if (label == "concepts") field = &out.concepts;
    else if (label == "actions") field = &out.actions;
    else if (label == "objects") field = &out.objects;
    else if (label == "emotions") field = &out.emotions;
    else if (label == "keywords") field = &out.keywords;
    if (!field) continue;
    any = true;
    std::stringstream items(line.substr(colon + 1));
    for (std::string item; std::getline(items, item, ',');) {
      item = detail::trim(item);
      if (!item.empty() && detail::lower(item) != "none") field->push_back(item);
    }
  }
  return any;
}

struct ExtractionOptions {
  std::string prompt_template = default_prompt_template();
  int max_tokens = 256;
  int max_retries = 2;
  std::function<void(const std::string&)> warn = [](const std::string& m) {
    std::cerr << "warning: " << m << '\n';
  };
};

// One endpoint call per user. Timeouts are retried, then degrade to an empty
// result with a warning; malformed responses likewise.
inline KeyKnowledge extract_key_knowledge(const std::string& user_id,
                                          const std::vector<std::string>& tweets, TextClient& client,
                                          const ExtractionOptions& opts = {}) {
  if (tweets.empty()) return {};
  GenerationRequest req{user_id, render_prompt(opts.prompt_template, tweets), opts.max_tokens};
  std::string text;
  for (int attempt = 0;; ++attempt) {
    try {
      text = client.generate(req);
      break;
    } catch (const EndpointTimeout& e) {
      if (attempt >= opts.max_retries) {
        if (opts.warn) opts.warn("user " + user_id + ": giving up after " + std::to_string(attempt + 1) +
                                 " attempts (" + e.what() + ")");
        return {};
      }
    }
  }
  KeyKnowledge k;
  if (!parse_key_knowledge(text, k)) {
    if (opts.warn) opts.warn("user " + user_id + ": malformed key-knowledge response");
    return {};
  }
  return k;
}

struct UserTweets {
  std::string user_id;
  std::vector<std::string> tweets;
};

// Runs extraction for many users with at most max_parallel calls in flight.
// The client must be safe to call concurrently.
inline std::vector<KeyKnowledge> extract_all(const std::vector<UserTweets>& users, TextClient& client,
                                             const ExtractionOptions& opts = {}, std::size_t max_parallel = 4) {
  std::vector<KeyKnowledge> out(users.size());
  max_parallel = std::max<std::size_t>(1, max_parallel);
  for (std::size_t start = 0; start < users.size(); start += max_parallel) {
    std::vector<std::future<KeyKnowledge>> batch;
    const std::size_t end = std::min(users.size(), start + max_parallel);
    for (std::size_t i = start; i < end; ++i) {
      batch.push_back(std::async(std::launch::async, [&, i] {
        return extract_key_knowledge(users[i].user_id, users[i].tweets, client, opts);
      }));
    }
    for (std::size_t i = start; i < end; ++i) out[i] = batch[i - start].get();
  }
  return out;
}

}  // namespace botumc
