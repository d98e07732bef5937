#pragma once

/**
 * HTTP generation and reward clients.
 *
 *   POST /v1/completions  {model, prompt, n, max_tokens, temperature, top_p, stop, seed?}
 *                      -> {choices: [{text, finish_reason: "stop" | "length" | "eos"}]}
 *   POST /v1/score        {question, steps} -> {scores}
 *
 * finish_reason "eos" marks a naturally finished continuation. OpenAI-style
 * servers report end-of-sequence as "stop" with a null "stop_reason"; that is
 * accepted as "eos" as well.
 *
 * Transport failures (connection errors, 5xx) are retried with exponential
 * backoff; anything else that is off-protocol raises ProtocolError at once.
 * An optional record/replay cache keyed by a hash of (route, request body)
 * makes runs against recordings byte-identical to the recorded run.
 */

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "httplib.h"
#include "srca/backends/backend.hpp"
#include "srca/error.hpp"

namespace srca {

struct Endpoint {
  std::string base_url;  // scheme://host[:port][/prefix]
  int timeout_ms = 60000;
};

struct RetryPolicy {
  int attempts = 3;
  int backoff_ms = 200;  // doubled after each failed attempt
};

enum class CacheMode { off, record, replay, automatic };

/// Request/response recordings, one JSON file per request hash.
class RecordReplayCache {
 public:
  RecordReplayCache(std::filesystem::path dir, CacheMode mode) : dir_(std::move(dir)), mode_(mode) {
    if (mode_ != CacheMode::off) std::filesystem::create_directories(dir_);
  }

  CacheMode mode() const noexcept { return mode_; }

  static std::string key(std::string_view route, const nlohmann::json& body) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(body.dump(), fnv1a64(route))));
    return buf;
  }

  std::optional<nlohmann::json> lookup(const std::string& key) const {
    if (mode_ == CacheMode::off || mode_ == CacheMode::record) return std::nullopt;
    std::lock_guard lock(mu_);
    std::ifstream in(dir_ / (key + ".json"));
    if (!in) return std::nullopt;
    try {
      return nlohmann::json::parse(in).at("response");
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError("recording " + key + " is corrupt: " + e.what());
    }
  }

  void store(const std::string& key, std::string_view route, const nlohmann::json& request,
             const nlohmann::json& response) {
    if (mode_ != CacheMode::record && mode_ != CacheMode::automatic) return;
    std::lock_guard lock(mu_);
    const auto final_path = dir_ / (key + ".json");
    const auto tmp = dir_ / (key + ".json.tmp");
    {
      std::ofstream out(tmp);
      out << nlohmann::json{{"route", route}, {"request", request}, {"response", response}}.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, final_path);
  }

 private:
  std::filesystem::path dir_;
  CacheMode mode_;
  mutable std::mutex mu_;
};

namespace detail {

struct ParsedUrl {
  std::string origin;  // scheme://host:port
  std::string prefix;  // path prefix without trailing slash
};

inline ParsedUrl parse_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("url", "missing scheme in " + url);
  auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) out.prefix = url.substr(path_start);
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

/// POST with retries and the record/replay cache in front.
inline nlohmann::json post_json(const Endpoint& ep, const std::string& route, const nlohmann::json& body,
                                const RetryPolicy& retry, RecordReplayCache* cache) {
  std::string key;
  if (cache != nullptr && cache->mode() != CacheMode::off) {
    key = RecordReplayCache::key(route, body);
    if (auto hit = cache->lookup(key)) return *hit;
    if (cache->mode() == CacheMode::replay) {
      throw TransportError("no recording for " + route + " request " + key, 0);
    }
  }

  const auto url = parse_url(ep.base_url);
  std::string last_error;
  int backoff = retry.backoff_ms;
  for (int attempt = 1; attempt <= retry.attempts; ++attempt) {
    httplib::Client client(url.origin);
    const auto timeout = std::chrono::milliseconds(ep.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto res = client.Post(url.prefix + route, body.dump(), "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
    } else if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
    } else if (res->status != 200) {
      throw ProtocolError(route + ": HTTP " + std::to_string(res->status) + ": " + res->body);
    } else {
      nlohmann::json parsed;
      try {
        parsed = nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError(route + ": response is not JSON: " + e.what());
      }
      if (cache != nullptr && !key.empty()) cache->store(key, route, body, parsed);
      return parsed;
    }
    if (attempt < retry.attempts) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
  }
  throw TransportError(route + " unreachable at " + ep.base_url + " after " +
                           std::to_string(retry.attempts) + " attempts: " + last_error,
                       retry.attempts);
}

inline std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

}  // namespace detail

/// Completion request body as sent on the wire.
inline nlohmann::json completion_body(const std::string& model, const GeneratorRequest& req) {
  nlohmann::json body{{"model", model},
                      {"prompt", req.prompt},
                      {"n", req.n},
                      {"max_tokens", req.max_tokens},
                      {"temperature", req.temperature},
                      {"top_p", req.top_p},
                      {"stop", req.stop}};
  if (req.seed) body["seed"] = *req.seed;
  return body;
}

class HttpGenerator final : public Generator {
 public:
  HttpGenerator(Endpoint ep, std::string model, RecordReplayCache* cache = nullptr, RetryPolicy retry = {})
      : ep_(std::move(ep)), model_(std::move(model)), cache_(cache), retry_(retry) {}

  std::vector<Continuation> sample_continuations(const GeneratorRequest& req) override {
    auto choices = request(req);
    std::vector<Continuation> out;
    out.reserve(choices.size());
    for (const auto& ch : choices) {
      Continuation c;
      c.text = choice_text(ch);
      const std::string reason = ch.value("finish_reason", std::string("stop"));
      bool eos = reason == "eos";
      if (reason == "stop" && ch.contains("stop_reason") && ch["stop_reason"].is_null()) eos = true;
      // Some servers return the matched stop string; never let it leak into a step.
      if (cut_at_stop(c.text, req.stop)) eos = false;
      c.finished = eos;
      if (c.text.empty() && !c.finished) throw ProtocolError("completion: empty step without end-of-sequence");
      out.push_back(std::move(c));
    }
    return out;
  }

  std::string force_checkpoint_answer(const GeneratorRequest& req) override {
    auto choices = request(req);
    std::string text = choice_text(choices.front());
    cut_at_stop(text, req.stop);
    return text;
  }

 private:
  static std::string choice_text(const nlohmann::json& ch) {
    if (!ch.is_object() || !ch.contains("text") || !ch["text"].is_string()) {
      throw ProtocolError("completion: choice without text");
    }
    return ch["text"].get<std::string>();
  }

  nlohmann::json request(const GeneratorRequest& req) {
    if (req.n < 1) throw InvalidArgument("n must be >= 1");
    auto resp = detail::post_json(ep_, "/v1/completions", completion_body(model_, req), retry_, cache_);
    if (!resp.is_object() || !resp.contains("choices") || !resp["choices"].is_array()) {
      throw ProtocolError("completion: response without choices");
    }
    if (resp["choices"].size() != req.n) {
      throw ProtocolError("completion: expected " + std::to_string(req.n) + " choices, got " +
                          std::to_string(resp["choices"].size()));
    }
    return resp["choices"];
  }

  Endpoint ep_;
  std::string model_;
  RecordReplayCache* cache_;
  RetryPolicy retry_;
};

class HttpReward final : public RewardModel {
 public:
  explicit HttpReward(Endpoint ep, RecordReplayCache* cache = nullptr, RetryPolicy retry = {})
      : ep_(std::move(ep)), cache_(cache), retry_(retry) {}

  std::vector<double> score_steps(std::string_view question, const std::vector<std::string>& steps) override {
    if (steps.empty()) throw InvalidArgument("score_steps: empty step list");
    nlohmann::json body{{"question", question}, {"steps", steps}};
    auto resp = detail::post_json(ep_, "/v1/score", body, retry_, cache_);
    if (!resp.is_object() || !resp.contains("scores") || !resp["scores"].is_array()) {
      throw ProtocolError("score: response without scores");
    }
    const auto& raw = resp["scores"];
    if (raw.size() != steps.size()) {
      throw ProtocolError("score: " + std::to_string(raw.size()) + " scores for " +
                          std::to_string(steps.size()) + " steps");
    }
    std::vector<double> out;
    out.reserve(raw.size());
    for (const auto& v : raw) {
      if (!v.is_number()) throw ProtocolError("score: non-numeric score");
      double s = v.get<double>();
      if (!(s >= 0.0 && s <= 1.0)) {
        s = s > 1.0 ? 1.0 : 0.0;  // NaN lands on 0
        warnings_.fetch_add(1, std::memory_order_relaxed);
      }
      out.push_back(s);
    }
    return out;
  }

  /// Number of out-of-range scores clamped so far.
  std::uint64_t clamp_warnings() const noexcept { return warnings_.load(std::memory_order_relaxed); }

 private:
  Endpoint ep_;
  RecordReplayCache* cache_;
  RetryPolicy retry_;
  std::atomic<std::uint64_t> warnings_{0};
};

/// Applies GENERATOR_URL, REWARD_URL and REQUEST_TIMEOUT_MS when set.
inline void apply_environment(Endpoint& generator, Endpoint& reward) {
  if (auto v = detail::env("GENERATOR_URL")) generator.base_url = *v;
  if (auto v = detail::env("REWARD_URL")) reward.base_url = *v;
  if (auto v = detail::env("REQUEST_TIMEOUT_MS")) {
    int ms = std::atoi(v->c_str());
    if (ms <= 0) throw ConfigError("REQUEST_TIMEOUT_MS", "must be a positive integer");
    generator.timeout_ms = reward.timeout_ms = ms;
  }
}

}  // namespace srca
