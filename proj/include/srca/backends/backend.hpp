#pragma once

/**
 * Generation and reward provider interfaces.
 *
 * The engine talks to a policy model through Generator and to a process
 * reward model through RewardModel. Both must accept concurrent calls.
 *
 * Prompt layout used by the engine:
 *
 *   step sampling:      <prompt header><path text><delimiters[0]>
 *   checkpoint answer:  <prompt header><path text><injection template>
 *
 * A step continuation is cut at the first stop delimiter and returned
 * without it; the engine re-attaches delimiters[0] when it builds the Step.
 * The checkpoint prompt is never appended to the ongoing path, which is all
 * the rollback there is from the engine's side.
 */

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "srca/core/types.hpp"

namespace srca {

struct GeneratorRequest {
  std::string prompt;
  std::size_t n = 1;
  double temperature = 0.8;
  double top_p = 0.9;
  std::size_t max_tokens = 512;
  std::vector<std::string> stop;
  std::optional<std::uint64_t> seed;

  friend bool operator==(const GeneratorRequest&, const GeneratorRequest&) = default;
};

struct Continuation {
  std::string text;
  /// True when generation ended at end-of-sequence rather than at a stop delimiter.
  bool finished = false;
  /// Final answer reported by the backend for finished continuations, if it knows it.
  std::optional<std::string> final_answer;

  friend bool operator==(const Continuation&, const Continuation&) = default;
};

class Generator {
 public:
  virtual ~Generator() = default;

  /// Exactly req.n continuations, each one reasoning step.
  virtual std::vector<Continuation> sample_continuations(const GeneratorRequest& req) = 0;

  /// Raw answer text for a prompt ending in the injection template.
  virtual std::string force_checkpoint_answer(const GeneratorRequest& req) = 0;
};

class RewardModel {
 public:
  virtual ~RewardModel() = default;

  /// One score in [0, 1] per step, order-aligned.
  virtual std::vector<double> score_steps(std::string_view question,
                                          const std::vector<std::string>& steps) = 0;
};

// -- hashing and seed derivation ---------------------------------------------

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed) { return splitmix64(seed); }

template <class... Rest>
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t next, Rest... rest) {
  return mix_seed(splitmix64(seed) ^ next, static_cast<std::uint64_t>(rest)...);
}

// -- request builders ---------------------------------------------------------

inline GeneratorRequest step_request(std::string prompt, std::size_t n, const SearchConfig& cfg,
                                     std::uint64_t seed) {
  GeneratorRequest r;
  r.prompt = std::move(prompt);
  r.n = n;
  r.temperature = cfg.temperature;
  r.top_p = cfg.top_p;
  r.max_tokens = cfg.step_max_tokens;
  r.stop = cfg.delimiters;
  r.seed = seed;
  return r;
}

/// Checkpoint answers stop at a newline, any step delimiter, or the token cap.
inline GeneratorRequest checkpoint_request(std::string prompt_with_template, const SearchConfig& cfg,
                                           std::uint64_t seed) {
  GeneratorRequest r;
  r.prompt = std::move(prompt_with_template);
  r.n = 1;
  r.temperature = cfg.temperature;
  r.top_p = cfg.top_p;
  r.max_tokens = cfg.checkpoint_max_tokens;
  r.stop.push_back("\n");
  r.stop.insert(r.stop.end(), cfg.delimiters.begin(), cfg.delimiters.end());
  r.seed = seed;
  return r;
}

/// Cuts `text` at the first occurrence of any stop string. Returns true if cut.
inline bool cut_at_stop(std::string& text, const std::vector<std::string>& stop) {
  std::size_t first = std::string::npos;
  for (const auto& s : stop) {
    if (s.empty()) continue;
    first = std::min(first, text.find(s));
  }
  if (first == std::string::npos) return false;
  text.resize(first);
  return true;
}

}  // namespace srca
