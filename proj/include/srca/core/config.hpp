#pragma once

#include <array>
#include <string>
#include <string_view>
#include <utility>

#include <nlohmann/json.hpp>

#include "srca/core/types.hpp"

namespace srca {

namespace detail {

template <class E, std::size_t K>
using NameTable = std::array<std::pair<E, std::string_view>, K>;

inline constexpr NameTable<Reduction, 5> kReductionNames{{{Reduction::last, "last"},
                                                          {Reduction::mean, "mean"},
                                                          {Reduction::min, "min"},
                                                          {Reduction::sum, "sum"},
                                                          {Reduction::prod, "prod"}}};
inline constexpr NameTable<Strategy, 5> kStrategyNames{{{Strategy::greedy, "greedy"},
                                                        {Strategy::independent, "independent"},
                                                        {Strategy::beam, "beam"},
                                                        {Strategy::dvts, "dvts"},
                                                        {Strategy::srca, "srca"}}};
inline constexpr NameTable<Selector, 3> kSelectorNames{{{Selector::bon, "bon"},
                                                        {Selector::weighted_bon, "weighted_bon"},
                                                        {Selector::majority, "majority"}}};
inline constexpr NameTable<PathStatus, 3> kStatusNames{{{PathStatus::active, "active"},
                                                        {PathStatus::finished_natural, "finished_natural"},
                                                        {PathStatus::pruned, "pruned"}}};

template <class E, std::size_t K>
std::string_view name_of(const NameTable<E, K>& table, E v) {
  for (const auto& [e, name] : table) {
    if (e == v) return name;
  }
  return "?";
}

template <class E, std::size_t K>
E parse_name(const NameTable<E, K>& table, std::string_view field, std::string_view text) {
  for (const auto& [e, name] : table) {
    if (name == text) return e;
  }
  std::string allowed;
  for (const auto& [e, name] : table) {
    if (!allowed.empty()) allowed += " | ";
    allowed += name;
  }
  throw ConfigError(std::string(field), "expected one of " + allowed + ", got \"" + std::string(text) + "\"");
}

}  // namespace detail

inline std::string_view to_string(Reduction r) { return detail::name_of(detail::kReductionNames, r); }
inline std::string_view to_string(Strategy s) { return detail::name_of(detail::kStrategyNames, s); }
inline std::string_view to_string(Selector s) { return detail::name_of(detail::kSelectorNames, s); }
inline std::string_view to_string(PathStatus s) { return detail::name_of(detail::kStatusNames, s); }

inline Reduction parse_reduction(std::string_view s) {
  return detail::parse_name(detail::kReductionNames, "reduction", s);
}
inline Strategy parse_strategy(std::string_view s) {
  return detail::parse_name(detail::kStrategyNames, "strategy", s);
}
inline Selector parse_selector(std::string_view s) {
  return detail::parse_name(detail::kSelectorNames, "selector", s);
}
inline PathStatus parse_status(std::string_view s) {
  return detail::parse_name(detail::kStatusNames, "status", s);
}

/// Throws ConfigError naming the first violated field.
inline void validate(const SearchConfig& cfg) {
  if (cfg.m < 1) throw ConfigError("M", "beam width must be >= 1");
  if (cfg.n < cfg.m) throw ConfigError("N", "N >= M required");
  if (cfg.n % cfg.m != 0) throw ConfigError("N", "N mod M = 0 required");
  if (cfg.max_steps < 1) throw ConfigError("max_steps", "must be >= 1");
  if (!(cfg.tau >= 0.0 && cfg.tau <= 1.0)) throw ConfigError("tau", "must lie in [0, 1]");
  if (!(cfg.temperature >= 0.0)) throw ConfigError("temperature", "must be >= 0");
  if (!(cfg.top_p > 0.0 && cfg.top_p <= 1.0)) throw ConfigError("top_p", "must lie in (0, 1]");
  if (cfg.delimiters.empty()) throw ConfigError("delimiters", "at least one delimiter required");
  for (const auto& d : cfg.delimiters) {
    if (d.empty()) throw ConfigError("delimiters", "delimiters must be non-empty");
  }
  if (cfg.step_max_tokens < 1) throw ConfigError("step_max_tokens", "must be >= 1");
  if (cfg.checkpoint_max_tokens < 1) throw ConfigError("checkpoint_max_tokens", "must be >= 1");
}

/// Flat key schema shared by config files and --override.
inline nlohmann::json to_json(const SearchConfig& cfg) {
  return nlohmann::json{{"N", cfg.n},
                        {"M", cfg.m},
                        {"max_steps", cfg.max_steps},
                        {"temperature", cfg.temperature},
                        {"top_p", cfg.top_p},
                        {"tau", cfg.tau},
                        {"reduction", to_string(cfg.reduction)},
                        {"delimiters", cfg.delimiters},
                        {"injection_template", cfg.injection_template},
                        {"prompt_template", cfg.prompt_template},
                        {"strategy", to_string(cfg.strategy)},
                        {"selector", to_string(cfg.selector)},
                        {"cca", cfg.cca_enabled},
                        {"seed", cfg.seed},
                        {"step_max_tokens", cfg.step_max_tokens},
                        {"checkpoint_max_tokens", cfg.checkpoint_max_tokens}};
}

namespace detail {

template <class T>
T get_field(const nlohmann::json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path, std::string("wrong type (") + e.what() + ")");
  }
}

inline std::size_t get_count(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    throw ConfigError(path, "expected a non-negative integer");
  }
  return j.get<std::size_t>();
}

}  // namespace detail

/// Applies the keys present in `j` on top of `base`. `prefix` is used in error paths.
inline SearchConfig apply_config(SearchConfig base, const nlohmann::json& j,
                                 const std::string& prefix = "search") {
  if (!j.is_object()) throw ConfigError(prefix, "expected an object");
  for (const auto& [key, v] : j.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (key == "N") base.n = detail::get_count(v, path);
    else if (key == "M") base.m = detail::get_count(v, path);
    else if (key == "max_steps") base.max_steps = detail::get_count(v, path);
    else if (key == "temperature") base.temperature = detail::get_field<double>(v, path);
    else if (key == "top_p") base.top_p = detail::get_field<double>(v, path);
    else if (key == "tau") base.tau = detail::get_field<double>(v, path);
    else if (key == "reduction") base.reduction = parse_reduction(detail::get_field<std::string>(v, path));
    else if (key == "delimiters") base.delimiters = detail::get_field<std::vector<std::string>>(v, path);
    else if (key == "injection_template") base.injection_template = detail::get_field<std::string>(v, path);
    else if (key == "prompt_template") base.prompt_template = detail::get_field<std::string>(v, path);
    else if (key == "strategy") base.strategy = parse_strategy(detail::get_field<std::string>(v, path));
    else if (key == "selector") base.selector = parse_selector(detail::get_field<std::string>(v, path));
    else if (key == "cca") base.cca_enabled = detail::get_field<bool>(v, path);
    else if (key == "seed") base.seed = detail::get_field<std::uint64_t>(v, path);
    else if (key == "step_max_tokens") base.step_max_tokens = detail::get_count(v, path);
    else if (key == "checkpoint_max_tokens") base.checkpoint_max_tokens = detail::get_count(v, path);
    else throw ConfigError(path, "unknown key");
  }
  return base;
}

}  // namespace srca
