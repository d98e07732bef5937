#pragma once

/**
 * Benchmark orchestration: a grid of (sweep value, method, dataset) cells,
 * each run over every question of the dataset. RunResults are stored as
 *
 *   <results_dir>/<dataset>/<method>/<cfg-hash>/<question-id>.json
 *
 * and an existing file is reused instead of re-running the question, so an
 * interrupted benchmark resumes where it stopped. The report is rebuilt from
 * the store after every run.
 */

#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "srca/backends/http.hpp"
#include "srca/backends/scripted_world.hpp"
#include "srca/core/config.hpp"
#include "srca/harness/dataset.hpp"
#include "srca/harness/report.hpp"
#include "srca/serialize.hpp"
#include "srca/strategies/engine.hpp"

namespace srca {

// -- methods ------------------------------------------------------------------

struct MethodSpec {
  std::string name;
  Strategy strategy;
  bool cca;
  Selector selector;
};

inline const std::vector<MethodSpec>& method_table() {
  static const std::vector<MethodSpec> table{
      {"srca", Strategy::srca, true, Selector::bon},
      {"acs", Strategy::srca, false, Selector::bon},
      {"beam", Strategy::beam, false, Selector::bon},
      {"beam+cca", Strategy::beam, true, Selector::bon},
      {"dvts", Strategy::dvts, false, Selector::bon},
      {"dvts+cca", Strategy::dvts, true, Selector::bon},
      {"self_consistency", Strategy::independent, false, Selector::majority},
      {"bon", Strategy::independent, false, Selector::bon},
      {"weighted_bon", Strategy::independent, false, Selector::weighted_bon},
      {"greedy", Strategy::greedy, false, Selector::bon},
  };
  return table;
}

inline const MethodSpec& method_spec(std::string_view name) {
  for (const auto& m : method_table()) {
    if (m.name == name) return m;
  }
  std::string known;
  for (const auto& m : method_table()) known += (known.empty() ? "" : ", ") + m.name;
  throw ConfigError("methods", "unknown method '" + std::string(name) + "' (known: " + known + ")");
}

inline SearchConfig apply_method(SearchConfig cfg, const MethodSpec& m) {
  cfg.strategy = m.strategy;
  cfg.cca_enabled = m.cca;
  cfg.selector = m.selector;
  return cfg;
}

// -- configuration --------------------------------------------------------------

enum class BackendKind { scripted, http };

struct BackendConfig {
  BackendKind kind = BackendKind::scripted;
  std::filesystem::path worlds_dir = "worlds";  // scripted: <worlds_dir>/<question-id>.json
  Endpoint generator{"http://127.0.0.1:8000", 60000};
  Endpoint reward{"http://127.0.0.1:8001", 60000};
  std::string model = "default";
  std::filesystem::path cache_dir;
  CacheMode cache_mode = CacheMode::off;
};

enum class SweepAxis { none, n, tau };

struct BenchmarkConfig {
  SearchConfig search;
  std::vector<std::string> methods{"srca"};
  std::vector<std::filesystem::path> datasets;
  BackendConfig backend;
  std::filesystem::path results_dir = "results";
  std::vector<PassK> ks = default_ks();
  std::size_t concurrency = 1;   // questions in flight within a cell
  std::size_t max_inflight = 1;  // backend calls in flight within a question
  std::optional<FlopsModel> flops;
  SweepAxis sweep_axis = SweepAxis::none;
  std::vector<double> sweep_values;
};

namespace detail {

inline CacheMode parse_cache_mode(const std::string& s) {
  if (s == "off") return CacheMode::off;
  if (s == "record") return CacheMode::record;
  if (s == "replay") return CacheMode::replay;
  if (s == "auto") return CacheMode::automatic;
  throw ConfigError("backend.cache_mode", "expected off, record, replay or auto");
}

inline std::string cache_mode_name(CacheMode m) {
  switch (m) {
    case CacheMode::off: return "off";
    case CacheMode::record: return "record";
    case CacheMode::replay: return "replay";
    case CacheMode::automatic: return "auto";
  }
  return "off";
}

inline std::vector<PassK> parse_ks(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("harness.ks", "expected a non-empty array");
  std::vector<PassK> ks;
  for (const auto& v : j) {
    if (v.is_string() && v.get<std::string>() == "N") {
      ks.push_back({"N", std::nullopt});
    } else if (v.is_number_integer() && v.get<long long>() >= 1) {
      ks.push_back({std::to_string(v.get<long long>()), v.get<std::size_t>()});
    } else {
      throw ConfigError("harness.ks", "entries must be positive integers or \"N\"");
    }
  }
  return ks;
}

inline nlohmann::json ks_json(const std::vector<PassK>& ks) {
  auto out = nlohmann::json::array();
  for (const auto& k : ks) {
    if (k.k) out.push_back(*k.k);
    else out.push_back("N");
  }
  return out;
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return std::filesystem::absolute(base / p).lexically_normal();
}

template <class F>
void each_key(const nlohmann::json& j, const std::string& section, F&& fn) {
  if (!j.is_object()) throw ConfigError(section, "expected an object");
  for (const auto& [k, v] : j.items()) fn(k, v, section + "." + k);
}

inline std::string string_field(const nlohmann::json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

inline std::size_t positive(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<long long>() < 1) throw ConfigError(path, "expected a positive integer");
  return v.get<std::size_t>();
}

inline double number_field(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

inline std::vector<std::string> string_list(const nlohmann::json& v, const std::string& path) {
  std::vector<std::string> out;
  if (v.is_string()) {
    // "a,b" shorthand, handy for --override
    std::string s = v.get<std::string>();
    std::size_t start = 0;
    while (start <= s.size()) {
      auto end = s.find(',', start);
      if (end == std::string::npos) end = s.size();
      if (end > start) out.push_back(s.substr(start, end - start));
      start = end + 1;
    }
  } else if (v.is_array()) {
    for (const auto& x : v) out.push_back(string_field(x, path));
  } else {
    throw ConfigError(path, "expected a list of strings");
  }
  return out;
}

}  // namespace detail

/**
 * Parses a benchmark config document. Relative paths are resolved against
 * `base_dir` (the directory of the config file).
 */
inline BenchmarkConfig parse_benchmark_config(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config", "expected a JSON object");
  BenchmarkConfig cfg;
  for (const auto& [key, v] : doc.items()) {
    if (key == "search") {
      cfg.search = apply_config(cfg.search, v, "search");
    } else if (key == "methods") {
      cfg.methods = detail::string_list(v, "methods");
    } else if (key == "datasets") {
      cfg.datasets.clear();
      for (const auto& d : detail::string_list(v, "datasets")) cfg.datasets.push_back(d);
    } else if (key == "backend") {
      detail::each_key(v, "backend", [&](const std::string& k, const nlohmann::json& x, const std::string& path) {
        if (k == "kind") {
          const auto s = detail::string_field(x, path);
          if (s == "scripted") cfg.backend.kind = BackendKind::scripted;
          else if (s == "http") cfg.backend.kind = BackendKind::http;
          else throw ConfigError(path, "expected scripted or http");
        } else if (k == "worlds_dir") cfg.backend.worlds_dir = detail::string_field(x, path);
        else if (k == "generator_url") cfg.backend.generator.base_url = detail::string_field(x, path);
        else if (k == "reward_url") cfg.backend.reward.base_url = detail::string_field(x, path);
        else if (k == "timeout_ms") {
          cfg.backend.generator.timeout_ms = cfg.backend.reward.timeout_ms =
              static_cast<int>(detail::positive(x, path));
        } else if (k == "model") cfg.backend.model = detail::string_field(x, path);
        else if (k == "cache_dir") cfg.backend.cache_dir = detail::string_field(x, path);
        else if (k == "cache_mode") cfg.backend.cache_mode = detail::parse_cache_mode(detail::string_field(x, path));
        else throw ConfigError(path, "unknown key");
      });
    } else if (key == "harness") {
      detail::each_key(v, "harness", [&](const std::string& k, const nlohmann::json& x, const std::string& path) {
        if (k == "results_dir") cfg.results_dir = detail::string_field(x, path);
        else if (k == "ks") cfg.ks = detail::parse_ks(x);
        else if (k == "concurrency") cfg.concurrency = detail::positive(x, path);
        else if (k == "max_inflight") cfg.max_inflight = detail::positive(x, path);
        else if (k == "generator_params") {
          if (!cfg.flops) cfg.flops = FlopsModel{};
          cfg.flops->generator_params = detail::number_field(x, path);
        } else if (k == "reward_params") {
          if (!cfg.flops) cfg.flops = FlopsModel{};
          cfg.flops->reward_params = detail::number_field(x, path);
        } else throw ConfigError(path, "unknown key");
      });
    } else if (key == "sweep") {
      detail::each_key(v, "sweep", [&](const std::string& k, const nlohmann::json& x, const std::string& path) {
        if (k == "axis") {
          const auto s = detail::string_field(x, path);
          if (s == "n" || s == "N") cfg.sweep_axis = SweepAxis::n;
          else if (s == "tau") cfg.sweep_axis = SweepAxis::tau;
          else if (s == "none") cfg.sweep_axis = SweepAxis::none;
          else throw ConfigError(path, "expected n or tau");
        } else if (k == "values") {
          if (!x.is_array()) throw ConfigError(path, "expected an array of numbers");
          cfg.sweep_values.clear();
          for (const auto& e : x) cfg.sweep_values.push_back(detail::number_field(e, path));
        } else throw ConfigError(path, "unknown key");
      });
    } else {
      throw ConfigError(key, "unknown key");
    }
  }

  for (auto& d : cfg.datasets) d = detail::resolve(base_dir, d);
  cfg.backend.worlds_dir = detail::resolve(base_dir, cfg.backend.worlds_dir);
  cfg.backend.cache_dir = detail::resolve(base_dir, cfg.backend.cache_dir);
  cfg.results_dir = detail::resolve(base_dir, cfg.results_dir);
  return cfg;
}

/// Checks everything that can be checked before any question runs.
inline void validate(const BenchmarkConfig& cfg) {
  validate(cfg.search);
  if (cfg.methods.empty()) throw ConfigError("methods", "at least one method required");
  for (const auto& m : cfg.methods) method_spec(m);
  if (cfg.datasets.empty()) throw ConfigError("datasets", "at least one dataset required");
  if (cfg.backend.kind == BackendKind::http && cfg.backend.cache_mode != CacheMode::off &&
      cfg.backend.cache_dir.empty()) {
    throw ConfigError("backend.cache_dir", "required when cache_mode is not off");
  }
  if (cfg.sweep_axis != SweepAxis::none && cfg.sweep_values.empty()) {
    throw ConfigError("sweep.values", "at least one value required");
  }
  for (double v : cfg.sweep_values) {
    SearchConfig probe = cfg.search;
    if (cfg.sweep_axis == SweepAxis::n) {
      if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v))) {
        throw ConfigError("sweep.values", "N values must be positive integers");
      }
      probe.n = static_cast<std::size_t>(v);
    } else if (cfg.sweep_axis == SweepAxis::tau) {
      probe.tau = v;
    }
    validate(probe);
  }
}

inline nlohmann::json to_json(const BenchmarkConfig& cfg) {
  nlohmann::json datasets = nlohmann::json::array();
  for (const auto& d : cfg.datasets) datasets.push_back(d.string());
  nlohmann::json backend{{"kind", cfg.backend.kind == BackendKind::scripted ? "scripted" : "http"},
                         {"worlds_dir", cfg.backend.worlds_dir.string()},
                         {"generator_url", cfg.backend.generator.base_url},
                         {"reward_url", cfg.backend.reward.base_url},
                         {"timeout_ms", cfg.backend.generator.timeout_ms},
                         {"model", cfg.backend.model},
                         {"cache_dir", cfg.backend.cache_dir.string()},
                         {"cache_mode", detail::cache_mode_name(cfg.backend.cache_mode)}};
  nlohmann::json harness{{"results_dir", cfg.results_dir.string()},
                         {"ks", detail::ks_json(cfg.ks)},
                         {"concurrency", cfg.concurrency},
                         {"max_inflight", cfg.max_inflight}};
  if (cfg.flops) {
    harness["generator_params"] = cfg.flops->generator_params;
    harness["reward_params"] = cfg.flops->reward_params;
  }
  nlohmann::json doc{{"search", to_json(cfg.search)},
                     {"methods", cfg.methods},
                     {"datasets", datasets},
                     {"backend", backend},
                     {"harness", harness}};
  if (cfg.sweep_axis != SweepAxis::none) {
    doc["sweep"] = {{"axis", cfg.sweep_axis == SweepAxis::n ? "n" : "tau"}, {"values", cfg.sweep_values}};
  }
  return doc;
}

/**
 * Applies one "key=value" override. Bare keys address the search section;
 * other sections use "section.key". The value is read as JSON when it parses,
 * otherwise as a string.
 */
inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--override", "expected key=value, got '" + assignment + "'");
  }
  std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;

  std::string section = "search";
  if (auto dot = key.find('.'); dot != std::string::npos) {
    section = key.substr(0, dot);
    key = key.substr(dot + 1);
  } else if (key == "methods" || key == "datasets") {
    doc[key] = value;
    return;
  }
  if (!doc.contains(section)) doc[section] = nlohmann::json::object();
  doc[section][key] = value;
}

/// Reads a config file, applies overrides, resolves paths and validates.
inline BenchmarkConfig load_benchmark_config(const std::filesystem::path& file,
                                             const std::vector<std::string>& overrides = {}) {
  std::ifstream in(file);
  if (!in) throw LoadError("cannot open config " + file.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", file.string() + ": " + e.what());
  }
  for (const auto& o : overrides) apply_override(doc, o);
  auto cfg = parse_benchmark_config(doc, std::filesystem::absolute(file).parent_path());
  validate(cfg);
  return cfg;
}

// -- backends -------------------------------------------------------------------

/// Generator and reward model for one question.
struct QuestionBackends {
  std::shared_ptr<const ScriptedWorld> world;
  std::unique_ptr<Generator> generator;
  std::unique_ptr<RewardModel> reward;
};

using BackendFactory =
    std::function<QuestionBackends(const Dataset&, const Question&, const SearchConfig&)>;

inline BackendFactory make_backend_factory(const BackendConfig& bc) {
  if (bc.kind == BackendKind::scripted) {
    return [dir = bc.worlds_dir](const Dataset&, const Question& q, const SearchConfig& cfg) {
      QuestionBackends b;
      b.world = std::make_shared<const ScriptedWorld>(ScriptedWorld::load(dir / (q.id + ".json")));
      b.generator = std::make_unique<ScriptedGenerator>(*b.world, render_prompt(cfg, q), cfg.injection_template);
      b.reward = std::make_unique<ScriptedReward>(*b.world);
      return b;
    };
  }
  Endpoint gen = bc.generator, rew = bc.reward;
  apply_environment(gen, rew);
  std::shared_ptr<RecordReplayCache> cache;
  if (bc.cache_mode != CacheMode::off) cache = std::make_shared<RecordReplayCache>(bc.cache_dir, bc.cache_mode);
  return [gen, rew, cache, model = bc.model](const Dataset&, const Question&, const SearchConfig&) {
    QuestionBackends b;
    b.generator = std::make_unique<HttpGenerator>(gen, model, cache.get());
    b.reward = std::make_unique<HttpReward>(rew, cache.get());
    return b;
  };
}

// -- results store --------------------------------------------------------------

inline std::string config_hash(const SearchConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json(cfg).dump())));
  return buf;
}

class ResultsStore {
 public:
  explicit ResultsStore(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const noexcept { return root_; }

  std::filesystem::path cell_dir(const std::string& dataset, const std::string& method,
                                 const SearchConfig& cfg) const {
    return root_ / dataset / method / config_hash(cfg);
  }

  std::filesystem::path file(const std::string& dataset, const std::string& method, const SearchConfig& cfg,
                             const std::string& question_id) const {
    return cell_dir(dataset, method, cfg) / (question_id + ".json");
  }

  /// Stored result, or nothing if absent or unreadable.
  std::optional<RunResult> load(const std::filesystem::path& f) const {
    if (!std::filesystem::exists(f)) return std::nullopt;
    try {
      return load_run(f);
    } catch (const LoadError&) {
      return std::nullopt;
    }
  }

  void store(const std::filesystem::path& f, const RunResult& r) const { write_file_atomic(f, dump_run(r)); }

 private:
  std::filesystem::path root_;
};

// -- orchestration --------------------------------------------------------------

struct Cell {
  std::string dataset;
  std::string method;
  std::string label;
  SearchConfig search;
};

struct CellFailure {
  std::string dataset;
  std::string label;
  std::string question_id;
  std::string message;
};

struct BenchmarkOutcome {
  Report report;
  std::vector<CellFailure> failures;
  std::size_t executed = 0;  // questions run (not loaded from the store)
  std::size_t reused = 0;

  bool ok() const noexcept { return failures.empty(); }
};

namespace detail {

inline std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace detail

/// Grid cells in report order: sweep value, then method, then dataset.
inline std::vector<Cell> expand_cells(const BenchmarkConfig& cfg, const std::vector<Dataset>& datasets) {
  std::vector<std::optional<double>> values;
  if (cfg.sweep_axis == SweepAxis::none) values.push_back(std::nullopt);
  for (double v : cfg.sweep_values) values.push_back(v);

  std::vector<Cell> cells;
  for (const auto& value : values) {
    for (const auto& name : cfg.methods) {
      SearchConfig s = apply_method(cfg.search, method_spec(name));
      std::string label = name;
      if (value && cfg.sweep_axis == SweepAxis::n) {
        s.n = static_cast<std::size_t>(*value);
        label += " (N=" + detail::format_value(*value) + ")";
      } else if (value && cfg.sweep_axis == SweepAxis::tau) {
        s.tau = *value;
        label += " (tau=" + detail::format_value(*value) + ")";
      }
      for (const auto& ds : datasets) cells.push_back(Cell{ds.name, name, label, s});
    }
  }
  return cells;
}

inline BenchmarkOutcome run_benchmark(const BenchmarkConfig& cfg, const std::vector<Dataset>& datasets,
                                      const BackendFactory& backends) {
  if (datasets.empty()) throw InvalidArgument("run_benchmark: no datasets");
  ResultsStore store(cfg.results_dir);
  BenchmarkOutcome outcome;
  outcome.report.ks = cfg.ks;
  outcome.report.with_flops = cfg.flops.has_value();
  std::mutex mu;

  for (const auto& cell : expand_cells(cfg, datasets)) {
    const Dataset& ds = *std::find_if(datasets.begin(), datasets.end(),
                                      [&](const Dataset& d) { return d.name == cell.dataset; });
    std::vector<std::optional<RunResult>> results(ds.questions.size());
    std::size_t failed = 0;
    detail::parallel_for(ds.questions.size(), cfg.concurrency, [&](std::size_t i) {
      const Question& q = ds.questions[i];
      const auto f = store.file(ds.name, cell.method, cell.search, q.id);
      if (auto prior = store.load(f)) {
        std::lock_guard lock(mu);
        results[i] = std::move(prior);
        ++outcome.reused;
        return;
      }
      try {
        auto b = backends(ds, q, cell.search);
        auto r = run_search(q, cell.search, *b.generator, *b.reward, EngineOptions{cfg.max_inflight});
        store.store(f, r);
        std::lock_guard lock(mu);
        results[i] = std::move(r);
        ++outcome.executed;
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        ++failed;
        outcome.failures.push_back(CellFailure{cell.dataset, cell.label, q.id, e.what()});
      }
    });

    std::vector<RunResult> done;
    std::map<std::string, std::string> gold;
    for (std::size_t i = 0; i < results.size(); ++i) {
      gold[ds.questions[i].id] = ds.questions[i].gold_answer;
      if (results[i]) done.push_back(std::move(*results[i]));
    }
    ReportRow row = compute_metrics(done, gold, cfg.ks, cell.search.n, cell.search.cca_enabled, cfg.flops);
    row.dataset = cell.dataset;
    row.method = cell.method;
    row.label = cell.label;
    row.n = cell.search.n;
    row.m = cell.search.m;
    row.tau = cell.search.tau;
    row.failed = failed;
    outcome.report.rows.push_back(std::move(row));
  }
  // Failures recorded under concurrency arrive in completion order.
  std::stable_sort(outcome.failures.begin(), outcome.failures.end(), [](const CellFailure& a, const CellFailure& b) {
    return std::tie(a.dataset, a.label, a.question_id) < std::tie(b.dataset, b.label, b.question_id);
  });
  return outcome;
}

/// Loads every configured dataset.
inline std::vector<Dataset> load_datasets(const BenchmarkConfig& cfg) {
  std::vector<Dataset> out;
  for (const auto& p : cfg.datasets) {
    out.push_back(load_dataset(p));
    for (std::size_t i = 0; i + 1 < out.size(); ++i) {
      if (out[i].name == out.back().name) throw ConfigError("datasets", "two datasets named " + out.back().name);
    }
  }
  return out;
}

}  // namespace srca
