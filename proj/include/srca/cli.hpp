#pragma once

/**
 * Command-line front end. Kept in the library so tests can drive it with an
 * argv vector and captured streams.
 *
 *   srca [--config FILE] [--results-dir DIR] [--override K=V]... [--seed S] run
 *   srca [...] sweep --axis n|tau --values V[,V...]
 *   srca inspect RESULT.json
 *
 * Exit codes: 0 success, 1 some cells failed, 2 usage or config error.
 */

#include <chrono>
#include <ctime>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "srca/harness/benchmark.hpp"
#include "srca/serialize.hpp"

namespace srca::cli {

constexpr int kOk = 0;
constexpr int kPartialFailure = 1;
constexpr int kUsageError = 2;

struct GlobalOptions {
  std::string config = "srca.json";
  std::string results_dir;  // overrides harness.results_dir when set
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

namespace detail {

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

inline BenchmarkConfig load(const GlobalOptions& g) {
  auto overrides = g.overrides;
  if (g.seed) overrides.push_back("seed=" + std::to_string(*g.seed));
  if (!g.results_dir.empty()) {
    overrides.push_back("harness.results_dir=" +
                        nlohmann::json(std::filesystem::absolute(g.results_dir).string()).dump());
  }
  return load_benchmark_config(g.config, overrides);
}

inline int execute(const BenchmarkConfig& cfg, std::ostream& out, std::ostream& err) {
  const std::string started = utc_now();
  std::filesystem::create_directories(cfg.results_dir);
  write_file_atomic(cfg.results_dir / "effective_config.json", to_json(cfg).dump(2) + "\n");

  auto datasets = load_datasets(cfg);
  auto outcome = run_benchmark(cfg, datasets, make_backend_factory(cfg.backend));
  const auto csv = cfg.results_dir / "report.csv";
  emit_report(outcome.report, ReportFormat::csv, csv);
  emit_report(outcome.report, ReportFormat::markdown, cfg.results_dir / "report.md");

  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : outcome.failures) {
    failures.push_back({{"dataset", f.dataset}, {"cell", f.label}, {"question_id", f.question_id}, {"error", f.message}});
    err << "failed: " << f.dataset << " / " << f.label << " / " << f.question_id << ": " << f.message << '\n';
  }
  nlohmann::json meta{{"started_at", started},
                      {"finished_at", utc_now()},
                      {"seed", cfg.search.seed},
                      {"config", to_json(cfg)},
                      {"questions_run", outcome.executed},
                      {"questions_reused", outcome.reused},
                      {"failures", failures}};
  write_file_atomic(cfg.results_dir / "run_meta.json", meta.dump(2) + "\n");

  out << csv.string() << '\n';
  return outcome.ok() ? kOk : kPartialFailure;
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsageError;
  } catch (const LoadError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kPartialFailure;
  }
}

inline std::string clip(std::string s, std::size_t width) {
  for (auto& c : s) {
    if (c == '\n' || c == '\t') c = ' ';
  }
  while (!s.empty() && s.back() == ' ') s.pop_back();
  if (s.size() > width) s = s.substr(0, width - 3) + "...";
  return s;
}

inline std::string score_text(std::optional<double> v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

}  // namespace detail

inline int cmd_run(const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] { return detail::execute(detail::load(g), out, err); });
}

inline int cmd_sweep(const GlobalOptions& g, const std::string& axis, const std::vector<double>& values,
                     std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    if (values.empty()) throw ConfigError("--values", "at least one value required");
    if (axis != "n" && axis != "tau") throw ConfigError("--axis", "expected n or tau");
    auto opts = g;
    opts.overrides.push_back("sweep.axis=\"" + axis + "\"");
    opts.overrides.push_back("sweep.values=" + nlohmann::json(values).dump());
    return detail::execute(detail::load(opts), out, err);
  });
}

/**
 * Per-step table of the selected answer's reasoning path. When the winner is
 * a checkpoint candidate, the longest pooled path through the same steps is
 * shown so the natural continuation is visible too.
 */
inline int cmd_inspect(const std::string& path, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    RunResult r = load_run(path);
    const Candidate& win = r.selected();
    const Candidate* shown = &win;
    if (win.from_checkpoint()) {
      const std::string prefix = win.path.text();
      for (const auto& c : r.pool) {
        if (c.path.steps.size() > shown->path.steps.size() && c.path.text().starts_with(prefix)) shown = &c;
      }
    }
    const auto& steps = shown->path.steps;
    out << "question: " << r.question_id << '\n';
    out << "selected: " << (win.answer.empty() ? "(empty)" : win.answer) << "  score "
        << detail::score_text(win.final_score) << "  origin " << (win.from_checkpoint() ? "checkpoint" : "natural")
        << "  method " << to_string(r.selection.method) << "\n\n";
    out << std::left << std::setw(5) << "step" << "  " << std::setw(50) << "text" << "  " << std::setw(10)
        << "step score" << "  " << std::setw(18) << "checkpoint answer" << "  " << std::setw(11) << "final score"
        << "  origin\n";
    for (std::size_t i = 0; i < steps.size(); ++i) {
      std::optional<double> step_score;
      if (i < shown->path.score_sequence.size()) step_score = shown->path.score_sequence[i];
      const CheckpointAnswer* ck = nullptr;
      for (const auto& a : shown->path.checkpoints) {
        if (a.step_index == i) ck = &a;
      }
      const bool last = i + 1 == steps.size();
      std::string answer = ck ? (ck->raw_text.empty() ? "(empty)" : detail::clip(ck->raw_text, 18)) : "";
      std::optional<double> final_score = ck ? ck->candidate_score : std::nullopt;
      std::string origin;
      if (ck && ck->candidate_score) origin = "checkpoint";
      if (last && !shown->from_checkpoint()) {
        answer = detail::clip(shown->raw_answer, 18);
        final_score = shown->final_score;
        origin = "natural";
      }
      if (win.from_checkpoint() && win.checkpoint_step == i) origin += " *";
      if (!win.from_checkpoint() && last && shown == &win) origin += " *";
      out << std::left << std::setw(5) << (i + 1) << "  " << std::setw(50) << detail::clip(steps[i].text, 50) << "  "
          << std::setw(10) << detail::score_text(step_score) << "  " << std::setw(18) << answer << "  "
          << std::setw(11) << detail::score_text(final_score) << "  " << origin << '\n';
    }
    std::size_t natural = 0;
    for (const auto& c : r.pool) natural += c.from_checkpoint() ? 0 : 1;
    out << "\npool: " << r.pool.size() << " candidates (" << natural << " natural, " << r.pool.size() - natural
        << " checkpoint); depth " << r.depth() << "; * marks the selected candidate\n";
    return kOk;
  });
}

/// Parses argv and dispatches. argv[0] is the program name.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Step-level reasoning search with checkpoint answers", "srca"};
  app.require_subcommand(1);
  GlobalOptions g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "benchmark config file (JSON)");
  app.add_option("--results-dir", g.results_dir, "results directory (overrides harness.results_dir)");
  app.add_option("--override", g.overrides, "key=value; bare keys address the search section")->allow_extra_args(false);
  auto* seed_opt = app.add_option("--seed", seed, "random seed");

  auto* run = app.add_subcommand("run", "run every configured method on every dataset")->fallthrough();
  auto* sweep = app.add_subcommand("sweep", "run one cell per value of N or tau")->fallthrough();
  std::string axis;
  std::vector<double> values;
  sweep->add_option("--axis", axis, "n or tau")->required()->check(CLI::IsMember({"n", "tau"}));
  sweep->add_option("--values", values, "comma-separated values")->required()->delimiter(',');
  auto* inspect = app.add_subcommand("inspect", "print the per-step table of a stored run result");
  std::string result_path;
  inspect->add_option("result", result_path, "RunResult JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kUsageError;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  if (*run) return cmd_run(g, out, err);
  if (*sweep) return cmd_sweep(g, axis, values, out, err);
  return cmd_inspect(result_path, out, err);
}

}  // namespace srca::cli
