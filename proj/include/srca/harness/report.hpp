#pragma once

/**
 * Per-cell metrics and report rendering. Everything here is a pure function
 * of stored RunResults, so a report can be rebuilt from the results store.
 */

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "srca/core/answer.hpp"
#include "srca/core/types.hpp"
#include "srca/oracle.hpp"

namespace srca {

/// Pass@k column: an explicit k, or "N" for the cell's sampling budget.
struct PassK {
  std::string label;
  std::optional<std::size_t> k;  // empty means N

  std::size_t resolve(std::size_t n) const { return k.value_or(n); }
  friend bool operator==(const PassK&, const PassK&) = default;
};

inline std::vector<PassK> default_ks() { return {{"1", 1}, {"4", 4}, {"16", 16}, {"N", std::nullopt}}; }

/// Per-model parameter counts for the optional FLOPs estimate.
struct FlopsModel {
  double generator_params = 0.0;
  double reward_params = 0.0;
};

struct ReportRow {
  std::string dataset;
  std::string method;
  std::string label;  // method plus sweep value, used as the markdown row name
  std::size_t n = 0;
  std::size_t m = 0;
  double tau = 1.0;
  std::size_t questions = 0;  // results aggregated
  std::size_t failed = 0;     // questions without a result
  double accuracy = 0.0;
  std::vector<double> pass_full;     // aligned with Report::ks
  std::vector<double> pass_natural;
  std::optional<double> car;         // CCA methods only
  double mean_depth = 0.0;
  double mean_generated_tokens = 0.0;
  double mean_scored_tokens = 0.0;
  std::uint64_t generator_calls = 0;
  std::uint64_t reward_calls = 0;
  std::optional<double> flops;       // mean per question

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct Report {
  std::vector<PassK> ks = default_ks();
  bool with_flops = false;
  std::vector<ReportRow> rows;

  friend bool operator==(const Report&, const Report&) = default;
};

namespace detail {

inline bool pass_clamped(std::span<const Candidate> pool, const std::string& gold, std::size_t k) {
  if (pool.empty()) return false;
  return oracle::pass_at_k(pool, gold, std::min(k, pool.size()));
}

}  // namespace detail

/**
 * Aggregates one cell. `gold` maps question ids to raw gold answers; `n` is
 * the cell's budget (for the "N" pass@k column). k beyond a pool's size is
 * clamped to the pool size.
 */
inline ReportRow compute_metrics(std::span<const RunResult> results, const std::map<std::string, std::string>& gold,
                                 std::span<const PassK> ks, std::size_t n, bool cca,
                                 const std::optional<FlopsModel>& flops = std::nullopt) {
  ReportRow row;
  row.questions = results.size();
  row.pass_full.assign(ks.size(), 0.0);
  row.pass_natural.assign(ks.size(), 0.0);
  if (results.empty()) return row;

  std::size_t correct = 0, from_checkpoint = 0;
  std::uint64_t depth = 0, generated = 0, scored = 0;
  std::vector<std::size_t> full(ks.size(), 0), natural(ks.size(), 0);
  for (const auto& r : results) {
    auto it = gold.find(r.question_id);
    if (it == gold.end()) throw InvalidArgument("compute_metrics: no gold answer for question " + r.question_id);
    if (answers_equal(r.selection.answer, it->second)) ++correct;
    if (r.selection.from_checkpoint) ++from_checkpoint;
    const auto nat = oracle::natural_only(r.pool);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const std::size_t k = ks[i].resolve(n);
      if (detail::pass_clamped(r.pool, it->second, k)) ++full[i];
      if (detail::pass_clamped(nat, it->second, k)) ++natural[i];
    }
    depth += r.depth();
    generated += r.accounting.generated_tokens;
    scored += r.accounting.scored_tokens;
    row.generator_calls += r.accounting.generator_calls;
    row.reward_calls += r.accounting.reward_calls;
  }
  const double total = static_cast<double>(results.size());
  row.accuracy = static_cast<double>(correct) / total;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    row.pass_full[i] = static_cast<double>(full[i]) / total;
    row.pass_natural[i] = static_cast<double>(natural[i]) / total;
  }
  if (cca) row.car = static_cast<double>(from_checkpoint) / total;
  row.mean_depth = static_cast<double>(depth) / total;
  row.mean_generated_tokens = static_cast<double>(generated) / total;
  row.mean_scored_tokens = static_cast<double>(scored) / total;
  if (flops) {
    row.flops = (2.0 * flops->generator_params * static_cast<double>(generated) +
                 2.0 * flops->reward_params * static_cast<double>(scored)) /
                total;
  }
  return row;
}

namespace detail {

inline std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

inline std::string render_csv(const Report& report) {
  std::ostringstream out;
  out << "dataset,method,N,M,tau,questions,failed,accuracy";
  for (const auto& k : report.ks) out << ",pass@" << k.label;
  for (const auto& k : report.ks) out << ",natural_pass@" << k.label;
  out << ",car,mean_depth,mean_generated_tokens,mean_scored_tokens,generator_calls,reward_calls";
  if (report.with_flops) out << ",flops_estimate";
  out << '\n';
  for (const auto& r : report.rows) {
    out << detail::csv_text(r.dataset) << ',' << detail::csv_text(r.method) << ',' << r.n << ',' << r.m << ','
        << detail::fixed4(r.tau) << ',' << r.questions << ',' << r.failed << ',' << detail::fixed4(r.accuracy);
    for (double v : r.pass_full) out << ',' << detail::fixed4(v);
    for (double v : r.pass_natural) out << ',' << detail::fixed4(v);
    out << ',' << (r.car ? detail::fixed4(*r.car) : std::string());
    out << ',' << detail::fixed4(r.mean_depth) << ',' << detail::fixed4(r.mean_generated_tokens) << ','
        << detail::fixed4(r.mean_scored_tokens) << ',' << r.generator_calls << ',' << r.reward_calls;
    if (report.with_flops) out << ',' << (r.flops ? detail::fixed4(*r.flops) : std::string());
    out << '\n';
  }
  return out.str();
}

/// Accuracy table: one row per method label, one column per dataset.
inline std::string render_markdown(const Report& report) {
  std::vector<std::string> labels, datasets;
  std::map<std::pair<std::string, std::string>, const ReportRow*> cell;
  for (const auto& r : report.rows) {
    if (std::find(labels.begin(), labels.end(), r.label) == labels.end()) labels.push_back(r.label);
    if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) datasets.push_back(r.dataset);
    cell[{r.label, r.dataset}] = &r;
  }
  std::ostringstream out;
  out << "| Method |";
  for (const auto& d : datasets) out << ' ' << d << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < datasets.size(); ++i) out << "---:|";
  out << '\n';
  for (const auto& l : labels) {
    out << "| " << l << " |";
    for (const auto& d : datasets) {
      auto it = cell.find({l, d});
      if (it == cell.end()) {
        out << "  |";
        continue;
      }
      out << ' ' << detail::fixed4(it->second->accuracy) << (it->second->failed > 0 ? " (failed)" : "") << " |";
    }
    out << '\n';
  }
  return out.str();
}

enum class ReportFormat { csv, markdown };

/// Writes via a temporary file and rename.
inline void write_file_atomic(const std::filesystem::path& file, const std::string& content) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  auto tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw Error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, file);
}

inline void emit_report(const Report& report, ReportFormat format, const std::filesystem::path& file) {
  if (report.rows.empty()) throw InvalidArgument("emit_report: empty report");
  write_file_atomic(file, format == ReportFormat::csv ? render_csv(report) : render_markdown(report));
}

}  // namespace srca
