#pragma once

/**
 * JSON form of run results. Output is deterministic (object keys sorted,
 * shortest round-trip doubles), so identical runs produce identical bytes.
 */

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "srca/core/config.hpp"
#include "srca/core/types.hpp"

namespace srca {

using nlohmann::json;

namespace detail {

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

}  // namespace detail

inline void to_json(json& j, const CheckpointAnswer& a) {
  j = json{{"step_index", a.step_index},
           {"raw_text", a.raw_text},
           {"normalized", a.normalized},
           {"candidate_score", detail::optional_json(a.candidate_score)}};
}

inline void from_json(const json& j, CheckpointAnswer& a) {
  a.step_index = j.at("step_index").get<std::size_t>();
  a.raw_text = j.at("raw_text").get<std::string>();
  a.normalized = j.at("normalized").get<std::string>();
  a.candidate_score = detail::optional_from<double>(j.value("candidate_score", json(nullptr)));
}

inline void to_json(json& j, const ReasoningPath& p) {
  json steps = json::array();
  for (const auto& s : p.steps) steps.push_back(s.text);
  json lineage = json::array();
  for (const auto& l : p.lineage) lineage.push_back({l.step_index, l.parent_index, l.sample_index});
  j = json{{"question_id", p.question_id},
           {"status", to_string(p.status())},
           {"steps", steps},
           {"score_sequence", p.score_sequence},
           {"lineage", lineage},
           {"checkpoints", p.checkpoints}};
}

inline void from_json(const json& j, ReasoningPath& p) {
  p = ReasoningPath{};
  p.question_id = j.at("question_id").get<std::string>();
  for (const auto& s : j.at("steps")) p.steps.push_back(Step{p.steps.size(), s.get<std::string>()});
  p.score_sequence = j.at("score_sequence").get<std::vector<double>>();
  for (const auto& l : j.at("lineage")) {
    p.lineage.push_back(LineageEntry{l.at(0).get<std::size_t>(), l.at(1).get<std::size_t>(),
                                     l.at(2).get<std::size_t>()});
  }
  p.checkpoints = j.at("checkpoints").get<std::vector<CheckpointAnswer>>();
  p.restore_status(parse_status(j.at("status").get<std::string>()));
}

inline void to_json(json& j, const Candidate& c) {
  j = json{{"full_text", c.full_text},
           {"raw_answer", c.raw_answer},
           {"answer", c.answer},
           {"final_score", detail::optional_json(c.final_score)},
           {"origin", c.from_checkpoint() ? "checkpoint" : "natural"},
           {"checkpoint_step", detail::optional_json(c.checkpoint_step)},
           {"source", {{"round", c.source.round}, {"index", c.source.index}}},
           {"step_scores", c.step_scores},
           {"path", c.path}};
}

inline void from_json(const json& j, Candidate& c) {
  c.full_text = j.at("full_text").get<std::string>();
  c.raw_answer = j.at("raw_answer").get<std::string>();
  c.answer = j.at("answer").get<std::string>();
  c.final_score = detail::optional_from<double>(j.at("final_score"));
  c.checkpoint_step = detail::optional_from<std::size_t>(j.at("checkpoint_step"));
  const auto origin = j.at("origin").get<std::string>();
  if ((origin == "checkpoint") != c.checkpoint_step.has_value()) {
    throw LoadError("candidate origin disagrees with checkpoint_step");
  }
  c.source = SourceRef{j.at("source").at("round").get<std::size_t>(), j.at("source").at("index").get<std::size_t>()};
  c.step_scores = j.at("step_scores").get<std::vector<double>>();
  c.path = j.at("path").get<ReasoningPath>();
}

inline void to_json(json& j, const RoundRecord& r) {
  j = json{{"step_index", r.step_index}, {"parents", r.parents},   {"candidates", r.candidates},
           {"finished", r.finished},     {"clusters", r.clusters}, {"selected", r.selected},
           {"early_stopped", r.early_stopped}};
}

inline void from_json(const json& j, RoundRecord& r) {
  r.step_index = j.at("step_index").get<std::size_t>();
  r.parents = j.at("parents").get<std::size_t>();
  r.candidates = j.at("candidates").get<std::size_t>();
  r.finished = j.at("finished").get<std::size_t>();
  r.clusters = j.at("clusters").get<std::size_t>();
  r.selected = j.at("selected").get<std::vector<std::size_t>>();
  r.early_stopped = j.at("early_stopped").get<bool>();
}

inline void to_json(json& j, const Accounting& a) {
  j = json{{"generated_tokens", a.generated_tokens},
           {"scored_tokens", a.scored_tokens},
           {"generator_calls", a.generator_calls},
           {"reward_calls", a.reward_calls}};
}

inline void from_json(const json& j, Accounting& a) {
  a.generated_tokens = j.at("generated_tokens").get<std::uint64_t>();
  a.scored_tokens = j.at("scored_tokens").get<std::uint64_t>();
  a.generator_calls = j.at("generator_calls").get<std::uint64_t>();
  a.reward_calls = j.at("reward_calls").get<std::uint64_t>();
}

inline void to_json(json& j, const Selection& s) {
  j = json{{"answer", s.answer},
           {"winner", s.winner},
           {"method", to_string(s.method)},
           {"from_checkpoint", s.from_checkpoint}};
}

inline void from_json(const json& j, Selection& s) {
  s.answer = j.at("answer").get<std::string>();
  s.winner = j.at("winner").get<std::size_t>();
  s.method = parse_selector(j.at("method").get<std::string>());
  s.from_checkpoint = j.at("from_checkpoint").get<bool>();
}

inline void to_json(json& j, const RunResult& r) {
  j = json{{"question_id", r.question_id},
           {"pool", r.pool},
           {"selection", r.selection},
           {"rounds", r.rounds},
           {"depth", r.depth()},
           {"accounting", r.accounting}};
}

inline void from_json(const json& j, RunResult& r) {
  r.question_id = j.at("question_id").get<std::string>();
  r.pool = j.at("pool").get<std::vector<Candidate>>();
  r.selection = j.at("selection").get<Selection>();
  r.rounds = j.at("rounds").get<std::vector<RoundRecord>>();
  r.accounting = j.at("accounting").get<Accounting>();
  if (r.selection.winner >= r.pool.size()) throw LoadError("selection winner outside the pool");
}

inline std::string dump_run(const RunResult& r) { return json(r).dump(2) + "\n"; }

inline RunResult load_run(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError("cannot open " + file.string());
  try {
    return json::parse(in).get<RunResult>();
  } catch (const json::exception& e) {
    throw LoadError(file.string() + ": " + e.what());
  }
}

/**
 * Search transcript: everything that describes what was explored and chosen,
 * without backend accounting or cluster counts. Two strategies that made the
 * same decisions on the same backend stream have equal transcripts.
 */
inline std::string transcript(const RunResult& r) {
  json j = r;
  j.erase("accounting");
  for (auto& round : j["rounds"]) round.erase("clusters");
  return j.dump();
}

}  // namespace srca
