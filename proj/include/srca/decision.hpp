#pragma once

/**
 * Final answer selection over a candidate pool.
 *
 * Ranking of single candidates (BoN, and the representative path of a
 * winning answer): score desc, natural before checkpoint, lowest pool index.
 */

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "srca/core/answer.hpp"
#include "srca/core/types.hpp"

namespace srca {

namespace detail {

inline void require_non_empty(std::span<const Candidate> pool, const char* who) {
  if (pool.empty()) throw InvalidArgument(std::string(who) + ": empty pool");
}

inline double score_of(const Candidate& c, const char* who) {
  if (!c.final_score) throw InvalidArgument(std::string(who) + ": unscored candidate");
  return *c.final_score;
}

/// True if pool[a] ranks strictly ahead of pool[b] as a single path.
inline bool ranks_ahead(std::span<const Candidate> pool, std::size_t a, std::size_t b, const char* who) {
  const double sa = score_of(pool[a], who), sb = score_of(pool[b], who);
  if (sa != sb) return sa > sb;
  if (pool[a].from_checkpoint() != pool[b].from_checkpoint()) return !pool[a].from_checkpoint();
  return a < b;
}

struct AnswerGroup {
  std::string answer;
  std::vector<std::size_t> members;  // pool indices, ascending
};

inline std::vector<AnswerGroup> group_by_answer(std::span<const Candidate> pool) {
  std::vector<AnswerGroup> groups;
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const std::string key = normalize_answer(pool[i].answer);
    auto [it, fresh] = slot.try_emplace(key, groups.size());
    if (fresh) groups.push_back(AnswerGroup{key, {}});
    groups[it->second].members.push_back(i);
  }
  return groups;
}

inline Selection make_selection(std::span<const Candidate> pool, std::size_t winner, Selector method) {
  return Selection{normalize_answer(pool[winner].answer), winner, method, pool[winner].from_checkpoint()};
}

}  // namespace detail

inline Selection select_bon(std::span<const Candidate> pool) {
  detail::require_non_empty(pool, "select_bon");
  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i) {
    if (detail::ranks_ahead(pool, i, best, "select_bon")) best = i;
  }
  detail::score_of(pool[best], "select_bon");
  return detail::make_selection(pool, best, Selector::bon);
}

/// Answer with the largest score sum wins; its best-ranked member represents it.
inline Selection select_weighted_bon(std::span<const Candidate> pool) {
  detail::require_non_empty(pool, "select_weighted_bon");
  constexpr const char* who = "select_weighted_bon";
  std::size_t best_rep = 0;
  double best_sum = 0.0;
  auto groups = detail::group_by_answer(pool);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    double sum = 0.0;
    std::size_t rep = groups[g].members.front();
    for (auto i : groups[g].members) {
      sum += detail::score_of(pool[i], who);
      if (detail::ranks_ahead(pool, i, rep, who)) rep = i;
    }
    if (g == 0 || sum > best_sum || (sum == best_sum && detail::ranks_ahead(pool, rep, best_rep, who))) {
      best_rep = rep;
      best_sum = sum;
    }
  }
  return detail::make_selection(pool, best_rep, Selector::weighted_bon);
}

/**
 * Most frequent answer; ties go to the answer seen first in the pool. Scores
 * only pick the representative path, and only when every member is scored
 * (otherwise the first occurrence represents the answer).
 */
inline Selection select_majority(std::span<const Candidate> pool) {
  detail::require_non_empty(pool, "select_majority");
  auto groups = detail::group_by_answer(pool);
  std::size_t best = 0;
  for (std::size_t g = 1; g < groups.size(); ++g) {
    if (groups[g].members.size() > groups[best].members.size()) best = g;
  }
  const auto& members = groups[best].members;
  std::size_t rep = members.front();
  bool all_scored = true;
  for (auto i : members) all_scored = all_scored && pool[i].final_score.has_value();
  if (all_scored) {
    for (auto i : members) {
      if (detail::ranks_ahead(pool, i, rep, "select_majority")) rep = i;
    }
  }
  return detail::make_selection(pool, rep, Selector::majority);
}

inline Selection select(std::span<const Candidate> pool, Selector method) {
  switch (method) {
    case Selector::bon: return select_bon(pool);
    case Selector::weighted_bon: return select_weighted_bon(pool);
    case Selector::majority: return select_majority(pool);
  }
  throw InvalidArgument("unknown selector");
}

/**
 * Final decision pool: completed paths first, then checkpoint-augmented
 * candidates when CCA is on. Completed paths include paths force-completed
 * at the step cap, which carry a checkpoint origin.
 */
inline std::vector<Candidate> assemble_pool(std::vector<Candidate> completed,
                                            std::vector<Candidate> checkpoint, bool cca_enabled) {
  if (completed.empty() && (!cca_enabled || checkpoint.empty())) {
    throw InvalidArgument("assemble_pool: no candidates");
  }
  if (cca_enabled) {
    completed.insert(completed.end(), std::make_move_iterator(checkpoint.begin()),
                     std::make_move_iterator(checkpoint.end()));
  }
  return completed;
}

/// Fraction of selections that came from checkpoint-augmented candidates.
inline double checkpoint_answer_rate(std::span<const Selection> selections) {
  if (selections.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : selections) hits += s.from_checkpoint ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(selections.size());
}

}  // namespace srca
