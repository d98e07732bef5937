#pragma once

/**
 * Brute-force references used by the property and acceptance suites.
 *
 * reference_acs_select is a straight loop-by-loop ACS and shares no code
 * with strategies/acs.hpp: clusters are built with pairwise answers_equal,
 * sorted by selection, and argmax is a plain scan. Ties follow the engine's
 * documented rules.
 */

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "srca/backends/scripted_world.hpp"
#include "srca/core/answer.hpp"
#include "srca/core/types.hpp"

namespace srca::oracle {

struct EnumeratedPath {
  std::string text;
  double probability = 1.0;
  std::vector<double> rewards;
  std::string leaf_answer;
};

/// Every root-to-leaf path with its probability under normalized branch weights.
inline std::vector<EnumeratedPath> enumerate_all_paths(const ScriptedWorld& world) {
  std::vector<EnumeratedPath> out;
  std::vector<bool> visited(world.nodes().size(), false);

  struct Frame {
    std::size_t node;
    EnumeratedPath partial;
  };
  std::vector<Frame> stack{{ScriptedWorld::kRoot, {}}};
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    if (visited.at(f.node)) throw InvalidArgument("enumerate_all_paths: world is not a tree");
    visited[f.node] = true;
    const WorldNode& n = world.node(f.node);
    if (n.children.empty()) {
      f.partial.leaf_answer = n.final_answer.value_or("");
      out.push_back(std::move(f.partial));
      continue;
    }
    double total = 0.0;
    for (auto c : n.children) total += world.node(c).weight;
    // Push in reverse so paths come out in child order.
    for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) {
      const WorldNode& child = world.node(*it);
      Frame next{*it, f.partial};
      next.partial.text += child.step;
      next.partial.probability *= child.weight / total;
      next.partial.rewards.push_back(child.reward);
      stack.push_back(std::move(next));
    }
  }
  return out;
}

/// Literal ACS: cluster, sum, sort, then round-robin argmax removal.
inline std::vector<std::size_t> reference_acs_select(std::span<const std::string> answers,
                                                     std::span<const double> scores, std::size_t m) {
  const std::size_t n = answers.size();
  if (scores.size() != n) throw InvalidArgument("reference_acs_select: length mismatch");
  if (m > n) throw InvalidArgument("reference_acs_select: M exceeds candidate count");

  // G = {C_1..C_k}, C_i = {j | a_j = a_i}
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t j = 0; j < n; ++j) {
    bool placed = false;
    for (auto& g : groups) {
      if (answers_equal(answers[g.front()], answers[j])) {
        g.push_back(j);
        placed = true;
        break;
      }
    }
    if (!placed) groups.push_back({j});
  }

  // S_i = sum over C_i of s_j
  std::vector<double> sums;
  for (const auto& g : groups) {
    double s = 0.0;
    for (auto j : g) s += scores[j];
    sums.push_back(s);
  }

  auto best_score = [&](std::size_t gi) {
    double b = -INFINITY;
    for (auto j : groups[gi]) b = b < scores[j] ? scores[j] : b;
    return b;
  };
  auto before = [&](std::size_t a, std::size_t b) {
    if (sums[a] != sums[b]) return sums[a] > sums[b];
    if (best_score(a) != best_score(b)) return best_score(a) > best_score(b);
    return groups[a].front() < groups[b].front();
  };

  // Sort clusters: selection sort on the ordering rule.
  std::vector<std::size_t> order;
  std::vector<bool> used(groups.size(), false);
  for (std::size_t r = 0; r < groups.size(); ++r) {
    std::size_t pick = groups.size();
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (used[g]) continue;
      if (pick == groups.size() || before(g, pick)) pick = g;
    }
    used[pick] = true;
    order.push_back(pick);
  }

  // Round-robin: while |P| < M, for C_i in G: j* = argmax s_j; P += j*; C_i -= j*.
  std::vector<std::vector<std::size_t>> remaining;
  for (auto g : order) remaining.push_back(groups[g]);
  std::vector<std::size_t> picked;
  while (picked.size() < m) {
    for (auto& c : remaining) {
      if (c.empty()) continue;
      std::size_t at = 0;
      for (std::size_t x = 1; x < c.size(); ++x) {
        if (scores[c[x]] > scores[c[at]] || (scores[c[x]] == scores[c[at]] && c[x] < c[at])) at = x;
      }
      picked.push_back(c[at]);
      c.erase(c.begin() + static_cast<std::ptrdiff_t>(at));
      if (picked.size() == m) break;
    }
  }
  return picked;
}

/// True iff one of the first k pool candidates answers `gold`.
inline bool pass_at_k(std::span<const Candidate> pool, std::string_view gold, std::size_t k) {
  if (k < 1 || k > pool.size()) throw InvalidArgument("pass_at_k: k outside [1, pool size]");
  const std::string want = normalize_answer(gold);
  for (std::size_t i = 0; i < k; ++i) {
    if (normalize_answer(pool[i].answer) == want) return true;
  }
  return false;
}

/// Natural completions only, in pool order.
inline std::vector<Candidate> natural_only(std::span<const Candidate> pool) {
  std::vector<Candidate> out;
  for (const auto& c : pool) {
    if (!c.from_checkpoint()) out.push_back(c);
  }
  return out;
}

}  // namespace srca::oracle
