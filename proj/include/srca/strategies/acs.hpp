#pragma once

/**
 * Answer-Clustered Search selection.
 *
 * cluster_by_answer groups candidate indices by checkpoint answer and ranks
 * the groups by summed member score. round_robin_select then walks the ranked
 * groups repeatedly, each time taking the best remaining member of every
 * group it visits, until M indices are chosen. The first pass therefore keeps
 * one path from each of the top min(M, k) answers.
 *
 * Ordering rules (total, so selection is reproducible):
 *   clusters: aggregate desc, best member score desc, lowest member index
 *   members:  score desc, lowest index
 */

#include <algorithm>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "srca/core/answer.hpp"
#include "srca/core/types.hpp"

namespace srca {

inline std::vector<Cluster> cluster_by_answer(std::span<const std::string> answers,
                                              std::span<const double> scores) {
  if (answers.size() != scores.size()) throw InvalidArgument("cluster_by_answer: length mismatch");
  if (answers.empty()) throw InvalidArgument("cluster_by_answer: no candidates");

  std::vector<Cluster> clusters;
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t j = 0; j < answers.size(); ++j) {
    std::string key = normalize_answer(answers[j]);
    auto [it, fresh] = slot.try_emplace(key, clusters.size());
    if (fresh) clusters.push_back(Cluster{std::move(key), {}, 0.0});
    Cluster& c = clusters[it->second];
    c.members.push_back(j);
    c.aggregate += scores[j];
  }

  auto best_member = [&](const Cluster& c) {
    double best = scores[c.members.front()];
    for (auto j : c.members) best = std::max(best, scores[j]);
    return best;
  };
  std::stable_sort(clusters.begin(), clusters.end(), [&](const Cluster& a, const Cluster& b) {
    if (a.aggregate != b.aggregate) return a.aggregate > b.aggregate;
    const double ba = best_member(a), bb = best_member(b);
    if (ba != bb) return ba > bb;
    return a.members.front() < b.members.front();
  });
  return clusters;
}

inline std::vector<std::size_t> round_robin_select(std::span<const Cluster> clusters,
                                                   std::span<const double> scores, std::size_t m) {
  std::size_t total = 0;
  for (const auto& c : clusters) total += c.members.size();
  if (total < m) throw InvalidArgument("round_robin_select: fewer candidates than beam width");

  // Each cluster's members, best first.
  std::vector<std::vector<std::size_t>> queues;
  queues.reserve(clusters.size());
  for (const auto& c : clusters) {
    auto q = c.members;
    std::stable_sort(q.begin(), q.end(), [&](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return a < b;
    });
    queues.push_back(std::move(q));
  }

  std::vector<std::size_t> picked;
  picked.reserve(m);
  std::vector<std::size_t> cursor(queues.size(), 0);
  while (picked.size() < m) {
    for (std::size_t i = 0; i < queues.size() && picked.size() < m; ++i) {
      if (cursor[i] < queues[i].size()) picked.push_back(queues[i][cursor[i]++]);
    }
  }
  return picked;
}

/// Top-m indices by score desc, lowest index on ties.
inline std::vector<std::size_t> top_m(std::span<const double> scores, std::size_t m) {
  std::vector<std::size_t> idx(scores.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  idx.resize(std::min(m, idx.size()));
  return idx;
}

}  // namespace srca
