#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "srca/core/answer.hpp"
#include "srca/core/types.hpp"

namespace srca {

/// Collapses a per-step score sequence into one path score.
inline double reduce_scores(std::span<const double> seq, Reduction mode) {
  if (seq.empty()) throw InvalidArgument("cannot reduce an unscored path");
  switch (mode) {
    case Reduction::last:
      return seq.back();
    case Reduction::mean:
      return std::accumulate(seq.begin(), seq.end(), 0.0) / static_cast<double>(seq.size());
    case Reduction::min:
      return *std::min_element(seq.begin(), seq.end());
    case Reduction::sum:
      return std::accumulate(seq.begin(), seq.end(), 0.0);
    case Reduction::prod:
      return std::accumulate(seq.begin(), seq.end(), 1.0, std::multiplies<>());
  }
  throw InvalidArgument("unknown reduction");
}

/**
 * Splits text at every delimiter occurrence. Each step keeps its leading
 * delimiter; text before the first delimiter is step 0 when non-empty.
 * Concatenating the step texts gives back the input exactly. When two
 * delimiters match at the same position the longer one wins.
 */
inline std::vector<Step> split_into_steps(std::string_view text,
                                          std::span<const std::string> delimiters) {
  if (delimiters.empty()) throw InvalidArgument("at least one step delimiter is required");
  std::vector<std::size_t> cuts;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t best = std::string_view::npos;
    std::size_t best_len = 0;
    for (const auto& d : delimiters) {
      if (d.empty()) continue;
      auto at = text.find(d, pos);
      if (at == std::string_view::npos) continue;
      if (at < best || (at == best && d.size() > best_len)) {
        best = at;
        best_len = d.size();
      }
    }
    if (best == std::string_view::npos) break;
    cuts.push_back(best);
    pos = best + best_len;
  }

  std::vector<Step> steps;
  auto emit = [&](std::size_t from, std::size_t to) {
    if (to > from) steps.push_back(Step{steps.size(), std::string(text.substr(from, to - from))});
  };
  std::size_t start = 0;
  for (std::size_t c : cuts) {
    emit(start, c);
    start = c;
  }
  emit(start, text.size());
  return steps;
}

inline std::string join_steps(std::span<const Step> steps) {
  std::string out;
  for (const auto& s : steps) out += s.text;
  return out;
}

inline std::vector<std::string> step_texts(std::span<const Step> steps) {
  std::vector<std::string> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.text);
  return out;
}

/**
 * Augmented candidate: the path through `answer.step_index`, then the
 * injection template, then the raw forced answer. Pure concatenation.
 * final_score is left unset for the caller to fill in.
 */
inline Candidate build_checkpoint_candidate(const ReasoningPath& path, std::string_view tmpl,
                                            const CheckpointAnswer& answer) {
  if (path.steps.empty() || answer.step_index >= path.steps.size()) {
    throw InvalidArgument("checkpoint step index out of range");
  }
  Candidate c;
  c.full_text = path.text_through(answer.step_index);
  c.full_text.append(tmpl);
  c.full_text.append(answer.raw_text);
  c.raw_answer = answer.raw_text;
  c.answer = normalize_answer(answer.raw_text);
  c.checkpoint_step = answer.step_index;

  c.path = path;
  const std::size_t keep = answer.step_index + 1;
  c.path.steps.resize(keep);
  if (c.path.score_sequence.size() > keep) c.path.score_sequence.resize(keep);
  if (c.path.lineage.size() > keep) c.path.lineage.resize(keep);
  std::erase_if(c.path.checkpoints,
                [&](const CheckpointAnswer& a) { return a.step_index > answer.step_index; });
  return c;
}

/// The prompt sent ahead of any path text.
inline std::string render_prompt(const SearchConfig& cfg, const Question& q) {
  std::string out = cfg.prompt_template;
  constexpr std::string_view key = "{question}";
  if (auto pos = out.find(key); pos != std::string::npos) out.replace(pos, key.size(), q.text);
  return out;
}

/// Rough token count (whitespace-separated words), used for accounting only.
inline std::uint64_t approx_tokens(std::string_view text) {
  std::uint64_t n = 0;
  bool in_word = false;
  for (char c : text) {
    bool space = detail::is_space(c);
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

}  // namespace srca
