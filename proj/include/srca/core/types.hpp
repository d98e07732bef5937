#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "srca/error.hpp"

namespace srca {

struct Question {
  std::string id;
  std::string text;
  std::string gold_answer;
};

/// One logical reasoning unit. `text` carries its leading delimiter.
struct Step {
  std::size_t index = 0;
  std::string text;

  friend bool operator==(const Step&, const Step&) = default;
};

enum class PathStatus { active, finished_natural, pruned };

/// Where a step came from: the round's parent slot and the sample index under it.
struct LineageEntry {
  std::size_t step_index = 0;
  std::size_t parent_index = 0;
  std::size_t sample_index = 0;

  friend bool operator==(const LineageEntry&, const LineageEntry&) = default;
};

/// Forced intermediate answer recorded after step `step_index`.
struct CheckpointAnswer {
  std::size_t step_index = 0;
  std::string raw_text;
  std::string normalized;
  /// Score of the augmented candidate built from this answer, when one was built.
  std::optional<double> candidate_score;

  friend bool operator==(const CheckpointAnswer&, const CheckpointAnswer&) = default;
};

class ReasoningPath {
 public:
  std::string question_id;
  std::vector<Step> steps;
  std::vector<double> score_sequence;
  std::vector<LineageEntry> lineage;
  std::vector<CheckpointAnswer> checkpoints;

  PathStatus status() const noexcept { return status_; }

  /// Concatenation of all step texts.
  std::string text() const {
    std::string out;
    for (const auto& s : steps) out += s.text;
    return out;
  }

  /// Text of steps [0, last_step].
  std::string text_through(std::size_t last_step) const {
    std::string out;
    for (std::size_t i = 0; i <= last_step && i < steps.size(); ++i) out += steps[i].text;
    return out;
  }

  void append(std::string step_text, LineageEntry origin) {
    if (status_ != PathStatus::active) throw InvalidArgument("cannot extend a terminal path");
    if (step_text.empty()) throw InvalidArgument("step text must be non-empty");
    steps.push_back(Step{steps.size(), std::move(step_text)});
    lineage.push_back(origin);
  }

  void set_scores(std::vector<double> scores) {
    if (scores.size() > steps.size()) throw InvalidArgument("more scores than steps");
    for (double s : scores) {
      if (!(s >= 0.0 && s <= 1.0)) throw InvalidArgument("step score outside [0, 1]");
    }
    score_sequence = std::move(scores);
  }

  void finish() { transition(PathStatus::finished_natural); }
  void prune() { transition(PathStatus::pruned); }

  /// Used when reloading stored results.
  void restore_status(PathStatus s) noexcept { status_ = s; }

  friend bool operator==(const ReasoningPath&, const ReasoningPath&) = default;

 private:
  void transition(PathStatus to) {
    if (status_ != PathStatus::active) throw InvalidArgument("terminal path status is final");
    status_ = to;
  }

  PathStatus status_ = PathStatus::active;
};

/// Position of a candidate in the search: round it was produced in and its
/// index among that round's candidates.
struct SourceRef {
  std::size_t round = 0;
  std::size_t index = 0;

  friend bool operator==(const SourceRef&, const SourceRef&) = default;
};

/// A complete, answer-bearing path in the final decision pool.
struct Candidate {
  std::string full_text;
  std::string raw_answer;
  std::string answer;  // normalized
  std::optional<double> final_score;
  /// Set iff the candidate was built from a checkpoint answer at this step.
  std::optional<std::size_t> checkpoint_step;
  SourceRef source;
  /// Snapshot of the path the candidate was built from (truncated for checkpoints).
  ReasoningPath path;
  /// Per-step scores of full_text as returned by the reward model.
  std::vector<double> step_scores;

  bool from_checkpoint() const noexcept { return checkpoint_step.has_value(); }

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct Cluster {
  std::string answer_key;
  std::vector<std::size_t> members;
  double aggregate = 0.0;

  friend bool operator==(const Cluster&, const Cluster&) = default;
};

enum class Reduction { last, mean, min, sum, prod };
enum class Strategy { greedy, independent, beam, dvts, srca };
enum class Selector { bon, weighted_bon, majority };

struct SearchConfig {
  std::size_t n = 16;          // total sampling budget per round
  std::size_t m = 4;           // beam width
  std::size_t max_steps = 40;
  double temperature = 0.8;
  double top_p = 0.9;
  double tau = 1.0;            // early stop disabled at 1.0
  Reduction reduction = Reduction::last;
  std::vector<std::string> delimiters{"### Step"};
  std::string injection_template = "So, the answer is ";
  /// Prompt prefix; "{question}" is replaced by the question text.
  std::string prompt_template = "{question}\n";
  Strategy strategy = Strategy::srca;
  Selector selector = Selector::bon;
  bool cca_enabled = true;
  std::uint64_t seed = 0;
  std::size_t step_max_tokens = 512;
  std::size_t checkpoint_max_tokens = 32;

  std::size_t branching() const noexcept { return n / m; }
  bool early_stopping() const noexcept { return tau < 1.0; }

  friend bool operator==(const SearchConfig&, const SearchConfig&) = default;
};

/// One expansion round as recorded in the run diagnostics.
struct RoundRecord {
  std::size_t step_index = 0;      // 0-based depth of the steps produced this round
  std::size_t parents = 0;         // paths expanded
  std::size_t candidates = 0;      // continuations produced
  std::size_t finished = 0;        // of which ended naturally
  std::size_t clusters = 0;        // answer clusters (SRCA only, else 0)
  std::vector<std::size_t> selected;  // candidate indices kept for the next round
  bool early_stopped = false;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

struct Accounting {
  std::uint64_t generated_tokens = 0;
  std::uint64_t scored_tokens = 0;
  std::uint64_t generator_calls = 0;
  std::uint64_t reward_calls = 0;

  friend bool operator==(const Accounting&, const Accounting&) = default;
};

struct Selection {
  std::string answer;
  std::size_t winner = 0;  // index into the pool
  Selector method = Selector::bon;
  bool from_checkpoint = false;

  friend bool operator==(const Selection&, const Selection&) = default;
};

struct RunResult {
  std::string question_id;
  std::vector<Candidate> pool;
  Selection selection;
  std::vector<RoundRecord> rounds;
  Accounting accounting;

  const Candidate& selected() const { return pool.at(selection.winner); }
  std::size_t depth() const noexcept { return rounds.size(); }

  friend bool operator==(const RunResult&, const RunResult&) = default;
};

}  // namespace srca
