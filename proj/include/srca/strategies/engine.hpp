#pragma once

/**
 * Search strategies over reasoning steps.
 *
 * Tree searches (beam, dvts, srca) share one round loop:
 *
 *   1. expand    every surviving path into N/M continuations
 *                (round 1: N continuations of the empty path; DVTS: N/M per subtree)
 *   2. score     every continuation with the reward model
 *   3. inject    a checkpoint into every unfinished continuation (SRCA, or any CCA run)
 *   4. pool      finished continuations as natural candidates, plus one
 *                checkpoint-augmented candidate per injection when CCA is on
 *   5. stop      early (SRCA, tau < 1) if any pooled candidate scores above tau
 *   6. select    survivors: ACS round robin (srca), top-M (beam), per-subtree argmax (dvts)
 *
 * Finished continuations never re-enter the beam; when fewer unfinished
 * continuations than the current width remain, the width shrinks for the rest
 * of the run. At max_steps the survivors are completed with one checkpoint
 * injection each (already pooled when CCA is on).
 *
 * Request seeds are derived from (cfg.seed, round, slot) where the slot is
 * the parent position (beam, srca), the subtree (dvts) or the path
 * (independent). Within a round all backend calls may run concurrently;
 * results are merged by index.
 */

#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "srca/backends/backend.hpp"
#include "srca/core/config.hpp"
#include "srca/core/ops.hpp"
#include "srca/decision.hpp"
#include "srca/strategies/acs.hpp"

namespace srca {

struct EngineOptions {
  /// Upper bound on backend calls in flight within a round.
  std::size_t max_inflight = 1;
};

namespace detail {

template <class F>
void parallel_for(std::size_t count, std::size_t limit, F&& fn) {
  if (limit <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(limit, count); ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
}

constexpr std::uint64_t kCheckpointStream = 0x636b7074;  // "ckpt"

/// Per-question search state and backend bookkeeping.
class SearchRun {
 public:
  SearchRun(const Question& q, const SearchConfig& cfg, Generator& gen, RewardModel& rew,
            const EngineOptions& opt)
      : q_(q), cfg_(cfg), gen_(gen), rew_(rew), opt_(opt), header_(render_prompt(cfg, q)) {
    validate(cfg_);
    result_.question_id = q.id;
  }

  RunResult run() {
    switch (cfg_.strategy) {
      case Strategy::greedy: run_linear(1, /*greedy=*/true); break;
      case Strategy::independent: run_linear(cfg_.n, /*greedy=*/false); break;
      case Strategy::beam:
      case Strategy::dvts:
      case Strategy::srca: run_tree(); break;
    }
    finish();
    return std::move(result_);
  }

 private:
  /// A continuation produced in the current round.
  struct Node {
    ReasoningPath path;
    std::size_t slot = 0;
    bool finished = false;
    std::optional<std::string> final_answer;
    double score = 0.0;
    std::optional<CheckpointAnswer> checkpoint;
  };

  // -- backend calls --------------------------------------------------------

  std::vector<Continuation> sample(const ReasoningPath& path, std::size_t n, std::uint64_t seed,
                                   const SearchConfig& cfg) {
    auto req = step_request(header_ + path.text() + cfg.delimiters.front(), n, cfg, seed);
    auto out = gen_.sample_continuations(req);
    if (out.size() != n) {
      throw ProtocolError("generator returned " + std::to_string(out.size()) + " continuations, expected " +
                          std::to_string(n));
    }
    generator_calls_.fetch_add(1);
    for (const auto& c : out) generated_tokens_.fetch_add(approx_tokens(c.text));
    return out;
  }

  CheckpointAnswer inject(const ReasoningPath& path, std::uint64_t seed) {
    auto req = checkpoint_request(header_ + path.text() + cfg_.injection_template, cfg_, seed);
    std::string raw = gen_.force_checkpoint_answer(req);
    generator_calls_.fetch_add(1);
    generated_tokens_.fetch_add(approx_tokens(raw));
    CheckpointAnswer a;
    a.step_index = path.steps.size() - 1;
    a.normalized = normalize_answer(raw);
    a.raw_text = std::move(raw);
    return a;
  }

  std::vector<double> score_texts(const std::vector<std::string>& steps) {
    auto scores = rew_.score_steps(q_.text, steps);
    if (scores.size() != steps.size()) throw ProtocolError("reward model returned a misaligned score list");
    reward_calls_.fetch_add(1);
    for (const auto& s : steps) scored_tokens_.fetch_add(approx_tokens(s));
    return scores;
  }

  void score_path(ReasoningPath& path, double& reduced) {
    path.set_scores(score_texts(step_texts(path.steps)));
    reduced = reduce_scores(path.score_sequence, cfg_.reduction);
  }

  void score_candidate(Candidate& c) {
    auto steps = split_into_steps(c.full_text, cfg_.delimiters);
    c.step_scores = score_texts(step_texts(steps));
    for (double& s : c.step_scores) {
      if (!(s >= 0.0 && s <= 1.0)) throw ProtocolError("reward model returned a score outside [0, 1]");
    }
    c.final_score = reduce_scores(c.step_scores, cfg_.reduction);
  }

  // -- candidates -----------------------------------------------------------

  Candidate natural_candidate(const Node& n, SourceRef src) const {
    Candidate c;
    c.full_text = n.path.text();
    c.raw_answer = n.final_answer.value_or(extract_final_answer(c.full_text));
    c.answer = normalize_answer(c.raw_answer);
    c.source = src;
    c.path = n.path;
    c.step_scores = n.path.score_sequence;
    if (!n.path.score_sequence.empty()) c.final_score = n.score;
    return c;
  }

  /// Checkpoint-augmented candidate for `n`, scored; the score is mirrored into the node's checkpoint record.
  Candidate checkpoint_candidate(Node& n, SourceRef src) {
    Candidate c = build_checkpoint_candidate(n.path, cfg_.injection_template, *n.checkpoint);
    c.source = src;
    score_candidate(c);
    n.checkpoint->candidate_score = c.final_score;
    n.path.checkpoints.back().candidate_score = c.final_score;
    c.path.checkpoints.back().candidate_score = c.final_score;
    return c;
  }

  // -- tree searches --------------------------------------------------------

  void run_tree() {
    const bool dvts = cfg_.strategy == Strategy::dvts;
    const bool srca = cfg_.strategy == Strategy::srca;
    const bool inject_all = srca || cfg_.cca_enabled;
    const std::size_t width = cfg_.branching();

    struct Parent {
      ReasoningPath path;
      std::size_t slot;
    };
    std::vector<Parent> parents;
    if (dvts) {
      for (std::size_t s = 0; s < cfg_.m; ++s) parents.push_back(Parent{fresh_path(), s});
    } else {
      parents.push_back(Parent{fresh_path(), 0});
    }
    std::size_t beam = cfg_.m;

    for (std::size_t round = 1; round <= cfg_.max_steps && !parents.empty(); ++round) {
      RoundRecord rec;
      rec.step_index = round - 1;
      rec.parents = parents.size();

      // 1. expand
      const std::size_t per_parent = (round == 1 && !dvts) ? cfg_.n : width;
      std::vector<std::vector<Continuation>> conts(parents.size());
      parallel_for(parents.size(), opt_.max_inflight, [&](std::size_t p) {
        const std::size_t slot = dvts ? parents[p].slot : p;
        conts[p] = sample(parents[p].path, per_parent, mix_seed(cfg_.seed, round, slot), cfg_);
      });
      std::vector<Node> nodes;
      for (std::size_t p = 0; p < parents.size(); ++p) {
        for (std::size_t k = 0; k < conts[p].size(); ++k) {
          Node n;
          n.path = parents[p].path;
          n.path.append(cfg_.delimiters.front() + conts[p][k].text, LineageEntry{round - 1, p, k});
          n.slot = parents[p].slot;
          n.finished = conts[p][k].finished;
          n.final_answer = conts[p][k].final_answer;
          nodes.push_back(std::move(n));
        }
      }
      const std::size_t expected = (round == 1 && !dvts) ? cfg_.n : parents.size() * width;
      if (nodes.size() != expected) throw std::logic_error("budget violation in expansion round");
      rec.candidates = nodes.size();

      // 2-3. score and inject
      parallel_for(nodes.size(), opt_.max_inflight, [&](std::size_t i) {
        Node& n = nodes[i];
        score_path(n.path, n.score);
        if (inject_all && !n.finished) {
          n.checkpoint = inject(n.path, mix_seed(cfg_.seed, round, i, kCheckpointStream));
          n.path.checkpoints.push_back(*n.checkpoint);
        }
      });

      // 4. pool
      std::vector<std::size_t> active;
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].finished) {
          nodes[i].path.finish();
          completed_.push_back(natural_candidate(nodes[i], SourceRef{round - 1, i}));
          ++rec.finished;
        } else {
          active.push_back(i);
        }
      }
      if (cfg_.cca_enabled) {
        std::vector<Candidate> built(active.size());
        parallel_for(active.size(), opt_.max_inflight, [&](std::size_t a) {
          built[a] = checkpoint_candidate(nodes[active[a]], SourceRef{round - 1, active[a]});
        });
        for (auto& c : built) checkpoint_pool_.push_back(std::move(c));
      }

      // 5. early stop
      if (srca && cfg_.early_stopping() && pool_exceeds(cfg_.tau)) {
        rec.early_stopped = true;
        result_.rounds.push_back(std::move(rec));
        return;
      }
      if (active.empty()) {
        result_.rounds.push_back(std::move(rec));
        return;
      }

      // 6. select
      std::vector<std::size_t> chosen;
      if (dvts) {
        for (const auto& parent : parents) {
          std::optional<std::size_t> best;
          for (auto i : active) {
            if (nodes[i].slot != parent.slot) continue;
            if (!best || nodes[i].score > nodes[*best].score) best = i;
          }
          if (best) chosen.push_back(*best);
        }
      } else {
        beam = std::min(beam, active.size());
        std::vector<double> scores;
        for (auto i : active) scores.push_back(nodes[i].score);
        std::vector<std::size_t> picked;
        if (srca) {
          std::vector<std::string> answers;
          for (auto i : active) answers.push_back(nodes[i].checkpoint->normalized);
          auto clusters = cluster_by_answer(answers, scores);
          rec.clusters = clusters.size();
          picked = round_robin_select(clusters, scores, beam);
        } else {
          picked = top_m(scores, beam);
        }
        for (auto a : picked) chosen.push_back(active[a]);
      }
      rec.selected = chosen;
      result_.rounds.push_back(std::move(rec));

      std::vector<bool> keep(nodes.size(), false);
      for (auto i : chosen) keep[i] = true;
      for (auto i : active) {
        if (!keep[i]) nodes[i].path.prune();
      }

      if (round == cfg_.max_steps) {
        force_complete(nodes, chosen, round);
        return;
      }
      std::vector<Parent> next;
      for (auto i : chosen) next.push_back(Parent{nodes[i].path, nodes[i].slot});
      parents = std::move(next);
    }
  }

  /// Step cap reached: each survivor ends with one checkpoint answer.
  void force_complete(std::vector<Node>& nodes, const std::vector<std::size_t>& survivors, std::size_t round) {
    if (cfg_.cca_enabled) return;  // already pooled as checkpoint candidates
    std::vector<Candidate> built(survivors.size());
    parallel_for(survivors.size(), opt_.max_inflight, [&](std::size_t s) {
      Node& n = nodes[survivors[s]];
      if (!n.checkpoint) {
        n.checkpoint = inject(n.path, mix_seed(cfg_.seed, round, survivors[s], kCheckpointStream));
        n.path.checkpoints.push_back(*n.checkpoint);
      }
      built[s] = checkpoint_candidate(n, SourceRef{round - 1, survivors[s]});
    });
    for (auto& c : built) completed_.push_back(std::move(c));
  }

  bool pool_exceeds(double tau) const {
    for (const auto* list : {&completed_, &checkpoint_pool_}) {
      for (const auto& c : *list) {
        if (c.final_score && *c.final_score > tau) return true;
      }
    }
    return false;
  }

  // -- greedy and independent sampling ---------------------------------------

  void run_linear(std::size_t count, bool greedy) {
    SearchConfig cfg = cfg_;
    if (greedy) cfg.temperature = 0.0;

    std::vector<Node> paths(count);
    for (auto& p : paths) p.path = fresh_path();
    std::vector<std::optional<Candidate>> done(count);
    std::vector<std::size_t> active(count);
    for (std::size_t i = 0; i < count; ++i) active[i] = i;

    for (std::size_t round = 1; round <= cfg.max_steps && !active.empty(); ++round) {
      RoundRecord rec;
      rec.step_index = round - 1;
      rec.parents = round == 1 ? 1 : active.size();

      std::vector<Continuation> conts(active.size());
      if (round == 1) {
        conts = sample(paths[0].path, count, mix_seed(cfg.seed, round, 0), cfg);
      } else {
        parallel_for(active.size(), opt_.max_inflight, [&](std::size_t a) {
          conts[a] = sample(paths[active[a]].path, 1, mix_seed(cfg.seed, round, active[a]), cfg).front();
        });
      }
      rec.candidates = conts.size();

      std::vector<std::size_t> still;
      for (std::size_t a = 0; a < active.size(); ++a) {
        Node& n = paths[active[a]];
        const LineageEntry origin = round == 1 ? LineageEntry{0, 0, a} : LineageEntry{round - 1, active[a], 0};
        n.path.append(cfg.delimiters.front() + conts[a].text, origin);
        if (conts[a].finished) {
          n.finished = true;
          n.final_answer = conts[a].final_answer;
          ++rec.finished;
        } else {
          still.push_back(active[a]);
        }
      }
      rec.selected = still;
      result_.rounds.push_back(std::move(rec));
      active = std::move(still);
    }

    // Score completed paths; force-complete whatever hit the step cap.
    parallel_for(count, opt_.max_inflight, [&](std::size_t i) {
      Node& n = paths[i];
      const SourceRef src{n.path.steps.size() - 1, i};
      if (n.finished) {
        if (!greedy) score_path(n.path, n.score);
        n.path.finish();
        done[i] = natural_candidate(n, src);
      } else {
        n.checkpoint = inject(n.path, mix_seed(cfg.seed, n.path.steps.size(), i, kCheckpointStream));
        n.path.checkpoints.push_back(*n.checkpoint);
        if (greedy) {
          Candidate c = build_checkpoint_candidate(n.path, cfg.injection_template, *n.checkpoint);
          c.source = src;
          done[i] = std::move(c);
        } else {
          score_path(n.path, n.score);
          done[i] = checkpoint_candidate(n, src);
        }
      }
    });
    for (auto& c : done) completed_.push_back(std::move(*c));
  }

  // -- wrap-up ---------------------------------------------------------------

  ReasoningPath fresh_path() const {
    ReasoningPath p;
    p.question_id = q_.id;
    return p;
  }

  void finish() {
    result_.pool = assemble_pool(std::move(completed_), std::move(checkpoint_pool_), cfg_.cca_enabled);
    if (cfg_.strategy == Strategy::greedy) {
      const auto& only = result_.pool.front();
      result_.selection = Selection{normalize_answer(only.answer), 0, cfg_.selector, only.from_checkpoint()};
    } else {
      result_.selection = select(result_.pool, cfg_.selector);
    }
    result_.accounting.generated_tokens = generated_tokens_.load();
    result_.accounting.scored_tokens = scored_tokens_.load();
    result_.accounting.generator_calls = generator_calls_.load();
    result_.accounting.reward_calls = reward_calls_.load();
  }

  const Question& q_;
  SearchConfig cfg_;
  Generator& gen_;
  RewardModel& rew_;
  EngineOptions opt_;
  std::string header_;
  RunResult result_;
  std::vector<Candidate> completed_;
  std::vector<Candidate> checkpoint_pool_;
  std::atomic<std::uint64_t> generated_tokens_{0};
  std::atomic<std::uint64_t> scored_tokens_{0};
  std::atomic<std::uint64_t> generator_calls_{0};
  std::atomic<std::uint64_t> reward_calls_{0};
};

inline void require_strategy(const SearchConfig& cfg, Strategy s) {
  if (cfg.strategy != s) {
    throw ConfigError("strategy", "expected " + std::string(to_string(s)) + ", got " +
                                      std::string(to_string(cfg.strategy)));
  }
}

}  // namespace detail

/// Runs whichever strategy cfg.strategy names.
inline RunResult run_search(const Question& q, const SearchConfig& cfg, Generator& gen, RewardModel& rew,
                            const EngineOptions& opt = {}) {
  return detail::SearchRun(q, cfg, gen, rew, opt).run();
}

inline RunResult run_srca(const Question& q, const SearchConfig& cfg, Generator& gen, RewardModel& rew,
                          const EngineOptions& opt = {}) {
  detail::require_strategy(cfg, Strategy::srca);
  return run_search(q, cfg, gen, rew, opt);
}

inline RunResult run_beam_search(const Question& q, const SearchConfig& cfg, Generator& gen,
                                 RewardModel& rew, const EngineOptions& opt = {}) {
  detail::require_strategy(cfg, Strategy::beam);
  return run_search(q, cfg, gen, rew, opt);
}

inline RunResult run_dvts(const Question& q, const SearchConfig& cfg, Generator& gen, RewardModel& rew,
                          const EngineOptions& opt = {}) {
  detail::require_strategy(cfg, Strategy::dvts);
  return run_search(q, cfg, gen, rew, opt);
}

inline RunResult run_independent(const Question& q, const SearchConfig& cfg, Generator& gen,
                                 RewardModel& rew, const EngineOptions& opt = {}) {
  detail::require_strategy(cfg, Strategy::independent);
  return run_search(q, cfg, gen, rew, opt);
}

/// Temperature 0, one path, no reward calls. Accepts any cfg.strategy value.
inline RunResult run_greedy(const Question& q, SearchConfig cfg, Generator& gen, RewardModel& rew,
                            const EngineOptions& opt = {}) {
  cfg.strategy = Strategy::greedy;
  return run_search(q, cfg, gen, rew, opt);
}

}  // namespace srca
