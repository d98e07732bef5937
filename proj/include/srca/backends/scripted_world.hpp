#pragma once

/**
 * Scripted world: a finite weighted reasoning tree standing in for a policy
 * model plus PRM.
 *
 * File schema (one JSON document):
 *
 *   { "gold_answer": "27",
 *     "root": Node }
 *
 *   Node = { "step": text, "weight": number > 0, "reward": [0,1],
 *            "checkpoint_answer": text, "terminal": bool,
 *            "final_answer": text (required on terminal nodes),
 *            "checkpoint_reward": [0,1] (optional, defaults to reward),
 *            "children": [Node] }
 *
 * The root stands for the empty path: its "step" must be "" and its weight,
 * reward and terminal flag are ignored. Every other node's "step" is the full
 * step text including the leading delimiter. Leaves must be terminal.
 *
 * checkpoint_reward is what the scripted PRM gives a path whose last step is
 * this node's step followed by the injection template and an answer.
 */

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "srca/backends/backend.hpp"
#include "srca/core/answer.hpp"
#include "srca/error.hpp"

namespace srca {

struct WorldNode {
  std::string step;
  double weight = 1.0;
  double reward = 0.0;
  std::optional<double> checkpoint_reward;
  std::string checkpoint_answer;
  bool terminal = false;
  std::optional<std::string> final_answer;
  std::vector<std::size_t> children;
  std::size_t parent = 0;
  std::size_t depth = 0;     // root is 0, its children 1, ...
  std::string path_text;     // concatenated steps from the root through this node
  std::string location;      // "root.children[1]..." for error messages

  double effective_checkpoint_reward() const { return checkpoint_reward.value_or(reward); }
};

class ScriptedWorld {
 public:
  static constexpr std::size_t kRoot = 0;

  static ScriptedWorld from_json(const nlohmann::json& doc) {
    ScriptedWorld w;
    if (!doc.is_object()) throw LoadError("world: expected a JSON object");
    if (!doc.contains("gold_answer") || !doc["gold_answer"].is_string()) {
      throw LoadError("world: missing string field gold_answer");
    }
    w.gold_answer_ = doc["gold_answer"].get<std::string>();
    if (is_empty_answer(normalize_answer(w.gold_answer_))) {
      throw LoadError("world: gold_answer normalizes to the empty answer");
    }
    if (!doc.contains("root")) throw LoadError("world: missing field root");
    w.add_node(doc["root"], "root", kRoot, 0);
    for (const auto& n : w.nodes_) w.by_path_.emplace(n.path_text, &n - w.nodes_.data());
    return w;
  }

  static ScriptedWorld load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw LoadError("world: cannot open " + file.string());
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw LoadError("world " + file.string() + ": " + e.what());
    }
    try {
      return from_json(doc);
    } catch (const LoadError& e) {
      throw LoadError(file.string() + ": " + e.what());
    }
  }

  const std::string& gold_answer() const noexcept { return gold_answer_; }
  const std::vector<WorldNode>& nodes() const noexcept { return nodes_; }
  const WorldNode& node(std::size_t i) const { return nodes_.at(i); }
  const WorldNode& root() const { return nodes_.front(); }

  /// Node whose root-to-node text equals `path_text`.
  std::optional<std::size_t> find(std::string_view path_text) const {
    auto it = by_path_.find(std::string(path_text));
    if (it == by_path_.end()) return std::nullopt;
    return it->second;
  }

 private:
  static double number(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_number()) {
      throw LoadError(where + ": missing numeric field " + key);
    }
    return j[key].get<double>();
  }

  static std::string text(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_string()) {
      throw LoadError(where + ": missing string field " + key);
    }
    return j[key].get<std::string>();
  }

  std::size_t add_node(const nlohmann::json& j, const std::string& where, std::size_t parent,
                       std::size_t depth) {
    if (!j.is_object()) throw LoadError(where + ": node must be an object");
    if (depth > 100000) throw LoadError(where + ": tree too deep");
    WorldNode n;
    n.location = where;
    n.parent = parent;
    n.depth = depth;
    const bool is_root = depth == 0;
    n.step = j.contains("step") ? text(j, "step", where) : std::string();
    if (is_root) {
      if (!n.step.empty()) throw LoadError(where + ": root step must be empty");
    } else {
      if (n.step.empty()) throw LoadError(where + ": step must be non-empty");
      n.weight = number(j, "weight", where);
      if (!(n.weight > 0.0) || !std::isfinite(n.weight)) {
        throw LoadError(where + ": weight must be positive");
      }
      n.reward = number(j, "reward", where);
      if (!(n.reward >= 0.0 && n.reward <= 1.0)) throw LoadError(where + ": reward outside [0, 1]");
      n.checkpoint_answer = text(j, "checkpoint_answer", where);
      if (!j.contains("terminal") || !j["terminal"].is_boolean()) {
        throw LoadError(where + ": missing boolean field terminal");
      }
      n.terminal = j["terminal"].get<bool>();
    }
    if (j.contains("checkpoint_reward") && !j["checkpoint_reward"].is_null()) {
      double r = number(j, "checkpoint_reward", where);
      if (!(r >= 0.0 && r <= 1.0)) throw LoadError(where + ": checkpoint_reward outside [0, 1]");
      n.checkpoint_reward = r;
    }
    if (j.contains("final_answer") && !j["final_answer"].is_null()) {
      n.final_answer = text(j, "final_answer", where);
    }
    const nlohmann::json empty = nlohmann::json::array();
    const auto& kids = j.contains("children") ? j["children"] : empty;
    if (!kids.is_array()) throw LoadError(where + ": children must be an array");
    if (n.terminal && !kids.empty()) throw LoadError(where + ": terminal node has children");
    if (kids.empty() && !n.terminal) throw LoadError(where + ": leaf must be terminal");
    if (n.terminal && !n.final_answer) throw LoadError(where + ": terminal node needs final_answer");

    n.path_text = is_root ? std::string() : nodes_.at(parent).path_text + n.step;
    const std::size_t id = nodes_.size();
    nodes_.push_back(std::move(n));

    std::vector<std::string> seen;
    for (std::size_t k = 0; k < kids.size(); ++k) {
      const std::string child_where = where + ".children[" + std::to_string(k) + "]";
      std::size_t child = add_node(kids[k], child_where, id, depth + 1);
      const auto& step = nodes_[child].step;
      if (std::find(seen.begin(), seen.end(), step) != seen.end()) {
        throw LoadError(child_where + ": duplicate sibling step text");
      }
      seen.push_back(step);
      nodes_[id].children.push_back(child);
    }
    return id;
  }

  std::string gold_answer_;
  std::vector<WorldNode> nodes_;
  std::unordered_map<std::string, std::size_t> by_path_;
};

namespace detail {

inline std::string_view strip_header(std::string_view prompt, std::string_view header) {
  if (!prompt.starts_with(header)) throw ProtocolError("scripted: prompt does not start with the question header");
  return prompt.substr(header.size());
}

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
inline double unit_interval(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

/**
 * Policy side of a scripted world. Child draws are proportional to weight at
 * any positive temperature; temperature 0 takes the heaviest child (lowest
 * index on ties). top_p is ignored. Sample i of a request is seeded from
 * (request seed, prompt hash, i), so results never depend on call order.
 */
class ScriptedGenerator final : public Generator {
 public:
  ScriptedGenerator(const ScriptedWorld& world, std::string header, std::string injection_template)
      : world_(world), header_(std::move(header)), template_(std::move(injection_template)) {}

  std::vector<Continuation> sample_continuations(const GeneratorRequest& req) override {
    if (req.n < 1) throw InvalidArgument("n must be >= 1");
    std::string_view rest = detail::strip_header(req.prompt, header_);
    std::string_view tail;
    for (const auto& s : req.stop) {
      if (!s.empty() && rest.ends_with(s) && s.size() > tail.size()) tail = s;
    }
    if (tail.empty()) throw ProtocolError("scripted: step prompt must end with a stop delimiter");
    auto path = rest.substr(0, rest.size() - tail.size());
    auto at = world_.find(path);
    if (!at) throw ProtocolError("scripted: prompt path is not in the world");
    const WorldNode& node = world_.node(*at);
    if (node.terminal) throw ProtocolError("scripted: cannot extend a finished path (" + node.location + ")");

    const std::uint64_t base = req.seed.value_or(0);
    const std::uint64_t prompt_hash = fnv1a64(req.prompt);
    std::vector<Continuation> out;
    out.reserve(req.n);
    for (std::size_t i = 0; i < req.n; ++i) {
      const WorldNode& child = world_.node(node.children[pick(node, req.temperature, base, prompt_hash, i)]);
      if (!std::string_view(child.step).starts_with(tail)) {
        throw ProtocolError("scripted: " + child.location + " does not start with the stop delimiter");
      }
      Continuation c;
      c.text = child.step.substr(tail.size());
      if (cut_at_stop(c.text, req.stop)) {
        throw ProtocolError("scripted: " + child.location + " contains a stop delimiter");
      }
      c.finished = child.terminal;
      if (child.terminal) c.final_answer = child.final_answer;
      out.push_back(std::move(c));
    }
    return out;
  }

  std::string force_checkpoint_answer(const GeneratorRequest& req) override {
    std::string_view rest = detail::strip_header(req.prompt, header_);
    if (!rest.ends_with(template_)) throw ProtocolError("scripted: checkpoint prompt must end with the template");
    auto at = world_.find(rest.substr(0, rest.size() - template_.size()));
    if (!at) throw ProtocolError("scripted: checkpoint path is not in the world");
    std::string answer = world_.node(*at).checkpoint_answer;
    cut_at_stop(answer, req.stop);
    return answer;
  }

 private:
  std::size_t pick(const WorldNode& node, double temperature, std::uint64_t seed,
                   std::uint64_t prompt_hash, std::size_t sample) const {
    const auto& kids = node.children;
    if (temperature <= 0.0) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < kids.size(); ++k) {
        if (world_.node(kids[k]).weight > world_.node(kids[best]).weight) best = k;
      }
      return best;
    }
    double total = 0.0;
    for (auto k : kids) total += world_.node(k).weight;
    std::mt19937_64 rng(mix_seed(seed, prompt_hash, sample));
    const double u = detail::unit_interval(rng) * total;
    double acc = 0.0;
    for (std::size_t k = 0; k < kids.size(); ++k) {
      acc += world_.node(kids[k]).weight;
      if (u < acc) return k;
    }
    return kids.size() - 1;
  }

  const ScriptedWorld& world_;
  std::string header_;
  std::string template_;
};

/**
 * Reward side of a scripted world. Steps are matched against the tree from
 * the root. A final step that extends a node's step text (a checkpoint
 * augmented path) gets that node's checkpoint_reward.
 */
class ScriptedReward final : public RewardModel {
 public:
  explicit ScriptedReward(const ScriptedWorld& world) : world_(world) {}

  std::vector<double> score_steps(std::string_view /*question*/,
                                  const std::vector<std::string>& steps) override {
    if (steps.empty()) throw InvalidArgument("score_steps: empty step list");
    std::vector<double> scores;
    scores.reserve(steps.size());
    std::size_t cur = ScriptedWorld::kRoot;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const bool last = i + 1 == steps.size();
      std::optional<std::size_t> exact;
      std::optional<std::size_t> prefix;
      for (auto k : world_.node(cur).children) {
        const auto& s = world_.node(k).step;
        if (s == steps[i]) {
          exact = k;
          break;
        }
        if (last && std::string_view(steps[i]).starts_with(s) &&
            (!prefix || s.size() > world_.node(*prefix).step.size())) {
          prefix = k;
        }
      }
      if (exact) {
        scores.push_back(world_.node(*exact).reward);
        cur = *exact;
      } else if (prefix) {
        scores.push_back(world_.node(*prefix).effective_checkpoint_reward());
      } else {
        throw ProtocolError("scripted reward: step " + std::to_string(i) + " is not in the world");
      }
    }
    return scores;
  }

 private:
  const ScriptedWorld& world_;
};

}  // namespace srca
