#include <catch_amalgamated.hpp>

#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "srca/core/answer.hpp"
#include "srca/core/config.hpp"
#include "srca/core/ops.hpp"
#include "test_worlds.hpp"

using namespace srca;

TEST_CASE("normalize_answer strips whitespace and terminal punctuation") {
  CHECK(normalize_answer(" 27.") == "27");
  CHECK(normalize_answer("\\boxed{1/2}") == normalize_answer("0.5"));
  CHECK(normalize_answer("6") == "6");
  CHECK(normalize_answer("6.0") == "6");
  CHECK(normalize_answer("6 ") == "6");
  CHECK(normalize_answer("027") == "27");
  CHECK(normalize_answer("1,234") == "1234");
  CHECK(normalize_answer("\\frac{3}{6}") == "1/2");
  CHECK(normalize_answer("-\\dfrac{5}{2}") == "-5/2");
  CHECK(normalize_answer("  Yes  ") == "yes");
  CHECK(normalize_answer("None   of\tthese") == "none of these");
}

TEST_CASE("empty answers collapse to the empty sentinel") {
  CHECK(normalize_answer("") == kEmptyAnswer);
  CHECK(normalize_answer("   ") == kEmptyAnswer);
  CHECK(normalize_answer(".") == kEmptyAnswer);
  CHECK(normalize_answer("\\boxed{}") == kEmptyAnswer);
  CHECK(answers_equal("", " "));
  CHECK_FALSE(answers_equal("27", ""));
  CHECK(answers_equal("27", "27"));
  CHECK(answers_equal("1/2", "0.5"));
}

TEST_CASE("rationals that do not fit fall back to text") {
  const std::string huge(60, '9');
  CHECK(normalize_answer(huge) == huge);
  CHECK(normalize_answer("1/0") == "1/0");
  CHECK(normalize_answer("1,00") == "1,00");
}

TEST_CASE("answer literal fixture matches the rational oracle pairwise") {
  std::ifstream in(testing::fixture("answer_literals.jsonl"));
  REQUIRE(in);
  std::vector<std::pair<std::string, int>> rows;
  for (std::string line; std::getline(in, line);) {
    auto j = nlohmann::json::parse(line);
    rows.emplace_back(j["literal"].get<std::string>(), j["class"].get<int>());
  }
  REQUIRE(rows.size() == 200);
  std::size_t disagreements = 0;
  for (const auto& [a, ca] : rows) {
    for (const auto& [b, cb] : rows) {
      if (answers_equal(a, b) != (ca == cb)) {
        ++disagreements;
        UNSCOPED_INFO("\"" << a << "\" vs \"" << b << "\"");
      }
    }
  }
  CHECK(disagreements == 0);
}

namespace {

std::string random_answer_text(std::mt19937_64& rng) {
  static const std::vector<std::string> atoms{
      "1", "2", "0", "27", ".", ",", "/", "-", "+", " ", "\t", "$", "\\$", "\\boxed{", "\\fbox{",
      "{", "}", "\\frac{", "\\dfrac{", "x", "Y", "ab", "!", "?", ";", ":", "\\,", "\\!", "000", "5"};
  std::string s;
  const auto len = rng() % 9;
  for (std::size_t i = 0; i < len; ++i) s += atoms[rng() % atoms.size()];
  return s;
}

}  // namespace

TEST_CASE("normalization is idempotent and answers_equal is an equivalence") {
  std::mt19937_64 rng(42);
  std::vector<std::string> sample;
  for (int i = 0; i < 3000; ++i) {
    const auto s = random_answer_text(rng);
    const auto once = normalize_answer(s);
    INFO("input: \"" << s << "\" -> \"" << once << "\"");
    REQUIRE(normalize_answer(once) == once);
    if (i < 120) sample.push_back(s);
  }
  for (const auto& a : sample) {
    CHECK(answers_equal(a, a));
    for (const auto& b : sample) {
      REQUIRE(answers_equal(a, b) == answers_equal(b, a));
      if (!answers_equal(a, b)) continue;
      for (const auto& c : sample) {
        if (answers_equal(b, c)) REQUIRE(answers_equal(a, c));
      }
    }
  }
}

TEST_CASE("extract_final_answer prefers boxed, then 'answer is', then the last number") {
  CHECK(extract_final_answer("so x = 3. The final answer is \\boxed{27}.") == "27");
  CHECK(extract_final_answer("Therefore the answer is 42.\nDone") == "42.");
  CHECK(extract_final_answer("we get 3, then 1/2") == "1/2");
  CHECK(extract_final_answer("total -5 apples") == "-5");
  CHECK(extract_final_answer("no digits here").empty());
}

TEST_CASE("reduce_scores modes") {
  CHECK(reduce_scores(std::vector<double>{0.1, 0.9}, Reduction::last) == 0.9);
  CHECK(reduce_scores(std::vector<double>{0.2, 0.4, 0.6}, Reduction::mean) == Catch::Approx(0.4));
  CHECK(reduce_scores(std::vector<double>{0.5, 0.5, 0.5}, Reduction::prod) == 0.125);
  CHECK(reduce_scores(std::vector<double>{0.3, 0.1, 0.7}, Reduction::min) == 0.1);
  CHECK(reduce_scores(std::vector<double>{0.6, 0.7}, Reduction::sum) == Catch::Approx(1.3));
  CHECK_THROWS_AS(reduce_scores(std::vector<double>{}, Reduction::last), InvalidArgument);
}

TEST_CASE("reduce_scores is permutation invariant except for last") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> seq(1 + rng() % 7);
    for (auto& s : seq) s = std::round(u(rng) * 16.0) / 16.0;  // dyadic: sums are exact
    auto shuffled = seq;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (auto mode : {Reduction::mean, Reduction::min, Reduction::sum, Reduction::prod}) {
      CHECK(reduce_scores(seq, mode) == Catch::Approx(reduce_scores(shuffled, mode)).margin(1e-12));
    }
    CHECK(reduce_scores(seq, Reduction::last) == seq.back());
  }
}

TEST_CASE("split_into_steps keeps delimiters and preamble") {
  const std::vector<std::string> delims{"### Step"};
  auto steps = split_into_steps("### Step 1: a### Step 2: b", delims);
  REQUIRE(steps.size() == 2);
  CHECK(steps[0].text == "### Step 1: a");
  CHECK(steps[1].text == "### Step 2: b");
  CHECK(steps[1].index == 1);

  steps = split_into_steps("preamble### Step 1: a", delims);
  REQUIRE(steps.size() == 2);
  CHECK(steps[0].text == "preamble");

  steps = split_into_steps("no delimiter at all", delims);
  REQUIRE(steps.size() == 1);
  CHECK(split_into_steps("", delims).empty());
  CHECK_THROWS_AS(split_into_steps("x", std::vector<std::string>{}), InvalidArgument);
}

TEST_CASE("split_into_steps round-trips random delimiter-seeded texts") {
  const std::vector<std::string> delims{"### Step", "\n\n"};
  const std::vector<std::string> atoms{"### Step", "\n\n", "\n", "a", "bc", "# ", "###", " Step", "1:", " "};
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 100; ++i) {
    std::string text;
    const auto len = rng() % 20;
    for (std::size_t k = 0; k < len; ++k) text += atoms[rng() % atoms.size()];
    auto steps = split_into_steps(text, delims);
    REQUIRE(join_steps(steps) == text);
    for (std::size_t k = 0; k < steps.size(); ++k) {
      CHECK(steps[k].index == k);
      CHECK_FALSE(steps[k].text.empty());
      if (k > 0) {
        const bool starts = steps[k].text.starts_with("### Step") || steps[k].text.starts_with("\n\n");
        CHECK(starts);
      }
    }
  }
}

namespace {

ReasoningPath five_step_path() {
  ReasoningPath p;
  p.question_id = "q";
  for (int i = 1; i <= 5; ++i) {
    p.append("### Step " + std::to_string(i) + ": s" + std::to_string(i) + "\n", LineageEntry{});
  }
  p.set_scores({0.1, 0.2, 0.3, 0.4, 0.5});
  return p;
}

}  // namespace

TEST_CASE("build_checkpoint_candidate concatenates prefix, template and answer") {
  ReasoningPath p;
  p.append("### Step 1: ...", LineageEntry{});
  CheckpointAnswer a{0, "27", normalize_answer("27"), std::nullopt};
  auto c = build_checkpoint_candidate(p, "So, the answer is ", a);
  CHECK(c.full_text == "### Step 1: ...So, the answer is 27");
  CHECK(c.answer == "27");
  REQUIRE(c.checkpoint_step.has_value());
  CHECK(*c.checkpoint_step == 0);
  CHECK_FALSE(c.final_score.has_value());
}

TEST_CASE("build_checkpoint_candidate truncates to the checkpoint step") {
  auto p = five_step_path();
  CheckpointAnswer a{2, "9", "9", std::nullopt};
  auto c = build_checkpoint_candidate(p, "So, the answer is ", a);
  CHECK(c.full_text == p.text_through(2) + "So, the answer is 9");
  CHECK(c.full_text.find("s4") == std::string::npos);
  CHECK(c.path.steps.size() == 3);
  CHECK(c.path.score_sequence.size() == 3);
  CHECK(c.full_text.size() == p.text_through(2).size() + std::string("So, the answer is ").size() + 1);

  CheckpointAnswer empty{4, "", kEmptyAnswer, std::nullopt};
  auto e = build_checkpoint_candidate(p, "So, the answer is ", empty);
  CHECK(is_empty_answer(e.answer));
  CHECK(e.full_text.ends_with("So, the answer is "));

  CheckpointAnswer out_of_range{5, "1", "1", std::nullopt};
  CHECK_THROWS_AS(build_checkpoint_candidate(p, "So, the answer is ", out_of_range), InvalidArgument);
}

TEST_CASE("reasoning path status transitions are one-way") {
  auto p = five_step_path();
  CHECK(p.status() == PathStatus::active);
  p.finish();
  CHECK(p.status() == PathStatus::finished_natural);
  CHECK_THROWS_AS(p.prune(), InvalidArgument);
  CHECK_THROWS_AS(p.append("### Step 6", LineageEntry{}), InvalidArgument);

  auto q = five_step_path();
  q.prune();
  CHECK_THROWS_AS(q.finish(), InvalidArgument);
  CHECK_THROWS_AS(q.set_scores({1.5}), InvalidArgument);
}

TEST_CASE("search config validation") {
  SearchConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  cfg.n = 10;
  cfg.m = 4;
  try {
    validate(cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("N mod M = 0") != std::string::npos);
  }
  cfg = SearchConfig{};
  cfg.tau = 1.5;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = SearchConfig{};
  cfg.m = 32;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = SearchConfig{};
  cfg.max_steps = 0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
}

TEST_CASE("search config json round trip and unknown keys") {
  SearchConfig cfg;
  cfg.tau = 0.95;
  cfg.reduction = Reduction::prod;
  cfg.strategy = Strategy::dvts;
  auto back = apply_config(SearchConfig{}, to_json(cfg));
  CHECK(back == cfg);
  CHECK_THROWS_AS(apply_config(SearchConfig{}, nlohmann::json{{"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(apply_config(SearchConfig{}, nlohmann::json{{"reduction", "median"}}), ConfigError);
  CHECK_THROWS_AS(apply_config(SearchConfig{}, nlohmann::json{{"N", -3}}), ConfigError);
}
