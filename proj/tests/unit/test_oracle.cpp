#include <catch_amalgamated.hpp>

#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "srca/oracle.hpp"
#include "test_worlds.hpp"

using namespace srca;
using nlohmann::json;

namespace {

json binary_node(int depth, int max_depth, std::string prefix) {
  json n{{"step", "### Step " + prefix + "\n"}, {"weight", 1}, {"reward", 0.5}, {"checkpoint_answer", "1"}};
  if (depth == max_depth) {
    n["terminal"] = true;
    n["final_answer"] = "1";
    n["children"] = json::array();
  } else {
    n["terminal"] = false;
    n["children"] = json::array({binary_node(depth + 1, max_depth, prefix + "a"), binary_node(depth + 1, max_depth, prefix + "b")});
  }
  return n;
}

Candidate answered(const std::string& a) {
  Candidate c;
  c.answer = normalize_answer(a);
  c.final_score = 0.5;
  return c;
}

}  // namespace

TEST_CASE("enumeration of small worlds") {
  json chain{{"gold_answer", "1"},
             {"root", {{"step", ""}, {"children", json::array({{{"step", "### Step 1"}, {"weight", 3}, {"reward", 0.2},
                                                               {"checkpoint_answer", "1"}, {"terminal", true},
                                                               {"final_answer", "1"}, {"children", json::array()}}})}}}};
  auto one = oracle::enumerate_all_paths(ScriptedWorld::from_json(chain));
  REQUIRE(one.size() == 1);
  CHECK(one[0].probability == 1.0);
  CHECK(one[0].leaf_answer == "1");

  json bin{{"gold_answer", "1"},
           {"root", {{"step", ""}, {"children", json::array({binary_node(1, 3, "a"), binary_node(1, 3, "b")})}}}};
  auto paths = oracle::enumerate_all_paths(ScriptedWorld::from_json(bin));
  CHECK(paths.size() == 8);
  for (const auto& p : paths) CHECK(p.probability == Catch::Approx(0.125));
}

TEST_CASE("enumerated probabilities sum to one") {
  testing::WorldSpec spec;
  spec.depth = 6;
  spec.min_branch = 1;
  spec.max_branch = 4;
  spec.early_leaf = 0.2;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    double total = 0.0;
    for (const auto& p : oracle::enumerate_all_paths(testing::random_world(seed, spec))) total += p.probability;
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("reference ACS on the six-candidate example and full width") {
  std::vector<std::string> answers{"6", "6", "6", "4", "4", "9"};
  std::vector<double> scores{0.5, 0.4, 0.3, 0.9, 0.2, 0.1};
  CHECK(oracle::reference_acs_select(answers, scores, 2) == std::vector<std::size_t>{0, 3});
  auto all = oracle::reference_acs_select(answers, scores, 6);
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  CHECK_THROWS_AS(oracle::reference_acs_select(answers, scores, 7), InvalidArgument);
}

TEST_CASE("pass at k") {
  std::vector<Candidate> pool{answered("27"), answered("3"), answered("9")};
  CHECK(oracle::pass_at_k(pool, "27", 1));
  CHECK_FALSE(oracle::pass_at_k(pool, "5", 3));
  CHECK(oracle::pass_at_k(pool, "9.0", 3));
  CHECK_FALSE(oracle::pass_at_k(pool, "9", 2));
  CHECK_THROWS_AS(oracle::pass_at_k(pool, "27", 0), InvalidArgument);
  CHECK_THROWS_AS(oracle::pass_at_k(pool, "27", 4), InvalidArgument);

  std::mt19937_64 rng(5);
  for (int t = 0; t < 500; ++t) {
    std::vector<Candidate> p;
    const std::size_t n = 1 + rng() % 10;
    for (std::size_t i = 0; i < n; ++i) p.push_back(answered(std::to_string(rng() % 4)));
    for (std::size_t k = 1; k < n; ++k) {
      if (oracle::pass_at_k(p, "0", k)) CHECK(oracle::pass_at_k(p, "0", k + 1));
    }
  }
}

TEST_CASE("natural_only keeps pool order") {
  std::vector<Candidate> pool{answered("1"), answered("2"), answered("3")};
  pool[1].checkpoint_step = 2;
  auto nat = oracle::natural_only(pool);
  REQUIRE(nat.size() == 2);
  CHECK(nat[1].answer == "3");
}
