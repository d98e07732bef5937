#include <catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "srca/harness/benchmark.hpp"
#include "test_worlds.hpp"

using namespace srca;
using testing::TempDir;

namespace {

testing::WorldSpec suite_spec() {
  testing::WorldSpec spec;
  spec.depth = 4;
  spec.min_branch = 2;
  spec.max_branch = 3;
  spec.early_leaf = 0.1;
  spec.rising_checkpoint_reward = true;
  return spec;
}

BenchmarkConfig small_config(const TempDir& dir, std::vector<std::string> methods) {
  BenchmarkConfig cfg;
  cfg.search.n = 4;
  cfg.search.m = 2;
  cfg.methods = std::move(methods);
  cfg.datasets = {testing::write_suite(dir.path(), "toy", 3, suite_spec(), 1)};
  cfg.backend.worlds_dir = dir / "worlds";
  cfg.results_dir = dir / "results";
  return cfg;
}

std::string slurp(const std::filesystem::path& f) {
  std::ifstream in(f, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

RunResult fake_result(const std::string& id, const std::string& answer, bool checkpoint) {
  RunResult r;
  r.question_id = id;
  Candidate c;
  c.answer = answer;
  c.final_score = 0.5;
  if (checkpoint) c.checkpoint_step = 0;
  r.pool.push_back(c);
  r.selection = Selection{answer, 0, Selector::bon, checkpoint};
  r.rounds.resize(2);
  r.accounting = Accounting{10, 20, 3, 4};
  return r;
}

}  // namespace

TEST_CASE("load_dataset") {
  TempDir dir("dataset");
  testing::write_text(dir / "ok.jsonl",
                      "{\"id\": \"a\", \"question\": \"1+1?\", \"answer\": \"2\"}\n\n"
                      "{\"id\": \"b\", \"question\": \"Janet has...\", \"answer\": \"72\"}\n");
  auto ds = load_dataset(dir / "ok.jsonl");
  CHECK(ds.name == "ok");
  REQUIRE(ds.questions.size() == 2);
  CHECK(normalize_answer(ds.questions[1].gold_answer) == "72");

  testing::write_text(dir / "dup.jsonl",
                      "{\"id\": \"a\", \"question\": \"q\", \"answer\": \"1\"}\n"
                      "{\"id\": \"a\", \"question\": \"q\", \"answer\": \"1\"}\n");
  try {
    load_dataset(dir / "dup.jsonl");
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("dup.jsonl:2") != std::string::npos);
  }
  testing::write_text(dir / "missing.jsonl", "{\"id\": \"a\", \"question\": \"q\"}\n");
  CHECK_THROWS_WITH(load_dataset(dir / "missing.jsonl"), Catch::Matchers::ContainsSubstring("missing.jsonl:1") &&
                                                            Catch::Matchers::ContainsSubstring("answer"));
  testing::write_text(dir / "slash.jsonl", "{\"id\": \"../x\", \"question\": \"q\", \"answer\": \"1\"}\n");
  CHECK_THROWS_AS(load_dataset(dir / "slash.jsonl"), LoadError);
  CHECK_THROWS_AS(load_dataset(dir / "absent.jsonl"), LoadError);
}

TEST_CASE("compute_metrics") {
  std::map<std::string, std::string> gold{{"a", "1"}, {"b", "2"}, {"c", "3"}, {"d", "4"}, {"e", "5"}};
  std::vector<RunResult> rs{fake_result("a", "1", false), fake_result("b", "2", true), fake_result("c", "0", false),
                            fake_result("d", "0", false)};
  auto row = compute_metrics(rs, gold, default_ks(), 16, true);
  CHECK(row.accuracy == 0.5);
  REQUIRE(row.car.has_value());
  CHECK(*row.car == 0.25);
  CHECK(row.mean_depth == 2.0);
  CHECK(row.generator_calls == 12);
  CHECK(row.reward_calls == 16);
  CHECK(row.pass_full[0] == 0.5);
  CHECK(row.pass_natural[0] == 0.25);  // b's only candidate is a checkpoint candidate

  rs.push_back(fake_result("e", "5", false));
  auto plain = compute_metrics(rs, gold, default_ks(), 16, false, FlopsModel{1e9, 2e9});
  CHECK_FALSE(plain.car.has_value());
  REQUIRE(plain.flops.has_value());
  CHECK(*plain.flops == Catch::Approx(2e9 * 10 + 4e9 * 20));

  std::vector<RunResult> five{fake_result("a", "1", true), fake_result("b", "0", false), fake_result("c", "0", false),
                              fake_result("d", "0", false), fake_result("e", "0", false)};
  CHECK(*compute_metrics(five, gold, default_ks(), 4, true).car == 0.2);

  std::vector<RunResult> orphan{fake_result("zz", "1", false)};
  CHECK_THROWS_AS(compute_metrics(orphan, gold, default_ks(), 4, false), InvalidArgument);
}

TEST_CASE("report rendering") {
  Report report;
  ReportRow row;
  row.dataset = "toy";
  row.method = row.label = "srca";
  row.n = 4;
  row.m = 2;
  row.questions = 3;
  row.accuracy = 2.0 / 3.0;
  row.pass_full = {1, 1, 1, 1};
  row.pass_natural = {0.5, 0.5, 0.5, 0.5};
  row.car = 1.0 / 3.0;
  report.rows.push_back(row);

  const auto csv = render_csv(report);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK(csv.find("0.6667") != std::string::npos);
  CHECK(csv.find("0.3333") != std::string::npos);
  CHECK(csv.rfind("dataset,method,N,M,tau,questions,failed,accuracy,pass@1,pass@4,pass@16,pass@N,", 0) == 0);

  row.method = row.label = "beam";
  row.car.reset();
  report.rows.push_back(row);
  row.dataset = "other";
  report.rows.push_back(row);
  const auto md = render_markdown(report);
  CHECK(std::count(md.begin(), md.end(), '\n') == 2 + 2);
  CHECK(md.rfind("| Method | toy | other |", 0) == 0);

  TempDir dir("report");
  emit_report(report, ReportFormat::csv, dir / "a.csv");
  emit_report(report, ReportFormat::csv, dir / "b.csv");
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK_THROWS_AS(emit_report(Report{}, ReportFormat::csv, dir / "c.csv"), InvalidArgument);
}

TEST_CASE("benchmark grid produces one result per question and cell") {
  TempDir dir("grid");
  auto cfg = small_config(dir, {"beam", "srca"});
  auto datasets = load_datasets(cfg);
  auto outcome = run_benchmark(cfg, datasets, make_backend_factory(cfg.backend));
  CHECK(outcome.ok());
  CHECK(outcome.executed == 6);
  REQUIRE(outcome.report.rows.size() == 2);
  CHECK(outcome.report.rows[0].method == "beam");
  CHECK_FALSE(outcome.report.rows[0].car.has_value());
  CHECK(outcome.report.rows[1].car.has_value());

  std::size_t files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(cfg.results_dir)) {
    files += e.path().extension() == ".json" ? 1 : 0;
  }
  CHECK(files == 6);
  ResultsStore store(cfg.results_dir);
  auto srca_cfg = apply_method(cfg.search, method_spec("srca"));
  CHECK(std::filesystem::exists(store.file("toy", "srca", srca_cfg, "toy-0")));

  // rerun: everything reused, identical report
  auto again = run_benchmark(cfg, datasets, make_backend_factory(cfg.backend));
  CHECK(again.executed == 0);
  CHECK(again.reused == 6);
  CHECK(render_csv(again.report) == render_csv(outcome.report));
}

TEST_CASE("resume after interruption matches an uninterrupted run") {
  TempDir a("resume-a"), b("resume-b");
  auto cfg_a = small_config(a, {"srca", "dvts+cca", "self_consistency"});
  auto cfg_b = small_config(b, {"srca", "dvts+cca", "self_consistency"});
  cfg_b.concurrency = 3;
  auto full = run_benchmark(cfg_a, load_datasets(cfg_a), make_backend_factory(cfg_a.backend));

  auto ds_b = load_datasets(cfg_b);
  run_benchmark(cfg_b, ds_b, make_backend_factory(cfg_b.backend));
  // simulate a crash: drop some results and leave a half-written temp file behind
  std::vector<std::filesystem::path> victims;
  for (const auto& e : std::filesystem::recursive_directory_iterator(cfg_b.results_dir)) {
    if (e.path().filename() == "toy-1.json" || e.path().filename() == "toy-2.json") victims.push_back(e.path());
  }
  REQUIRE(victims.size() == 6);
  for (const auto& v : victims) std::filesystem::remove(v);
  testing::write_text(victims.front().string() + ".tmp", "{\"trunc");
  auto resumed = run_benchmark(cfg_b, ds_b, make_backend_factory(cfg_b.backend));
  CHECK(resumed.executed == 6);
  CHECK(render_csv(resumed.report) == render_csv(full.report));
  CHECK(render_markdown(resumed.report) == render_markdown(full.report));
}

TEST_CASE("a failing question marks its cell and the run continues") {
  TempDir dir("fail");
  auto cfg = small_config(dir, {"beam", "srca"});
  std::filesystem::remove(dir / "worlds" / "toy-1.json");
  auto outcome = run_benchmark(cfg, load_datasets(cfg), make_backend_factory(cfg.backend));
  CHECK_FALSE(outcome.ok());
  CHECK(outcome.failures.size() == 2);
  CHECK(outcome.failures[0].question_id == "toy-1");
  REQUIRE(outcome.report.rows.size() == 2);
  for (const auto& row : outcome.report.rows) {
    CHECK(row.failed == 1);
    CHECK(row.questions == 2);
  }
  CHECK(render_markdown(outcome.report).find("(failed)") != std::string::npos);
}

TEST_CASE("tau sweep depth is non-decreasing") {
  TempDir dir("tau");
  auto cfg = small_config(dir, {"srca"});
  cfg.search.n = 8;
  cfg.sweep_axis = SweepAxis::tau;
  cfg.sweep_values = {0.5, 0.95, 1.0};
  auto outcome = run_benchmark(cfg, load_datasets(cfg), make_backend_factory(cfg.backend));
  REQUIRE(outcome.report.rows.size() == 3);
  CHECK(outcome.report.rows[0].label == "srca (tau=0.5)");
  CHECK(outcome.report.rows[0].mean_depth <= outcome.report.rows[1].mean_depth);
  CHECK(outcome.report.rows[1].mean_depth <= outcome.report.rows[2].mean_depth);
}

TEST_CASE("token accounting matches the backend traffic") {
  // Counts every call and token by wrapping the scripted backends.
  struct CountingGen final : Generator {
    Generator& inner;
    std::uint64_t calls = 0, tokens = 0;
    explicit CountingGen(Generator& g) : inner(g) {}
    std::vector<Continuation> sample_continuations(const GeneratorRequest& req) override {
      auto out = inner.sample_continuations(req);
      ++calls;
      for (const auto& c : out) tokens += approx_tokens(c.text);
      return out;
    }
    std::string force_checkpoint_answer(const GeneratorRequest& req) override {
      auto a = inner.force_checkpoint_answer(req);
      ++calls;
      tokens += approx_tokens(a);
      return a;
    }
  };
  struct CountingRew final : RewardModel {
    RewardModel& inner;
    std::uint64_t calls = 0;
    explicit CountingRew(RewardModel& r) : inner(r) {}
    std::vector<double> score_steps(std::string_view q, const std::vector<std::string>& s) override {
      ++calls;
      return inner.score_steps(q, s);
    }
  };
  auto world = testing::random_world(4, suite_spec());
  for (auto s : {Strategy::srca, Strategy::dvts, Strategy::independent, Strategy::greedy}) {
    auto cfg = testing::tree_config(s, 8, 2, s != Strategy::independent, 3);
    auto q = testing::question_for("q", world);
    ScriptedGenerator g(world, render_prompt(cfg, q), cfg.injection_template);
    ScriptedReward rw(world);
    CountingGen cg(g);
    CountingRew cr(rw);
    auto r = run_search(q, cfg, cg, cr);
    CHECK(r.accounting.generator_calls == cg.calls);
    CHECK(r.accounting.generated_tokens == cg.tokens);
    CHECK(r.accounting.reward_calls == cr.calls);
  }
}

TEST_CASE("benchmark config parsing and overrides") {
  TempDir dir("config");
  nlohmann::json doc{{"search", {{"N", 8}, {"M", 2}}},
                     {"methods", {"srca", "beam"}},
                     {"datasets", {"data/toy.jsonl"}},
                     {"backend", {{"kind", "scripted"}, {"worlds_dir", "data/worlds"}}},
                     {"harness", {{"ks", {1, 2, "N"}}}}};
  testing::write_text(dir / "cfg.json", doc.dump());
  auto cfg = load_benchmark_config(dir / "cfg.json", {"tau=0.95", "harness.concurrency=2", "methods=greedy,bon"});
  CHECK(cfg.search.tau == 0.95);
  CHECK(cfg.search.n == 8);
  CHECK(cfg.concurrency == 2);
  CHECK(cfg.methods == std::vector<std::string>{"greedy", "bon"});
  CHECK(cfg.datasets.front() == std::filesystem::absolute(dir / "data/toy.jsonl").lexically_normal());
  CHECK(cfg.ks.size() == 3);
  CHECK(to_json(cfg)["search"]["tau"] == 0.95);

  // the echo parses back to the same config
  auto echoed = parse_benchmark_config(to_json(cfg), "/elsewhere");
  CHECK(to_json(echoed) == to_json(cfg));

  CHECK_THROWS_WITH(load_benchmark_config(dir / "cfg.json", {"N=10", "M=4"}),
                    Catch::Matchers::ContainsSubstring("N mod M = 0"));
  CHECK_THROWS_AS(load_benchmark_config(dir / "cfg.json", {"methods=quantum"}), ConfigError);
  CHECK_THROWS_AS(load_benchmark_config(dir / "cfg.json", {"bogus=1"}), ConfigError);
  CHECK_THROWS_AS(load_benchmark_config(dir / "cfg.json", {"noequals"}), ConfigError);
  try {
    load_benchmark_config(dir / "cfg.json", {"backend.kind=\"carrier pigeon\""});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "backend.kind");
  }
}

TEST_CASE("method table") {
  CHECK(method_spec("acs").strategy == Strategy::srca);
  CHECK_FALSE(method_spec("acs").cca);
  CHECK(method_spec("self_consistency").selector == Selector::majority);
  CHECK(method_spec("dvts+cca").cca);
  CHECK_THROWS_AS(method_spec("nope"), ConfigError);
}
