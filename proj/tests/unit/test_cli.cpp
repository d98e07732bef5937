#include <catch_amalgamated.hpp>

#include <sstream>
#include <string>
#include <vector>

#include "srca/cli.hpp"
#include "test_worlds.hpp"

using namespace srca;
using testing::TempDir;

namespace {

struct Invocation {
  int code = -1;
  std::string out;
  std::string err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "srca");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Invocation r;
  r.code = srca::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::filesystem::path write_config(const TempDir& dir, nlohmann::json extra = nlohmann::json::object()) {
  testing::WorldSpec spec;
  spec.depth = 4;
  spec.min_branch = 2;
  spec.rising_checkpoint_reward = true;
  testing::write_suite(dir.path(), "toy", 3, spec, 5);
  nlohmann::json doc{{"search", {{"N", 4}, {"M", 2}}},
                     {"methods", {"srca", "beam"}},
                     {"datasets", {"toy.jsonl"}},
                     {"backend", {{"kind", "scripted"}, {"worlds_dir", "worlds"}}},
                     {"harness", {{"results_dir", "results"}}}};
  doc.merge_patch(extra);
  testing::write_text(dir / "srca.json", doc.dump(2));
  return dir / "srca.json";
}

std::string slurp(const std::filesystem::path& f) {
  std::ifstream in(f, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("run writes the report and the effective config") {
  TempDir dir("cli-run");
  auto cfg = write_config(dir);
  auto r = invoke({"--config", cfg.string(), "--override", "tau=0.95", "run"});
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(dir / "results/report.csv"));
  CHECK(std::filesystem::exists(dir / "results/report.md"));
  CHECK(r.out.find("report.csv") != std::string::npos);
  auto echoed = nlohmann::json::parse(slurp(dir / "results/effective_config.json"));
  CHECK(echoed["search"]["tau"] == 0.95);
  CHECK(echoed["search"]["max_steps"] == 40);
  auto meta = nlohmann::json::parse(slurp(dir / "results/run_meta.json"));
  CHECK(meta.contains("started_at"));
  CHECK(meta["questions_run"] == 6);
}

TEST_CASE("re-running the echoed config reproduces the report") {
  TempDir dir("cli-echo");
  auto cfg = write_config(dir);
  REQUIRE(invoke({"--config", cfg.string(), "--seed", "9", "run"}).code == 0);
  const auto first = slurp(dir / "results/report.csv");
  auto again = invoke({"--config", (dir / "results/effective_config.json").string(), "--results-dir",
                    (dir / "again").string(), "run"});
  REQUIRE(again.code == 0);
  CHECK(slurp(dir / "again/report.csv") == first);
  CHECK(nlohmann::json::parse(slurp(dir / "again/effective_config.json"))["search"]["seed"] == 9);
}

TEST_CASE("configuration errors exit with 2") {
  TempDir dir("cli-bad");
  auto cfg = write_config(dir);
  auto r = invoke({"--config", cfg.string(), "--override", "N=10", "--override", "M=4", "run"});
  CHECK(r.code == 2);
  CHECK(r.err.find("N mod M = 0") != std::string::npos);

  CHECK(invoke({"--config", (dir / "absent.json").string(), "run"}).code == 2);
  CHECK(invoke({"--config", cfg.string(), "--override", "nonsense", "run"}).code == 2);
  CHECK(invoke({"frobnicate"}).code == 2);
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"--config", cfg.string(), "sweep", "--axis", "n"}).code == 2);
  CHECK(invoke({"--config", cfg.string(), "sweep", "--axis", "depth", "--values", "1"}).code == 2);
}

TEST_CASE("failed cells exit with 1") {
  TempDir dir("cli-partial");
  auto cfg = write_config(dir);
  std::filesystem::remove(dir / "worlds/toy-2.json");
  auto r = invoke({"--config", cfg.string(), "run"});
  CHECK(r.code == 1);
  CHECK(r.err.find("toy-2") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "results/report.csv"));
}

TEST_CASE("sweep produces one row per value and method") {
  TempDir dir("cli-sweep");
  auto cfg = write_config(dir);
  auto r = invoke({"--config", cfg.string(), "sweep", "--axis", "n", "--values", "4,8"});
  INFO(r.err);
  REQUIRE(r.code == 0);
  auto csv = slurp(dir / "results/report.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 4);
  CHECK(slurp(dir / "results/report.md").find("srca (N=8)") != std::string::npos);

  auto tau = invoke({"--config", cfg.string(), "--results-dir", (dir / "tau").string(), "--override",
                  "methods=srca", "sweep", "--axis", "tau", "--values", "0.5,0.95,1.0"});
  REQUIRE(tau.code == 0);
  auto lines = slurp(dir / "tau/report.csv");
  std::istringstream in(lines);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  for (std::size_t s = 0, e; s <= line.size(); s = e + 1) {
    e = line.find(',', s);
    if (e == std::string::npos) e = line.size();
    header.push_back(line.substr(s, e - s));
  }
  const auto col = static_cast<std::size_t>(std::find(header.begin(), header.end(), "mean_depth") - header.begin());
  double prev = 0.0;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    for (std::size_t s = 0, e; s <= line.size(); s = e + 1) {
      e = line.find(',', s);
      if (e == std::string::npos) e = line.size();
      cells.push_back(line.substr(s, e - s));
    }
    const double depth = std::stod(cells.at(col));
    CHECK(depth >= prev);
    prev = depth;
  }
}

TEST_CASE("inspect prints one row per step") {
  TempDir dir("cli-inspect");
  auto world = ScriptedWorld::load(testing::fixture("deceptive.json"));
  auto plain = testing::run_on(world, testing::tree_config(Strategy::srca, 4, 2, false, 0));
  testing::write_text(dir / "plain.json", dump_run(plain));
  auto r = invoke({"inspect", (dir / "plain.json").string()});
  REQUIRE(r.code == 0);
  std::size_t rows = 0;
  std::istringstream in(r.out);
  for (std::string line; std::getline(in, line);) rows += line.rfind("### Step", 0) == std::string::npos && !line.empty() &&
                                                         std::isdigit(static_cast<unsigned char>(line[0])) ? 1 : 0;
  CHECK(rows == 6);
  CHECK(r.out.find("origin natural") != std::string::npos);

  auto cca = testing::run_on(world, testing::tree_config(Strategy::srca, 4, 2, true, 0));
  testing::write_text(dir / "cca.json", dump_run(cca));
  auto c = invoke({"inspect", (dir / "cca.json").string()});
  REQUIRE(c.code == 0);
  CHECK(c.out.find("origin checkpoint") != std::string::npos);
  CHECK(c.out.find("0.7192") != std::string::npos);
  CHECK(c.out.find("0.0212") != std::string::npos);
  CHECK(c.out.find("checkpoint *") != std::string::npos);

  CHECK(invoke({"inspect", (dir / "missing.json").string()}).code != 0);
  testing::write_text(dir / "broken.json", "{\"pool\": 3}");
  CHECK(invoke({"inspect", (dir / "broken.json").string()}).code != 0);
}
