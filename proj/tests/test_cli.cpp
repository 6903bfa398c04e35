#include <doctest.h>

#include <json.hpp>

#include <sstream>

#include "helpers.hpp"
#include "svytree/cli.hpp"
#include "svytree/config.hpp"
#include "svytree/io.hpp"
#include "svytree/tree_io.hpp"

using namespace svytree;

namespace {

struct Run {
  int status;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int status = run_cli(args, out, err);
  return {status, out.str(), err.str()};
}

nlohmann::json error_line(const Run& r) { return nlohmann::json::parse(r.err); }

const std::string kSmall = "--set=population.N=20000";

}  // namespace

TEST_CASE("every subcommand documents every configuration key") {
  for (const char* sub : {"synth", "tree", "estimate", "simulate", "diagnose"}) {
    const Run r = run({sub, "--help"});
    CHECK(r.status == 0);
    for (const ConfigKey& k : config_keys()) {
      INFO(sub << " " << k.key);
      CHECK(r.out.find(std::string(k.key)) != std::string::npos);
    }
  }
}

TEST_CASE("argument errors exit 2") {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {}, {"frobnicate"}, {"estimate", "--bogus"}, {"simulate", "--n", "abc"}}) {
    const Run r = run(args);
    CHECK(r.status == 2);
    CHECK(error_line(r)["error"] == "BadArguments");
  }
}

TEST_CASE("configuration errors exit 3") {
  const Run bad_estimator = run({"estimate", "--estimator", "ratio"});
  CHECK(bad_estimator.status == 3);
  CHECK(error_line(bad_estimator)["error"] == "ConfigError");

  CHECK(run({"diagnose", "--set", "design.colour=red"}).status == 3);
  CHECK(run({"diagnose", "--set", "tree.min_node=1"}).status == 3);
  CHECK(run({"diagnose", "--config", "/nonexistent/svytree.yaml"}).status == 3);

  const auto dir = testutil::scratch_dir("cli-config");
  write_file_atomic(dir / "bad.yaml", "simulate:\n  replicate: 5\n");
  const Run r = run({"simulate", "--config", (dir / "bad.yaml").string()});
  CHECK(r.status == 3);
  CHECK(error_line(r)["message"].get<std::string>().find("simulate.replicate") !=
        std::string::npos);
}

TEST_CASE("computation errors exit 1 with the module's error name") {
  const auto dir = testutil::scratch_dir("cli-computation");
  const Run r = run({"diagnose", "--set", "design.kind=srswor", "--set", "population.N=500",
                     "--n", "600", "--out", dir.string()});
  CHECK(r.status == 1);
  const auto j = error_line(r);
  CHECK(j["error"] == "InfeasibleDesign");
  CHECK(j["module"] == "design");
}

TEST_CASE("synth, diagnose and estimate write their artifacts") {
  const auto dir = testutil::scratch_dir("cli-artifacts");
  REQUIRE(run({"synth", kSmall, "--seed", "4", "--out", dir.string()}).status == 0);
  CHECK(std::filesystem::exists(dir / "frame.csv"));
  CHECK(std::filesystem::exists(dir / "config.yaml"));

  REQUIRE(run({"diagnose", kSmall, "--n", "400", "--out", dir.string()}).status == 0);
  const auto diag = nlohmann::json::parse(read_file(dir / "diagnostics.json"));
  CHECK(diag["expected_n"].get<double>() == doctest::Approx(400.0));

  // The same population read back from CSV gives the same estimate.
  const std::string csv = "--set=population.path=" + (dir / "frame.csv").string();
  const auto a = dir / "a";
  const auto b = dir / "b";
  REQUIRE(run({"estimate", kSmall, "--set=population.seed=4", "--estimator", "ht", "--out",
               a.string()})
              .status == 0);
  REQUIRE(run({"estimate", kSmall, "--set=population.source=csv", csv, "--estimator", "ht",
               "--out", b.string()})
              .status == 0);
  const auto ja = nlohmann::json::parse(read_file(a / "estimate.json"));
  const auto jb = nlohmann::json::parse(read_file(b / "estimate.json"));
  CHECK(ja["total"] == jb["total"]);
  CHECK(ja["estimator"] == "ht");
}

TEST_CASE("tree documents from the figure 1 reconstruction feed estimate") {
  const auto dir = testutil::scratch_dir("cli-figure1");
  const std::string config = std::string(SVYTREE_SOURCE_DIR) + "/configs/figure1_bartenders.yaml";
  REQUIRE(run({"tree", "--config", config, "--out", dir.string()}).status == 0);
  const Partition p = load_tree(dir / "tree.json");
  CHECK(p.study() == "bartenders");
  CHECK(p.num_boxes() >= 2);

  const Run r = run({"estimate", "--config", config, "--tree", (dir / "tree.json").string(),
                     "--out", dir.string()});
  REQUIRE(r.status == 0);
  const auto j = nlohmann::json::parse(read_file(dir / "estimate.json"));
  CHECK(j["estimator"] == "greg-tree");
  CHECK(j["study"] == "bartenders");
  CHECK(j["model"].get<std::string>().find("tree document") != std::string::npos);

  // A tree for a different study is refused.
  CHECK(run({"estimate", "--config", config, "--set=study=teachers", "--tree",
             (dir / "tree.json").string(), "--out", dir.string()})
            .status == 3);
}

TEST_CASE("simulate output is byte-identical across runs and thread counts") {
  const auto dir = testutil::scratch_dir("cli-simulate");
  auto sim = [&](const std::string& name, const std::string& threads) {
    const auto out = dir / name;
    const Run r = run({"simulate", kSmall, "--seed", "7", "--replicates", "6", "--n", "300",
                       "--threads", threads, "--svg", "--out", out.string()});
    REQUIRE(r.status == 0);
    return read_file(out / "report.csv");
  };
  const std::string a = sim("a", "1");
  CHECK(a == sim("b", "1"));
  CHECK(a == sim("c", "4"));
  CHECK(std::filesystem::exists(dir / "a" / "report.svg"));
  CHECK(std::filesystem::exists(dir / "a" / "summary.txt"));
  CHECK(read_file(dir / "a" / "config.yaml").find("population.N=20000") != std::string::npos);
}

TEST_CASE("configuration parsing") {
  const AppConfig c = parse_config(
      "seed: 9\nsimulate:\n  sample_sizes: [100, 200]\n  estimators: ht, greg-tree\n",
      {"tree.max_depth=3", "design.rates={\"1\": 1, \"2\": 3}"});
  CHECK(c.seed == 9);
  CHECK(c.simulate.base_seed == 9);
  CHECK(c.simulate.sample_sizes == std::vector<std::size_t>{100, 200});
  CHECK(c.simulate.estimators.size() == 2);
  CHECK(c.tree.max_depth == 3);
  CHECK(c.simulate.grow.max_depth == 3);
  CHECK(c.design.rates.at("2") == 3.0);

  const AppConfig l = parse_config("simulate:\n  long: true\n");
  CHECK(l.simulate.replicates == 1000);
  CHECK(l.simulate.sample_sizes.size() == 5);

  CHECK_THROWS_AS(parse_config("n: -3\n"), Error);
  CHECK_THROWS_AS(parse_config("[1, 2]\n"), Error);
  CHECK_THROWS_AS(parse_config("", {"n"}), Error);
}
