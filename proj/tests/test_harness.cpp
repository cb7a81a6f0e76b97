#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "palmlab/harness.hpp"

using namespace palmlab;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string error_of(const std::string& text, const std::string& name = "verify-poisson") {
  try {
    parse_config(text, default_config(name));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("every subcommand has a valid default") {
    CHECK(experiment_names().size() == 16);
    for (const auto& n : experiment_names()) {
      const ExperimentConfig c = default_config(n);
      CHECK(c.experiment.name == n);
      CHECK_NOTHROW(validate(c));
      CHECK(default_config(n, true).trials >= c.trials);
    }
    CHECK_THROWS_AS(default_config("nope"), UsageError);
  }

  TEST_CASE("strict parsing") {
    CHECK(error_of(R"({"trials": 5, "seed": 3})").empty());
    const ExperimentConfig c = parse_config(R"({"trials": 5, "seed": 3, "group": {"L": 12}})", default_config("verify-poisson"));
    CHECK(c.trials == 5);
    CHECK(c.seed == 3);
    CHECK(c.group.L == 12.0);
    CHECK(error_of(R"({"trails": 5})").find("trails") != std::string::npos);
    CHECK(error_of(R"({"group": {"size": 5}})").find("group.size") != std::string::npos);
    CHECK(error_of(R"({"trials": "many"})").find("trials") != std::string::npos);
    CHECK(error_of(R"({"trials": -1})").find("trials") != std::string::npos);
    CHECK(error_of(R"({"experiment": {"name": "clump"}})").find("does not match") != std::string::npos);
    const std::string syntax = error_of("{\n  \"trials\": 5,\n  \"seed\": }\n");
    CHECK(syntax.rfind("line 3, column", 0) == 0);
  }

  TEST_CASE("range validation") {
    CHECK(error_of(R"({"experiment": {"r_obs": 2.5}})").find("L/4") != std::string::npos);
    CHECK_FALSE(error_of(R"({"experiment": {"R": 3}})", "verify-degrees").empty());
    CHECK_FALSE(error_of(R"({"process": {"kind": "lattice", "spacing": 3}})").empty());
    CHECK_FALSE(error_of(R"({"process": {"intensity": -1}})").empty());
    CHECK_FALSE(error_of(R"({"group": {"kind": "sphere"}})").empty());
    CHECK_FALSE(error_of(R"({"experiment": {"radii": [0.5, 3]}})").empty());
  }

  TEST_CASE("config hash follows the canonical form") {
    const ExperimentConfig a = default_config("verify-mecke");
    ExperimentConfig b = a;
    b.output.dir = "elsewhere";
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    b.seed = 2;
    CHECK(config_hash(a) != config_hash(b));
    CHECK(parse_config(canonical_json(a), default_config("verify-mecke")).seed == a.seed);
    CHECK(config_hash(parse_config(canonical_json(a), default_config("verify-mecke"))) == config_hash(a));
  }

  TEST_CASE("runs write reproducible outputs") {
    const auto dir = std::filesystem::temp_directory_path() / "palmlab-harness-test";
    std::filesystem::remove_all(dir);
    ExperimentConfig c = default_config("verify-mecke");
    c.trials = 200;
    c.output.dir = (dir / "a").string();
    const RunManifest one = run(c, 1);
    CHECK(exit_code(one) == 0);
    CHECK(std::filesystem::exists(dir / "a" / "report.csv"));
    CHECK(std::filesystem::exists(dir / "a" / "manifest.json"));
    c.output.dir = (dir / "b").string();
    const RunManifest four = run(c, 4);
    CHECK(slurp(dir / "a" / "report.csv") == slurp(dir / "b" / "report.csv"));
    CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
    CHECK(one.config_hash == config_hash(c));

    ExperimentConfig lat = default_config("verify-mecke");
    lat.trials = 200;
    lat.process.kind = "lattice";
    lat.process.spacing = 1.0;
    CHECK(exit_code(run(lat, 2, false)) == 1);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("pgm header") {
    const std::string pgm = owner_pgm({0, 1, 0xFFFFFFFFu, 2}, 2);
    CHECK(pgm.rfind("P5\n2 2\n65535\n", 0) == 0);
    CHECK(pgm.size() == std::string("P5\n2 2\n65535\n").size() + 8);
  }
}
