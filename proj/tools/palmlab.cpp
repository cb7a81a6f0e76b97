#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "palmlab/harness.hpp"

namespace {

struct Args {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::string> out;
  int threads = 0;
  bool paper_scale = false;
  bool dumps = false;
};

int run_one(const std::string& name, const Args& a) {
  using namespace palmlab;
  ExperimentConfig cfg = default_config(name, a.paper_scale);
  if (!a.config.empty()) cfg = load_config(a.config, cfg);
  if (a.seed) cfg.seed = *a.seed;
  if (a.trials) cfg.trials = *a.trials;
  if (a.out) cfg.output.dir = *a.out;
  if (a.dumps) cfg.output.dumps = true;
  const RunManifest m = run(cfg, a.threads);
  std::cout << m.csv();
  std::fprintf(stderr, "%s %s: %zu reports, config %s, %.2f s, artifacts in %s\n", m.pass ? "PASS" : "FAIL",
               name.c_str(), m.reports.size(), m.config_hash.c_str(), m.wall_time_s, cfg.output.dir.c_str());
  return exit_code(m);
}

const std::map<std::string, std::string>& descriptions() {
  static const std::map<std::string, std::string> d{
      {"sample", "draw configurations and write them as JSONL"},
      {"verify-poisson", "count laws of the Poisson sampler in three windows"},
      {"verify-mecke", "Palm battery against the process with an adjoined root"},
      {"verify-clmm", "both sides of the Campbell-Little-Mecke formula"},
      {"verify-mtp", "mass transport with nearest-neighbour unit mass"},
      {"verify-degrees", "Palm in-degree against out-degree of factor graphs"},
      {"verify-thinning", "intensities of independent and delta thinnings"},
      {"verify-thickening", "intensity and Palm law of a constant thickening"},
      {"verify-nonunimodular", "thickened counts on the affine group against quadrature"},
      {"verify-palm-calculus", "Palm laws of thinnings, colourings and thickenings"},
      {"alloc", "balanced allocation convergence and post-conditions"},
      {"extra-head", "rerooting at the allocation owner of the origin"},
      {"voronoi-volume", "Palm expected volume of the root's Voronoi cell"},
      {"clump", "clumping axioms on random configurations"},
      {"zline", "clumpings plus the z-line path built from them"},
      {"encode-marks", "local encoding of binary marks and its round trip"}};
  return d;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Palm calculus laboratory for invariant point processes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(palmlab::kVersion));
  Args args;
  std::string chosen;
  for (const auto& name : palmlab::experiment_names()) {
    CLI::App* sub = app.add_subcommand(name, descriptions().at(name));
    sub->add_option("--config", args.config, "strict JSON experiment configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", args.seed, "master seed");
    sub->add_option("--trials", args.trials, "number of independent trials")->check(CLI::PositiveNumber);
    sub->add_option("--out", args.out, "output directory");
    sub->add_option("--threads", args.threads, "worker threads (default: PALMLAB_THREADS, else 1)")
        ->check(CLI::NonNegativeNumber);
    sub->add_flag("--paper-scale", args.paper_scale, "use the larger trial counts");
    sub->add_flag("--dump", args.dumps, "also write sample configurations as JSONL");
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    return run_one(chosen, args);
  } catch (const palmlab::UsageError& e) {
    std::fprintf(stderr, "palmlab: error: %s\n", e.what());
    return 2;
  } catch (const palmlab::PreconditionError& e) {
    std::fprintf(stderr, "palmlab: precondition failed: %s\n", e.what());
    return 2;
  } catch (const palmlab::InsufficientData& e) {
    std::fprintf(stderr, "palmlab: insufficient data: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "palmlab: internal error: %s\n", e.what());
    return 3;
  }
}
