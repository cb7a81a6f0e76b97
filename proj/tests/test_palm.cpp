#include <doctest.h>

#include <cmath>

#include "palmlab/error.hpp"
#include "palmlab/palm.hpp"
#include "support.hpp"

using namespace palmlab;

namespace {

CheckOptions opts(std::size_t trials, std::uint64_t seed = 1, int threads = 1) {
  CheckOptions o;
  o.trials = trials;
  o.seed = seed;
  o.threads = threads;
  return o;
}

bool all_pass(const std::vector<StatReport>& rs) {
  for (const auto& r : rs)
    if (!r.pass) return false;
  return !rs.empty();
}

}  // namespace

TEST_SUITE("palm") {
  TEST_CASE("palm_probability edge cases") {
    const auto g = test::torus();
    const PalmSampleSet ps = palm_samples(poisson_model(g, 1.0), opts(200));
    REQUIRE(ps.size() > 0);
    const StatReport sure = palm_probability(ps, [](const RootedConfiguration&) { return true; });
    CHECK(sure.estimate == 1.0);
    CHECK(sure.std_error == 0.0);
    const StatReport never = palm_probability(ps, [](const RootedConfiguration&) { return false; });
    CHECK(never.estimate == 0.0);

    const PalmSampleSet none = palm_samples(poisson_model(g, 0.0), opts(50));
    CHECK(none.size() == 0);
    CHECK(none.warning.rfind("no_samples", 0) == 0);
    CHECK(palm_probability(none, [](const RootedConfiguration&) { return true; }).note == "no_samples");
  }

  TEST_CASE("lattice Palm samples are a single atom") {
    const auto g1 = test::torus(1);
    CheckOptions o = opts(100);
    o.r_obs = 2.4;
    const PalmSampleSet ps = palm_samples(lattice_model(g1, 2.0), o);
    REQUIRE(ps.size() > 0);
    const Configuration atom = test::config(g1, {{8}, {0}, {2}});
    for (const auto& trial : ps.by_trial)
      for (const auto& rc : trial) CHECK(rc.config().points() == atom.points());
  }

  TEST_CASE("Palm probability of delta isolation matches the void probability") {
    const auto g = test::torus();
    const PalmSampleSet ps = palm_samples(poisson_model(g, 1.0), opts(4000, 7));
    auto isolated = [](const RootedConfiguration& rc) {
      for (const auto& p : rc.points())
        if (p != rc.carrier().identity() && rc.carrier().distance(rc.carrier().identity(), p) <= 0.5) return false;
      return true;
    };
    const StatReport r = palm_probability(ps, isolated, "isolated", std::exp(-M_PI / 4));
    CHECK(std::abs(r.estimate - std::exp(-M_PI / 4)) <= 0.01);
  }

  TEST_CASE("Mecke-Slivnyak accepts Poisson and rejects the lattice") {
    const auto g = test::torus();
    CHECK(all_pass(check_mecke_slivnyak(poisson_model(g, 1.0), opts(1500, 2))));
    CHECK_FALSE(all_pass(check_mecke_slivnyak(lattice_model(g, 1.0), opts(300, 2))));
    const auto vacuous = check_mecke_slivnyak(poisson_model(g, 0.0), opts(50, 2));
    REQUIRE(vacuous.size() == 1);
    CHECK(vacuous[0].note == "no_samples");
  }

  TEST_CASE("mass transport and degree balance") {
    const auto g = test::torus();
    const ProcessModel m = delta_thinned_poisson_model(g, 1.0, 0.3);
    CHECK(all_pass(check_mtp(m, nearest_neighbour_transport(1.5), opts(1000, 3))));
    CHECK(all_pass(check_degree_balance(m, nearest_neighbor_digraph, "nn", opts(1000, 3))));
  }

  TEST_CASE("non-unimodular thickening separates from the naive count") {
    NonUnimodularParams p;
    const auto rs = check_nonunimodular_thickening(p, opts(2000, 4));
    REQUIRE(!rs.empty());
    CHECK(all_pass(rs));
  }

  TEST_CASE("results do not depend on the worker count") {
    const auto g = test::torus();
    const ProcessModel m = poisson_model(g, 1.0);
    const auto one = check_mecke_slivnyak(m, opts(300, 9, 1));
    const auto four = check_mecke_slivnyak(m, opts(300, 9, 4));
    REQUIRE(one.size() == four.size());
    for (std::size_t i = 0; i < one.size(); ++i) CHECK(one[i].csv_row() == four[i].csv_row());
    const auto a = run_trials<std::uint64_t>(5, "s", 64, 1, [](std::size_t, Rng& r) { return r(); });
    const auto b = run_trials<std::uint64_t>(5, "s", 64, 3, [](std::size_t, Rng& r) { return r(); });
    CHECK(a == b);
  }

  TEST_CASE("parallel_for rethrows worker errors") {
    CHECK_THROWS_AS(parallel_for(16, 4,
                                 [](std::size_t i) {
                                   if (i == 7) throw PreconditionError("boom");
                                 }),
                    PreconditionError);
  }

  TEST_CASE("option validation") {
    const auto g = test::torus();
    CheckOptions o = opts(10);
    o.r_obs = 3.0;
    CHECK_THROWS_AS(palm_samples(poisson_model(g, 1.0), o), UsageError);
    CHECK_THROWS_AS(poisson_model(g, -1.0), UsageError);
  }
}
