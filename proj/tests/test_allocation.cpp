#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "palmlab/allocation.hpp"
#include "palmlab/error.hpp"
#include "support.hpp"

using namespace palmlab;

TEST_SUITE("allocation") {
  TEST_CASE("singleton owns the whole torus") {
    const auto g = test::torus();
    const Allocation a = balanced_allocation(test::config(g, {{3, 4}}), 0.25);
    CHECK(a.converged);
    CHECK(a.unclaimed_cells() == 0);
    CHECK(a.volumes() == std::vector<double>{100.0});
    CHECK(a.capacity == 100.0);
    CHECK(extra_head_index(a) == 0);
    CHECK(extra_head_point(a) == g.point({3, 4}));
    CHECK(allocation_violations(a).empty());
  }

  TEST_CASE("two antipodal points split evenly") {
    const auto g = test::torus();
    const Allocation a = balanced_allocation(test::config(g, {{2.5, 2.5}, {7.5, 7.5}}), 0.25);
    CHECK(a.converged);
    const auto v = a.volumes();
    CHECK(v[0] + v[1] == 100.0);
    CHECK(std::abs(v[0] - 50.0) <= 0.25 * 40);
    const std::size_t head = extra_head_index(a);
    CHECK(head == extra_head_index(balanced_allocation(test::config(g, {{2.5, 2.5}, {7.5, 7.5}}), 0.25)));
    CHECK(allocation_violations(a).empty());
  }

  TEST_CASE("Poisson configurations converge and meet the post-conditions") {
    const auto g = test::torus();
    Rng rng = test::rng_for(40);
    const double h = 10.0 / 512;
    for (int i = 0; i < 5; ++i) {
      const Configuration c = test::poisson(g, 1.0, rng);
      const Allocation a = balanced_allocation(c, h, 0.01);
      REQUIRE(a.converged);
      CHECK(allocation_violations(a).empty());
      const auto v = a.volumes();
      const double cap = 100.0 / c.size();
      for (double x : v) {
        CHECK(x >= cap - 0.01);
        CHECK(x <= cap + h * h);
      }
      CHECK(a.unclaimed_cells() * a.cell_volume() <= 0.01 * 100.0);
      CHECK(std::is_sorted(a.claimed_history.begin(), a.claimed_history.end()));
      const auto counts = a.cell_counts();
      CHECK(std::accumulate(counts.begin(), counts.end(), std::int64_t{0}) + a.unclaimed_cells() ==
            a.cells_per_side * a.cells_per_side);
    }
  }

  TEST_CASE("allocation commutes with grid-aligned translations") {
    const auto g = test::torus();
    Rng rng = test::rng_for(41);
    const double h = 10.0 / 128;
    const std::int64_t hticks = g.length_to_ticks(h);
    for (int i = 0; i < 5; ++i) {
      const Configuration c = test::poisson(g, 1.0, rng);
      std::uniform_int_distribution<std::int64_t> k(0, 127);
      const std::int64_t sx = k(rng), sy = k(rng);
      const GroupPoint shift = g.from_ticks({static_cast<std::int32_t>(sx * hticks), static_cast<std::int32_t>(sy * hticks), 0});
      const Configuration tc = translate(c, shift);
      const Allocation a = balanced_allocation(c, h), b = balanced_allocation(tc, h);
      // Point j of c maps to point perm[j] of tc.
      std::vector<std::uint32_t> perm(c.size());
      for (std::size_t j = 0; j < c.size(); ++j) perm[j] = static_cast<std::uint32_t>(*tc.find(g.mul(shift, c[j])));
      bool same = true;
      for (std::int64_t x = 0; x < 128; ++x) {
        for (std::int64_t y = 0; y < 128; ++y) {
          const std::uint32_t o = a.owner[x * 128 + y];
          const std::uint32_t t = b.owner[((x + sx) % 128) * 128 + (y + sy) % 128];
          same = same && (o == Allocation::kUnclaimed ? t == o : t == perm[o]);
        }
      }
      CHECK(same);
    }
  }

  TEST_CASE("unclaimed origin is signalled") {
    const auto g = test::torus();
    Rng rng = test::rng_for(42);
    int seen = 0;
    for (int i = 0; i < 200 && seen == 0; ++i) {
      const Allocation a = balanced_allocation(test::poisson(g, 1.0, rng), 10.0 / 64, 0.5, 1);
      if (a.owner[0] == Allocation::kUnclaimed) {
        CHECK_THROWS_AS(extra_head_index(a), UnclaimedOrigin);
        ++seen;
      }
    }
    CHECK_THROWS_AS(balanced_allocation(Configuration::empty(g, Window::full(g)), 0.25), UsageError);
  }

  TEST_CASE("Voronoi Palm volume") {
    const auto g = test::torus();
    CheckOptions o;
    o.trials = 50;
    o.grid = 1.0 / 64;
    const StatReport lat = check_voronoi_palm_volume(lattice_model(g, 2.0), o);
    CHECK(lat.estimate == 4.0);
    CHECK(lat.std_error == 0.0);
    CheckOptions p;
    p.trials = 300;
    p.grid = 10.0 / 256;
    CHECK(check_voronoi_palm_volume(poisson_model(g, 1.0), p).pass);
  }

  TEST_CASE("allocation checks and extra head on the lattice") {
    const auto g = test::torus();
    CheckOptions o;
    o.trials = 40;
    o.grid = 10.0 / 256;
    AllocationCheck ac;
    for (const auto& r : check_allocation(poisson_model(g, 1.0), ac, o)) CHECK_MESSAGE(r.pass, r.statistic);
    ac.adjoined_reference = false;
    const auto eh = check_extra_head(lattice_model(g, 2.0), ac, o);
    REQUIRE(!eh.empty());
    CHECK_MESSAGE(eh.front().pass, eh.front().statistic);
  }
}
