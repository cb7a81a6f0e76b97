#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "palmlab/spatial.hpp"
#include "support.hpp"

using namespace palmlab;

TEST_SUITE("spatial") {
  TEST_CASE("neighbour queries agree with brute force on the torus") {
    Rng rng = test::rng_for(20);
    for (int d = 1; d <= 3; ++d) {
      const auto g = test::torus(d, d == 3 ? 6.0 : 10.0);
      for (int trial = 0; trial < 20; ++trial) {
        const Configuration c = test::poisson(g, d == 1 ? 5.0 : 1.0, rng);
        if (c.size() < 2) continue;
        const NeighborIndex idx(c);
        for (std::size_t i = 0; i < c.size(); ++i) {
          for (double r : {0.3, 1.0, 1.4}) {
            std::vector<std::size_t> got, want;
            idx.for_each_within(i, r, [&](std::size_t j, double) { got.push_back(j); });
            for (std::size_t j = 0; j < c.size(); ++j)
              if (j != i && g.distance(c[i], c[j]) <= r) want.push_back(j);
            std::sort(got.begin(), got.end());
            CHECK(got == want);
            CHECK(idx.any_within(i, r) == !want.empty());
          }
          std::size_t best = i;
          double bd = std::numeric_limits<double>::infinity();
          for (std::size_t j = 0; j < c.size(); ++j) {
            if (j == i) continue;
            const double dj = g.distance(c[i], c[j]);
            if (dj < bd) {
              bd = dj;
              best = j;
            }
          }
          CHECK(idx.nearest_other(i) == best);
        }
        const auto q = sample_uniform(g, Window::full(g), rng);
        const kernels::Nearest n = idx.nearest(q);
        double bd = std::numeric_limits<double>::infinity();
        for (const auto& p : c.points()) bd = std::min(bd, g.distance(q, p));
        CHECK(idx.units_to_length(std::sqrt(n.sqdist)) == doctest::Approx(bd));
        CHECK(g.distance(q, c[n.index]) == doctest::Approx(bd));
      }
    }
  }

  TEST_CASE("Euclidean and affine carriers fall back correctly") {
    Rng rng = test::rng_for(21);
    const auto e = CarrierGroup::euclidean(2);
    const Window w = Window::box(e, {0, 0}, {8, 8});
    const Configuration c = sample_poisson(e, w, 1.0, rng);
    const NeighborIndex idx(c);
    for (std::size_t i = 0; i < c.size(); ++i) {
      std::size_t n = 0;
      idx.for_each_within(i, 1.0, [&](std::size_t, double) { ++n; });
      std::size_t want = 0;
      for (std::size_t j = 0; j < c.size(); ++j) want += (j != i && e.distance(c[i], c[j]) <= 1.0) ? 1 : 0;
      CHECK(n == want);
    }
    const auto a = CarrierGroup::affine_line();
    const Configuration ca = sample_poisson(a, Window::box(a, {0.5, 0}, {2, 3}), 5.0, rng);
    const NeighborIndex ia(ca);
    for (std::size_t i = 0; i < ca.size(); ++i) {
      std::size_t n = 0;
      ia.for_each_within(i, 0.5, [&](std::size_t, double) { ++n; });
      std::size_t want = 0;
      for (std::size_t j = 0; j < ca.size(); ++j) want += (j != i && a.distance(ca[i], ca[j]) <= 0.5) ? 1 : 0;
      CHECK(n == want);
    }
  }

  TEST_CASE("grid owners are nearest points") {
    Rng rng = test::rng_for(22);
    const auto g = test::torus(2, 4.0);
    const Configuration c = test::poisson(g, 2.0, rng);
    REQUIRE(c.size() >= 1);
    const NeighborIndex idx(c);
    const std::int64_t h = g.length_to_ticks(0.25);
    std::vector<std::uint32_t> owner;
    std::vector<double> sq;
    idx.nearest_on_grid(h, owner, sq);
    REQUIRE(owner.size() == 256);
    for (std::size_t k = 0; k < owner.size(); ++k) {
      const auto centre = g.point({(static_cast<double>(k / 16) + 0.5) * 0.25, (static_cast<double>(k % 16) + 0.5) * 0.25});
      double bd = std::numeric_limits<double>::infinity();
      std::size_t best = 0;
      for (std::size_t j = 0; j < c.size(); ++j) {
        const double dj = g.distance(centre, c[j]);
        if (dj < bd) {
          bd = dj;
          best = j;
        }
      }
      CHECK(owner[k] == best);
    }
  }
}
