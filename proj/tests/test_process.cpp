#include <doctest.h>

#include <cmath>

#include <boost/math/distributions/poisson.hpp>

#include "palmlab/error.hpp"
#include "palmlab/process.hpp"
#include "support.hpp"

using namespace palmlab;

TEST_SUITE("process") {
  TEST_CASE("Poisson sampler") {
    const auto g = test::torus();
    Rng rng = test::rng_for(4);
    CHECK(test::poisson(g, 0.0, rng).empty());
    CHECK_THROWS_AS(test::poisson(g, -1.0, rng), UsageError);
    Moments m;
    for (int i = 0; i < 10000; ++i) m.add(static_cast<double>(test::poisson(g, 2.0, rng).size()));
    CHECK(std::abs(m.mean() - 200.0) <= 3 * std::sqrt(200.0 / 10000));
  }

  TEST_CASE("void probability of the Poisson process") {
    const auto g = test::torus();
    Rng rng = test::rng_for(5);
    const auto centre = g.point({5, 5});
    const auto ball = Window::box(g, {4.5, 4.5}, {5.5, 5.5});
    int empty = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const Configuration c = sample_poisson(g, ball, 1.0, rng);
      bool any = false;
      for (const auto& p : c.points()) any = any || g.distance(p, centre) <= 0.5;
      empty += any ? 0 : 1;
    }
    CHECK(std::abs(static_cast<double>(empty) / n - std::exp(-M_PI / 4)) <= 0.01);
  }

  TEST_CASE("count law in a window of volume 4 is Pois(4)") {
    const auto g = test::torus();
    Rng rng = test::rng_for(6);
    const auto u = Window::box(g, {1, 1}, {3, 3});
    std::vector<double> obs(30, 0.0), exp(30, 0.0);
    const int n = 10000;
    for (int i = 0; i < n; ++i) obs[std::min<std::size_t>(29, count(test::poisson(g, 1.0, rng), u))] += 1;
    const boost::math::poisson_distribution<double> p(4.0);
    for (int k = 0; k < 29; ++k) exp[k] = n * boost::math::pdf(p, k);
    exp[29] = n * boost::math::cdf(boost::math::complement(p, 28));
    CHECK(chi_square_gof(obs, exp).pvalue >= 0.01);
    CHECK(count(Configuration::empty(g, Window::full(g)), u) == 0);
  }

  TEST_CASE("disjoint counts are uncorrelated and window choice does not matter") {
    const auto g = test::torus();
    Rng rng = test::rng_for(7);
    const auto u = Window::box(g, {0, 0}, {2, 2});
    const auto v = Window::box(g, {5, 5}, {8, 8});
    std::vector<Configuration> cs;
    Moments prod;
    for (int i = 0; i < 10000; ++i) {
      cs.push_back(test::poisson(g, 1.5, rng));
      prod.add((count(cs.back(), u) - 6.0) * (count(cs.back(), v) - 13.5) / std::sqrt(6.0 * 13.5));
    }
    CHECK(std::abs(prod.mean()) <= 3 * prod.std_error());
    const StatReport a = estimate_intensity(cs, u, 1.5);
    const StatReport b = estimate_intensity(cs, v, 1.5);
    CHECK(a.pass);
    CHECK(b.pass);
    CHECK(std::abs(a.estimate - b.estimate) <= 3 * std::hypot(a.std_error, b.std_error));
  }

  TEST_CASE("lattice shift") {
    const auto g1 = test::torus(1);
    Rng rng = test::rng_for(8);
    const Configuration c = sample_lattice_shift(g1, 2.0, rng);
    REQUIRE(c.size() == 5);
    for (std::size_t i = 0; i + 1 < c.size(); ++i) CHECK(g1.distance(c[i], c[i + 1]) == doctest::Approx(2.0));
    CHECK_THROWS_AS(sample_lattice_shift(g1, 3.0, rng), UsageError);
    const auto g = test::torus();
    std::vector<Configuration> cs;
    for (int i = 0; i < 1000; ++i) cs.push_back(sample_lattice_shift(g, 2.0, rng));
    const StatReport r = estimate_intensity(cs, Window::full(g), 0.25);
    CHECK(r.estimate == 0.25);
    CHECK(r.std_error == 0.0);
  }

  TEST_CASE("iid marks") {
    const auto g = test::torus();
    Rng rng = test::rng_for(9);
    CHECK(attach_iid_marks(Configuration::empty(g, Window::full(g)), MarkSpace::alphabet(2), rng).size() == 0);
    CHECK_THROWS_AS(attach_iid_marks(test::poisson(g, 1, rng), MarkSpace::alphabet(0), rng), UsageError);
    Moments ones;
    std::vector<double> unit;
    while (ones.count() < 100000) {
      const Configuration c = test::poisson(g, 1.0, rng);
      for (double m : attach_iid_marks(c, MarkSpace::alphabet(2), rng).marks) ones.add(m);
      for (double m : attach_iid_marks(c, MarkSpace::unit_interval(), rng).marks) unit.push_back(m);
    }
    CHECK(std::abs(ones.mean() - 0.5) <= 3 * ones.std_error());
    CHECK(ks_one_sample(unit, [](double x) { return std::clamp(x, 0.0, 1.0); }).pvalue >= 0.01);
  }

  TEST_CASE("translate and reroot") {
    const auto g1 = test::torus(1);
    const Configuration c = test::config(g1, {{1}, {2}});
    CHECK(translate(c, g1.identity()) == c);
    CHECK(translate(c, g1.point({9})) == test::config(g1, {{0}, {1}}));
    const Configuration r = reroot(test::config(g1, {{2}, {5}}), g1.point({2})).config();
    CHECK(r == test::config(g1, {{0}, {3}}));
    CHECK_THROWS_AS(reroot(c, g1.point({4})), UsageError);

    const auto g = test::torus();
    Rng rng = test::rng_for(10);
    for (int i = 0; i < 200; ++i) {
      const Configuration x = test::poisson(g, 1.0, rng);
      const auto h = sample_uniform(g, Window::full(g), rng);
      CHECK(translate(translate(x, h), g.inv(h)) == x);
      if (x.size() < 2) continue;
      const RootedConfiguration rc = reroot(x, x[0]);
      CHECK(reroot(rc.config(), g.identity()) == rc);
      // Going to x[1] and back to the image of the old root restores the original.
      const GroupPoint y = rc.points()[1 == rc.root_index() ? 0 : 1];
      const RootedConfiguration there = reroot(rc.config(), y);
      CHECK(reroot(there.config(), g.inv(y)) == rc);
      // Groupoid composition: (w, y)(y^-1 w, z) = (w, y z).
      const BirootedPair a(rc, y);
      const GroupPoint z = there.points()[there.root_index() == 0 ? 1 : 0];
      const BirootedPair ab = a.compose(BirootedPair(there, z));
      CHECK(ab.target() == g.mul(y, z));
      CHECK(ab.target_config() == reroot(rc.config(), g.mul(y, z)));
    }
  }

  TEST_CASE("Euclidean translations that leave the window are range errors") {
    const auto e = CarrierGroup::euclidean(2);
    const Configuration c(e, Window::box(e, {0, 0}, {1, 1}), {e.point({0.5, 0.5})});
    CHECK_THROWS_AS(translate(c, e.point({2, 0})), RangeError);
  }

  TEST_CASE("JSONL round trip is bit-identical") {
    const auto g = test::torus();
    Rng rng = test::rng_for(11);
    for (int i = 0; i < 50; ++i) {
      const Configuration c = test::poisson(g, 1.0, rng);
      const std::string line = to_jsonl(c);
      CHECK(parse_jsonl(line).base == c);
      CHECK(to_jsonl(parse_jsonl(line).base) == line);
      const MarkedConfiguration mc = attach_iid_marks(c, MarkSpace::unit_interval(), rng);
      CHECK(parse_jsonl(to_jsonl(mc)) == mc);
    }
  }
}
