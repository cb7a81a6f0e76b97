#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "palmlab/error.hpp"
#include "palmlab/factor.hpp"
#include "support.hpp"

using namespace palmlab;

namespace {

using Edges = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

GroupPoint grid_element(const CarrierGroup& g, Rng& rng) {
  std::uniform_int_distribution<std::int32_t> u(0, g.period() - 1);
  return g.from_ticks({u(rng), g.dim() > 1 ? u(rng) : 0, g.dim() > 2 ? u(rng) : 0});
}

}  // namespace

TEST_SUITE("factor") {
  TEST_CASE("delta thinning examples") {
    const auto g1 = test::torus(1);
    CHECK(delta_thinning(test::config(g1, {{3}}), 0.5) == test::config(g1, {{3}}));
    CHECK(delta_thinning(test::config(g1, {{0}, {0.3}}), 0.5).empty());
    CHECK(delta_thinning(test::config(g1, {{0}, {0.3}, {5}}), 0.5) == test::config(g1, {{5}}));
    CHECK(delta_thinning(test::config(g1, {{0.2}, {9.9}}), 0.5).empty());
    CHECK_THROWS_AS(delta_thinning(test::config(g1, {{1}}), 2.5), UsageError);
  }

  TEST_CASE("independent thinning") {
    const auto g = test::torus();
    Rng rng = test::rng_for(23);
    const Configuration c = test::poisson(g, 1.0, rng);
    const MarkedConfiguration mc = attach_iid_marks(c, MarkSpace::unit_interval(), rng);
    CHECK(independent_thinning(mc, 1.0) == c);
    CHECK(independent_thinning(mc, 0.0).empty());
    CHECK_THROWS_AS(independent_thinning(attach_iid_marks(c, MarkSpace::alphabet(2), rng), 0.5), UsageError);
    std::vector<Configuration> thinned;
    for (int i = 0; i < 10000; ++i)
      thinned.push_back(independent_thinning(attach_iid_marks(test::poisson(g, 2.0, rng), MarkSpace::unit_interval(), rng), 0.25));
    CHECK(estimate_intensity(thinned, Window::full(g), 0.5).pass);
  }

  TEST_CASE("constant thickening and F-separation") {
    const auto g = test::torus();
    const Configuration c = test::config(g, {{1, 1}, {4, 7}});
    const std::vector<GroupPoint> id{g.identity()};
    CHECK(constant_thickening(c, id) == c);
    CHECK(check_F_separated(c, id));
    const GroupPoint f = g.point({0.2, 0});
    const std::vector<GroupPoint> F{g.identity(), f};
    CHECK(constant_thickening(test::config(g, {{1, 1}}), F) == test::config(g, {{1, 1}, {1.2, 1}}));
    CHECK_FALSE(check_F_separated(test::config(g, {{0, 0}, {0.2, 0}}), F));
    const auto v = find_F_violation(test::config(g, {{0, 0}, {0.2, 0}}), F);
    REQUIRE(v.has_value());
    CHECK(v->first == 0);
    CHECK(v->second == 1);
    CHECK_THROWS_AS(constant_thickening(test::config(g, {{0, 0}, {0.2, 0}}), F), PreconditionError);

    Rng rng = test::rng_for(24);
    const std::vector<GroupPoint> F3{g.identity(), g.point({0.2, 0}), g.point({0, 0.2})};
    for (int i = 0; i < 500; ++i) {
      const Configuration t = delta_thinning(test::poisson(g, 1.0, rng), 0.5);
      REQUIRE(check_F_separated(t, F3));
      CHECK(constant_thickening(t, F3).size() == 3 * t.size());
    }
  }

  TEST_CASE("thinning_from_set and marking_from_map") {
    const auto g = test::torus();
    Rng rng = test::rng_for(25);
    const LocalPredicate always{0.0, [](const RootedConfiguration&) { return true; }};
    const LocalPredicate isolated{0.5, [](const RootedConfiguration& r) { return r.size() == 1; }};
    const LocalPredicate crowded{1.0, [](const RootedConfiguration& r) { return r.size() >= 3; }};
    for (int i = 0; i < 1000; ++i) {
      const Configuration c = test::poisson(g, 1.0, rng);
      CHECK(thinning_from_set(c, always) == c);
      CHECK(thinning_from_set(c, isolated) == delta_thinning(c, 0.5));
      std::vector<GroupPoint> brute;
      for (std::size_t a = 0; a < c.size(); ++a) {
        int near = 0;
        for (std::size_t b = 0; b < c.size(); ++b) near += (b != a && g.distance(c[a], c[b]) <= 1.0) ? 1 : 0;
        if (near >= 2) brute.push_back(c[a]);
      }
      CHECK(thinning_from_set(c, crowded) == Configuration(g, Window::full(g), brute));
      const LocalMap indicator{1.0, MarkSpace::alphabet(2), [&](const RootedConfiguration& r) { return crowded.fn(r) ? 1.0 : 0.0; }};
      const MarkedConfiguration m = marking_from_map(c, indicator);
      std::vector<GroupPoint> kept;
      for (std::size_t a = 0; a < c.size(); ++a)
        if (m.marks[a] == 1.0) kept.push_back(c[a]);
      CHECK(Configuration(g, Window::full(g), kept) == thinning_from_set(c, crowded));
      const auto h = grid_element(g, rng);
      CHECK(marking_from_map(translate(c, h), indicator) == translate(m, h));
    }
    const LocalMap constant{0.0, MarkSpace::alphabet(2), [](const RootedConfiguration&) { return 1.0; }};
    for (double m : marking_from_map(test::poisson(g, 1.0, rng), constant).marks) CHECK(m == 1.0);
    CHECK_THROWS_AS(thinning_from_set(test::poisson(g, 1.0, rng), LocalPredicate{2.5, always.fn}), PreconditionError);
  }

  TEST_CASE("factor graphs") {
    const auto g = test::torus();
    const Configuration line = test::config(g, {{1, 1}, {2, 1}, {3, 1}});
    CHECK(distance_R_graph(line, 1.0).edges == Edges{{0, 1}, {1, 0}, {1, 2}, {2, 1}});
    CHECK(distance_R_graph(line, 0.5).edges.empty());
    const LocalArrowPredicate never{1.0, [](const RootedConfiguration&, const GroupPoint&) { return false; }};
    CHECK(graph_from_arrow_set(line, never).edges.empty());
    const Configuration two = test::config(g, {{1, 1}, {5, 5}});
    CHECK(nearest_neighbor_digraph(two).edges == Edges{{0, 1}, {1, 0}});
    CHECK_THROWS_AS(nearest_neighbor_digraph(test::config(g, {{1, 1}})), UsageError);

    Rng rng = test::rng_for(26);
    const double R = 1.2;
    const LocalArrowPredicate within{R, [&](const RootedConfiguration& r, const GroupPoint& t) {
                                       return r.carrier().distance(r.carrier().identity(), t) <= R;
                                     }};
    for (int i = 0; i < 1000; ++i) {
      const Configuration c = test::poisson(g, 1.0, rng);
      const FactorGraph dr = distance_R_graph(c, R);
      CHECK(graph_from_arrow_set(c, within) == dr);
      Edges brute;
      for (std::uint32_t a = 0; a < c.size(); ++a)
        for (std::uint32_t b = 0; b < c.size(); ++b)
          if (a != b && g.distance(c[a], c[b]) <= R) brute.emplace_back(a, b);
      CHECK(dr.edges == brute);
      const auto h = grid_element(g, rng);
      CHECK(distance_R_graph(translate(c, h), R).edges.size() == dr.edges.size());
      if (c.size() < 2) continue;
      const FactorGraph nn = nearest_neighbor_digraph(c);
      const auto out = nn.out_degrees();
      CHECK(std::all_of(out.begin(), out.end(), [](std::uint32_t k) { return k == 1; }));
      for (const auto& [a, b] : nn.edges) {
        for (std::size_t j = 0; j < c.size(); ++j) {
          if (j == a) continue;
          const double dj = g.distance(c[a], c[j]), db = g.distance(c[a], c[b]);
          CHECK((dj > db || (dj == db && j >= b)));
        }
      }
      const auto in = nn.in_degrees();
      CHECK(std::accumulate(in.begin(), in.end(), 0u) == c.size());
    }
  }

  TEST_CASE("Voronoi partition") {
    const auto g = test::torus();
    const VoronoiPartition one = voronoi_partition(test::config(g, {{3, 3}}), 0.25);
    CHECK(one.volumes() == std::vector<double>{100.0});
    const VoronoiPartition two = voronoi_partition(test::config(g, {{0, 0}, {5, 5}}), 0.25);
    const auto v = two.volumes();
    CHECK(v[0] + v[1] == 100.0);
    CHECK(std::abs(v[0] - 50.0) <= 0.25 * 40);
    CHECK_THROWS_AS(voronoi_partition(Configuration::empty(g, Window::full(g)), 0.25), UsageError);
    Rng rng = test::rng_for(27);
    for (int i = 0; i < 20; ++i) {
      const Configuration c = test::poisson(g, 1.0, rng);
      if (c.empty()) continue;
      const auto vol = voronoi_partition(c, 10.0 / 64).volumes();
      CHECK(std::accumulate(vol.begin(), vol.end(), 0.0) == 100.0);
    }
  }

  TEST_CASE("input/output decomposition") {
    const auto g = test::torus();
    Rng rng = test::rng_for(28);
    for (int i = 0; i < 1000; ++i) {
      const Configuration c = test::poisson(g, 1.0, rng);
      const auto id = input_output_decomposition([](const Configuration& x) { return x; }, c);
      CHECK(std::all_of(id.marks.begin(), id.marks.end(), [](double m) { return m == static_cast<int>(Colour::Purple); }));
      const auto none = input_output_decomposition(
          [](const Configuration& x) { return Configuration::empty(x.carrier(), x.window()); }, c);
      CHECK(std::all_of(none.marks.begin(), none.marks.end(), [](double m) { return m == static_cast<int>(Colour::Red); }));
      CHECK(project_output(none).empty());
      auto thin = [](const Configuration& x) { return delta_thinning(x, 0.5); };
      const auto dec = input_output_decomposition(thin, c);
      const Configuration kept = thin(c);
      for (std::size_t k = 0; k < dec.size(); ++k) {
        CHECK(dec.marks[k] != static_cast<int>(Colour::Blue));
        CHECK((dec.marks[k] == static_cast<int>(Colour::Purple)) == kept.contains(dec.base[k]));
      }
      CHECK(project_output(dec) == kept);
    }
  }

  TEST_CASE("local mark encoding") {
    const auto g = test::torus();
    const double delta = 0.5;
    const MarkedConfiguration none(Configuration::empty(g, Window::full(g)), MarkSpace::alphabet(2), {});
    CHECK(local_encode_marks(none, delta).empty());
    const MarkedConfiguration plus(test::config(g, {{5, 5}}), MarkSpace::alphabet(2), {1.0});
    const Configuration enc = local_encode_marks(plus, delta);
    CHECK(enc.size() == 9);
    CHECK(local_decode_marks(enc, delta) == plus);
    const MarkedConfiguration crowded(test::config(g, {{5, 5}, {5.3, 5}}), MarkSpace::alphabet(2), {1.0, 0.0});
    CHECK_THROWS_AS(local_encode_marks(crowded, delta), PreconditionError);
    Rng rng = test::rng_for(29);
    for (int i = 0; i < 1000; ++i) {
      const MarkedConfiguration mc =
          attach_iid_marks(delta_thinning(test::poisson(g, 1.0, rng), delta), MarkSpace::alphabet(2), rng);
      const Configuration e = local_encode_marks(mc, delta);
      std::size_t plus_count = 0;
      for (double m : mc.marks) plus_count += m == 1.0 ? 1 : 0;
      CHECK(e.size() == mc.size() + 8 * plus_count + 4 * (mc.size() - plus_count));
      CHECK(local_decode_marks(e, delta) == mc);
    }
  }

  TEST_CASE("equivariance under grid translations") {
    const auto g = test::torus();
    Rng rng = test::rng_for(30);
    const std::vector<GroupPoint> F{g.identity(), g.point({0.2, 0}), g.point({0, 0.2})};
    for (int i = 0; i < 1000; ++i) {
      const Configuration c = test::poisson(g, 1.0, rng);
      const auto h = grid_element(g, rng);
      const Configuration tc = translate(c, h);
      CHECK(delta_thinning(tc, 0.5) == translate(delta_thinning(c, 0.5), h));
      const Configuration sep = delta_thinning(c, 0.5);
      CHECK(constant_thickening(translate(sep, h), F) == translate(constant_thickening(sep, F), h));
      const MarkedConfiguration mc = attach_iid_marks(sep, MarkSpace::alphabet(2), rng);
      CHECK(local_encode_marks(translate(mc, h), 0.5) == translate(local_encode_marks(mc, 0.5), h));
    }
  }
}
