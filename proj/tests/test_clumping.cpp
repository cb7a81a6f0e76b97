#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "palmlab/clumping.hpp"
#include "palmlab/error.hpp"
#include "support.hpp"

using namespace palmlab;

namespace {

using Edges = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

// Point order along a z-line path.
std::vector<std::uint32_t> path_order(const FactorGraph& z, std::size_t n) {
  std::vector<int> next(n, -1), indeg(n, 0);
  for (const auto& [a, b] : z.edges) {
    next[a] = static_cast<int>(b);
    ++indeg[b];
  }
  std::vector<std::uint32_t> order;
  for (std::size_t i = 0; i < n; ++i)
    if (indeg[i] == 0)
      for (int k = static_cast<int>(i); k >= 0 && order.size() <= n; k = next[k]) order.push_back(static_cast<std::uint32_t>(k));
  return order;
}

}  // namespace

TEST_SUITE("clumping") {
  TEST_CASE("small examples") {
    const auto g = test::torus();
    const ClumpingSequence two = build_clumping(test::config(g, {{1, 1}, {3, 3}}));
    REQUIRE(two.levels.size() == 2);
    CHECK(two.class_count(0) == 2);
    CHECK(two.class_count(1) == 1);

    const ClumpingSequence four = build_clumping(test::config(g, {{1, 1}, {1.2, 1}, {6, 6}, {6.2, 6}}));
    REQUIRE(four.levels.size() == 3);
    CHECK(four.classes(1) == std::vector<std::vector<std::uint32_t>>{{0, 1}, {2, 3}});
    CHECK(four.class_count(2) == 1);
    CHECK(verify_clumping(four).ok);

    const ClumpingSequence one = build_clumping(test::config(g, {{4, 4}}));
    CHECK(verify_clumping(one).ok);
    CHECK(z_line_factor(one).edges.empty());
    CHECK_THROWS_AS(build_clumping(Configuration::empty(g, Window::full(g))), UsageError);

    const ClumpingSequence three = build_clumping(test::config(g, {{1, 1}, {2, 1}, {5, 1}}));
    const FactorGraph z = z_line_factor(three);
    CHECK(z.edges.size() == 2);
    for (auto d : z.out_degrees()) CHECK(d <= 1);
    for (auto d : z.in_degrees()) CHECK(d <= 1);
  }

  TEST_CASE("adversarial sequences fail with a witness") {
    const auto g = test::torus();
    ClumpingSequence s;
    s.base = test::config(g, {{1, 1}, {2, 2}, {3, 3}});
    s.levels = {{0, 1, 2}, {0, 0, 2}, {0, 1, 0}, {0, 0, 0}};
    const ClumpingVerdict v = verify_clumping(s);
    CHECK_FALSE(v.ok);
    CHECK(v.axiom == "ascending");
    CHECK(v.witness == std::pair<std::size_t, std::size_t>{0, 1});

    ClumpingSequence open;
    open.base = s.base;
    open.levels = {{0, 1, 2}, {0, 0, 2}};
    const ClumpingVerdict o = verify_clumping(open);
    CHECK_FALSE(o.ok);
    CHECK(o.axiom == "one-ended");
    CHECK_THROWS_AS(z_line_factor(open), UsageError);

    ClumpingSequence bad_label;
    bad_label.base = s.base;
    bad_label.levels = {{0, 1, 2}, {1, 1, 1}};
    CHECK(verify_clumping(bad_label).axiom == "partition");
  }

  TEST_CASE("random configurations satisfy the axioms and the z-line shape") {
    const auto g = test::torus();
    Rng rng = test::rng_for(50);
    for (int i = 0; i < 1000; ++i) {
      const Configuration c = test::poisson(g, 1.0, rng);
      if (c.empty()) continue;
      const ClumpingSequence s = build_clumping(c);
      const ClumpingVerdict v = verify_clumping(s);
      CHECK_MESSAGE(v.ok, v.message);
      for (std::size_t l = 1; l < s.levels.size(); ++l) CHECK(s.class_count(l) * 2 <= s.class_count(l - 1));
      CHECK(s.levels.size() - 1 <= static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(c.size())))));
      const FactorGraph z = z_line_factor(s);
      CHECK(z.edges.size() == c.size() - 1);
      const auto order = path_order(z, c.size());
      REQUIRE(order.size() == c.size());
      CHECK(std::set<std::uint32_t>(order.begin(), order.end()).size() == c.size());
      std::vector<std::size_t> pos(c.size());
      for (std::size_t k = 0; k < order.size(); ++k) pos[order[k]] = k;
      for (std::size_t l = 0; l < s.levels.size(); ++l) {
        for (const auto& cls : s.classes(l)) {
          std::size_t lo = c.size(), hi = 0;
          for (auto p : cls) {
            lo = std::min(lo, pos[p]);
            hi = std::max(hi, pos[p]);
          }
          CHECK(hi - lo + 1 == cls.size());
        }
      }
    }
  }

  TEST_CASE("partition structure commutes with grid translations") {
    const auto g = test::torus();
    Rng rng = test::rng_for(51);
    std::uniform_int_distribution<std::int32_t> u(0, g.period() - 1);
    for (int i = 0; i < 300; ++i) {
      const Configuration c = test::poisson(g, 1.0, rng);
      if (c.empty()) continue;
      const GroupPoint h = g.from_ticks({u(rng), u(rng), 0});
      const Configuration tc = translate(c, h);
      const ClumpingSequence a = build_clumping(c), b = build_clumping(tc);
      REQUIRE(a.levels.size() == b.levels.size());
      std::vector<std::size_t> perm(c.size());
      for (std::size_t j = 0; j < c.size(); ++j) perm[j] = *tc.find(g.mul(h, c[j]));
      for (std::size_t l = 0; l < a.levels.size(); ++l) {
        std::set<std::vector<std::size_t>> ca, cb;
        for (const auto& cls : a.classes(l)) {
          std::vector<std::size_t> m;
          for (auto p : cls) m.push_back(perm[p]);
          std::sort(m.begin(), m.end());
          ca.insert(m);
        }
        for (const auto& cls : b.classes(l)) cb.insert(std::vector<std::size_t>(cls.begin(), cls.end()));
        CHECK(ca == cb);
      }
    }
  }

  TEST_CASE("json dump") {
    const auto g = test::torus();
    const ClumpingSequence s = build_clumping(test::config(g, {{1, 1}, {3, 3}}));
    CHECK(clumping_json(s) == R"({"levels":[[[0],[1]],[[0,1]]]})");
  }
}
