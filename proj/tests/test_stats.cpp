#include <doctest.h>

#include <cmath>

#include <boost/math/distributions/poisson.hpp>

#include "palmlab/error.hpp"
#include "palmlab/stats.hpp"
#include "support.hpp"

using namespace palmlab;

TEST_SUITE("stats") {
  TEST_CASE("textbook edge cases") {
    const std::vector<double> a{0.1, 0.5, 0.7, 2.0};
    CHECK(two_sample_ks(a, a).statistic == 0.0);
    const std::vector<double> e{10, 20, 30};
    const TestResult t = chi_square_gof(e, e);
    CHECK(t.statistic == 0.0);
    CHECK(t.pvalue == doctest::Approx(1.0));
    const std::vector<double> tiny{1, 2}, tiny_e{1.5, 1.5};
    CHECK_THROWS_AS(chi_square_gof(tiny, tiny_e), InsufficientData);
    const MeanSe m = mean_se(std::vector<double>{1, 2, 3, 4});
    CHECK(m.mean == 2.5);
    CHECK(m.std_error == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  }

  TEST_CASE("Pois(4) sampler passes its goodness of fit") {
    Rng rng = test::rng_for(12);
    std::poisson_distribution<int> pois(4.0);
    const int n = 100000;
    std::vector<double> obs(25, 0.0), exp(25, 0.0);
    std::vector<double> draws;
    for (int i = 0; i < n; ++i) {
      const int k = pois(rng);
      obs[std::min(k, 24)] += 1;
      draws.push_back(k);
    }
    const boost::math::poisson_distribution<double> p(4.0);
    for (int k = 0; k < 24; ++k) exp[k] = n * boost::math::pdf(p, k);
    exp[24] = n * boost::math::cdf(boost::math::complement(p, 23));
    CHECK(chi_square_gof(obs, exp).pvalue >= 0.01);
    const TestResult d = poisson_dispersion(draws);
    CHECK(d.pvalue >= 0.01);
    CHECK(d.statistic / d.df == doctest::Approx(1.0).epsilon(0.02));
  }

  TEST_CASE("KS detects a shifted sample and accepts a matching one") {
    Rng rng = test::rng_for(13);
    std::normal_distribution<double> z;
    std::vector<double> a, b, c;
    for (int i = 0; i < 5000; ++i) {
      a.push_back(z(rng));
      b.push_back(z(rng));
      c.push_back(z(rng) + 0.2);
    }
    CHECK(two_sample_ks(a, b).pvalue >= 0.01);
    CHECK(two_sample_ks(a, c).pvalue < 1e-6);
    CHECK(kolmogorov_sf(0.0) == doctest::Approx(1.0));
    CHECK(kolmogorov_sf(1.3580986) == doctest::Approx(0.05).epsilon(1e-3));
  }

  TEST_CASE("moments merge exactly") {
    Rng rng = test::rng_for(14);
    std::uniform_real_distribution<double> u(-5, 5);
    Moments a, b, c;
    for (int i = 0; i < 1000; ++i) {
      a.add(u(rng));
      b.add(u(rng));
      c.add(u(rng));
    }
    Moments ab = a, bc = b;
    ab.merge(b).merge(c);
    Moments abc = a;
    abc.merge(bc.merge(c));
    CHECK(ab == abc);
    Moments ba = b;
    ba.merge(a);
    Moments ab2 = a;
    ab2.merge(b);
    CHECK(ab2 == ba);

    const auto r1 = StatReport::from_moments("e", "s", a, 0.0);
    const auto r2 = StatReport::from_moments("e", "s", b, 0.0);
    const auto r3 = StatReport::from_moments("e", "s", c, 0.0);
    const auto left = merge(merge(r1, r2), r3);
    const auto right = merge(r1, merge(r2, r3));
    CHECK(left.estimate == right.estimate);
    CHECK(left.std_error == right.std_error);
    CHECK(left.n == 3000);
  }

  TEST_CASE("report pass rules") {
    CHECK(StatReport::from_estimate("e", "s", 1.0, 0.1, 10, 1.25).pass);
    CHECK_FALSE(StatReport::from_estimate("e", "s", 1.0, 0.1, 10, 1.5).pass);
    CHECK(StatReport::from_estimate("e", "s", 0.0, 0.0, 10, 0.0).z == 0.0);
    CHECK(StatReport::from_pvalue("e", "s", 0.02, 0.01, 5).pass);
    CHECK_FALSE(StatReport::from_pvalue("e", "s", 0.005, 0.01, 5).pass);
    const auto row = StatReport::from_estimate("a,b", "s", 1, 0, 1, std::nullopt).csv_row();
    CHECK(row.rfind("\"a,b\",s,", 0) == 0);
  }

  TEST_CASE("clustered ratio and homogeneity") {
    const std::vector<double> y{1, 2, 3}, w{2, 4, 6};
    const MeanSe r = clustered_ratio(y, w);
    CHECK(r.mean == doctest::Approx(0.5));
    CHECK(r.std_error == doctest::Approx(0.0));

    Rng rng = test::rng_for(15);
    std::poisson_distribution<int> p1(1.0), p2(1.3);
    auto hist = [&](std::poisson_distribution<int>& d, int clusters, int size) {
      ClusterHistogram h;
      h.bins = 8;
      for (int c = 0; c < clusters; ++c) {
        std::vector<int> bins;
        for (int i = 0; i < size; ++i) bins.push_back(std::min(d(rng), 7));
        h.add_cluster(bins);
      }
      return h;
    };
    const ClusterHistogram a = hist(p1, 400, 25), b = hist(p1, 5000, 1), c = hist(p2, 400, 25);
    CHECK(clustered_homogeneity(a, b).pvalue >= 0.01);
    CHECK(clustered_homogeneity(a, c).pvalue < 1e-6);
    CHECK(clustered_homogeneity(a, a).pvalue == doctest::Approx(1.0));
    ClusterHistogram one;
    one.bins = 8;
    one.add_cluster({1});
    CHECK_THROWS_AS(clustered_homogeneity(one, a), InsufficientData);
  }

  TEST_CASE("homogeneity holds its level on unbalanced cluster sizes") {
    Rng rng = test::rng_for(16);
    std::poisson_distribution<int> d(0.8);
    int rejections = 0;
    const int reps = 200;
    for (int r = 0; r < reps; ++r) {
      ClusterHistogram a, b;
      a.bins = b.bins = 10;
      for (int c = 0; c < 400; ++c) {
        std::vector<int> bins;
        for (int i = 0; i < 25; ++i) bins.push_back(std::min(d(rng), 9));
        a.add_cluster(bins);
      }
      for (int c = 0; c < 1000; ++c) b.add_cluster({std::min(d(rng), 9)});
      rejections += clustered_homogeneity(a, b).pvalue < 0.05 ? 1 : 0;
    }
    // Binomial(200, 0.05) exceeds 20 with probability below 0.1%.
    CHECK(rejections <= 20);
  }
}
