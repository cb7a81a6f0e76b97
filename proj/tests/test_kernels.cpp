#include <doctest.h>

#include <cstring>
#include <random>
#include <vector>

#include "palmlab/kernels.hpp"
#include "support.hpp"

using namespace palmlab;
using namespace palmlab::kernels;

namespace {

struct Cloud {
  std::vector<std::int32_t> t[3];
  std::vector<double> r[3];
  std::vector<std::uint32_t> labels;
  TorusView tv;
  RealView rv;
};

Cloud make_cloud(std::size_t n, int dim, std::int32_t period, Rng& rng) {
  Cloud c;
  std::uniform_int_distribution<std::int32_t> u(0, period - 1);
  std::uniform_real_distribution<double> x(-50.0, 50.0);
  for (int k = 0; k < dim; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      c.t[k].push_back(u(rng));
      c.r[k].push_back(x(rng));
    }
  }
  for (std::size_t i = 0; i < n; ++i) c.labels.push_back(static_cast<std::uint32_t>(n - i));
  // Force exact distance ties for the tie-break rule.
  if (n > 3) {
    for (int k = 0; k < dim; ++k) {
      c.t[k][2] = c.t[k][1];
      c.r[k][2] = c.r[k][1];
    }
  }
  for (int k = 0; k < dim; ++k) {
    c.tv.axis[k] = c.t[k].data();
    c.rv.axis[k] = c.r[k].data();
  }
  c.tv.n = c.rv.n = n;
  c.tv.dim = c.rv.dim = dim;
  c.tv.period = period;
  return c;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("scalar and AVX2 kernels agree bit for bit") {
    const KernelTable& s = scalar_table();
    const KernelTable* v = avx2_table();
    if (!v) {
      MESSAGE("AVX2 unavailable on this machine; only the scalar table is exercised");
      return;
    }
    Rng rng = test::rng_for(3);
    const std::int32_t period = 10 << 26;
    for (int dim = 1; dim <= 3; ++dim) {
      for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 9u, 31u, 64u, 257u}) {
        Cloud c = make_cloud(n, dim, period, rng);
        std::uniform_int_distribution<std::int32_t> u(0, period - 1);
        std::int32_t q[3] = {u(rng), u(rng), u(rng)};
        double qr[3] = {1.5, -2.25, 0.125};
        std::vector<double> a(n), b(n);
        s.torus_sqdist(c.tv, q, a.data());
        v->torus_sqdist(c.tv, q, b.data());
        CHECK(same_bits(a, b));
        s.real_sqdist(c.rv, qr, a.data());
        v->real_sqdist(c.rv, qr, b.data());
        CHECK(same_bits(a, b));
        for (std::uint32_t skip : {kNoSkip, n ? c.labels[0] : 0u}) {
          const Nearest x = s.torus_nearest(c.tv, c.labels.data(), q, skip);
          const Nearest y = v->torus_nearest(c.tv, c.labels.data(), q, skip);
          CHECK(x.index == y.index);
          CHECK(std::memcmp(&x.sqdist, &y.sqdist, sizeof(double)) == 0);
          const Nearest xr = s.real_nearest(c.rv, c.labels.data(), qr, skip);
          const Nearest yr = v->real_nearest(c.rv, c.labels.data(), qr, skip);
          CHECK(xr.index == yr.index);
        }
        // Query at a point with a forced tie: both pick the smaller label.
        if (n > 3) {
          std::int32_t tq[3] = {c.t[0][1], dim > 1 ? c.t[1][1] : 0, dim > 2 ? c.t[2][1] : 0};
          const Nearest x = s.torus_nearest(c.tv, c.labels.data(), tq, kNoSkip);
          CHECK(x.sqdist == 0.0);
          CHECK(x.index == c.labels[2]);
          CHECK(v->torus_nearest(c.tv, c.labels.data(), tq, kNoSkip).index == x.index);
        }
        for (double r2 : {0.0, 1e12, 1e15, 1e17}) {
          CHECK(s.torus_count_within(c.tv, q, r2) == v->torus_count_within(c.tv, q, r2));
          CHECK(s.real_count_within(c.rv, qr, r2 * 1e-14) == v->real_count_within(c.rv, qr, r2 * 1e-14));
        }
      }
    }
  }

  TEST_CASE("active table honours the dispatch") {
    const KernelTable& t = active();
    CHECK((t.name == scalar_table().name || (avx2_table() && t.name == avx2_table()->name)));
  }
}
