#pragma once

#include <cstdint>
#include <vector>

#include "palmlab/process.hpp"

namespace palmlab::test {

inline CarrierGroup torus(int d = 2, double L = 10.0) { return CarrierGroup::flat_torus(d, L); }

inline Rng rng_for(std::uint64_t seed) { return make_rng(derive_seed(seed, 12345, 0)); }

inline Configuration poisson(const CarrierGroup& g, double t, Rng& rng) {
  return sample_poisson(g, Window::full(g), t, rng);
}

inline Configuration config(const CarrierGroup& g, const std::vector<std::vector<double>>& pts) {
  std::vector<GroupPoint> v;
  for (const auto& p : pts) v.push_back(g.point(std::span<const double>(p.data(), p.size())));
  return Configuration(g, Window::full(g), std::move(v));
}

}  // namespace palmlab::test
