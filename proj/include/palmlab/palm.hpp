#pragma once

#include <array>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "palmlab/factor.hpp"
#include "palmlab/process.hpp"
#include "palmlab/stats.hpp"

namespace palmlab {

/// A stationary process on a carrier, given by its sampler.
struct ProcessModel {
  std::string name;
  CarrierGroup carrier = CarrierGroup::flat_torus(2, 10.0);
  std::function<Configuration(Rng&)> sample;
  /// Nominal intensity, when known in closed form.
  std::optional<double> intensity;
};

ProcessModel poisson_model(const CarrierGroup& g, double t);
ProcessModel lattice_model(const CarrierGroup& g, double spacing);
ProcessModel delta_thinned_poisson_model(const CarrierGroup& g, double t, double delta);
ProcessModel independent_thinned_model(const CarrierGroup& g, double t, double p);
ProcessModel thickened_model(const ProcessModel& base, std::vector<GroupPoint> F);

/// Worker count: `requested` when positive, else PALMLAB_THREADS, else 1.
int resolve_threads(int requested);

/// Calls fn(i) for every i < n on `threads` workers. The first exception thrown by
/// any call is rethrown after all workers stop.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

/// Results of fn(i, rng_i) in trial order, where rng_i is seeded with
/// derive_seed(master, fnv1a64(stream), i). Independent of the worker count.
template <class T, class F>
std::vector<T> run_trials(std::uint64_t master, std::string_view stream, std::size_t n, int threads, F&& fn) {
  std::vector<T> out(n);
  const std::uint64_t id = fnv1a64(stream);
  parallel_for(n, threads, [&](std::size_t i) {
    Rng rng = make_rng(derive_seed(master, id, i));
    out[i] = fn(i, rng);
  });
  return out;
}

struct CheckOptions {
  std::uint64_t seed = 1;
  std::size_t trials = 10000;
  int threads = 1;
  double r_obs = 2.0;
  /// Core window [m, L - m)^d; negative selects L/4.
  double margin = -1.0;
  double alpha = 0.01;
  double threshold = 3.0;
  std::vector<double> radii{0.5, 1.0, 2.0};
  /// Voronoi / quadrature grid side; non-positive selects L/512.
  double grid = -1.0;
};

/// The core window used to pick roots.
Window core_window(const CarrierGroup& g, const CheckOptions& o);

/// Counts (root excluded) in the battery balls and the nearest-neighbour distance,
/// censored at r_obs (nn == r_obs means nothing closer).
struct BatteryObs {
  std::array<int, 3> counts{};
  double nn = 0.0;
  bool censored = false;
};

/// Observations grouped by trial.
struct Battery {
  std::vector<double> radii;
  double r_obs = 0.0;
  std::vector<std::vector<BatteryObs>> clusters;
  std::size_t size() const;
};

/// Battery observation at location q of the indexed configuration, skipping point `self`.
BatteryObs observe(const NeighborIndex& index, const GroupPoint& q, std::optional<std::size_t> self,
                   const std::vector<double>& radii, double r_obs);
/// Battery observation at the root of a rooted configuration.
BatteryObs observe(const RootedConfiguration& rc, const std::vector<double>& radii, double r_obs);

/// One cluster-robust homogeneity test per battery statistic at level alpha / |battery|.
std::vector<StatReport> compare_batteries(const std::string& experiment, const Battery& a, const Battery& b,
                                          double alpha);

/// Palm battery of a process: one observation per point of transform(sample) in the core.
Battery palm_battery(const ProcessModel& model, const CheckOptions& o, std::string_view stream,
                     const std::function<Configuration(const Configuration&, Rng&)>& transform = nullptr);
/// omega union {u} seen from u, for uniform locations u in the core, omega fresh samples.
Battery adjoined_root_battery(const ProcessModel& model, const CheckOptions& o, std::string_view stream);

struct PalmSampleSet {
  std::vector<std::vector<RootedConfiguration>> by_trial;
  double r_obs = 0.0;
  std::string process;
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  std::string warning;

  std::size_t size() const;
};

/// Every core point x of every trial contributes x^-1 omega clipped to B(0, r_obs).
PalmSampleSet palm_samples(const ProcessModel& model, const CheckOptions& o);

/// Relative-rate estimate of mu_0(event) with a per-trial (cluster) standard error.
StatReport palm_probability(const PalmSampleSet& ps, const std::function<bool(const RootedConfiguration&)>& event,
                            const std::string& name = "palm_probability", std::optional<double> reference = std::nullopt,
                            double threshold = 3.0);

std::vector<StatReport> check_mecke_slivnyak(const ProcessModel& model, const CheckOptions& o);

/// f(x, omega) for the CLMM identity, supported on x in `support`. When `weight`
/// and `palm_factor` are set, f = weight(x) * palm_factor(omega) and the integral
/// over G separates; otherwise `generic` is integrated on the grid per Palm sample.
struct ClmmFunction {
  std::string name;
  Window support;
  double radius = 0.0;
  std::function<double(const GroupPoint&)> weight;
  std::function<double(const RootedConfiguration&)> palm_factor;
  std::function<double(const GroupPoint&, const RootedConfiguration&)> generic;
};

std::vector<StatReport> check_clmm(const ProcessModel& model, const ClmmFunction& f, const CheckOptions& o);

/// T(0, y; omega) for a rooted configuration clipped to `radius` and a target y in it.
struct LocalTransport {
  std::string name;
  double radius = 0.0;
  std::function<double(const RootedConfiguration&, const GroupPoint& target)> fn;
};

/// Mass received against mass sent by core roots; the paired difference carries the verdict.
std::vector<StatReport> check_mtp(const ProcessModel& model, const LocalTransport& T, const CheckOptions& o);

std::vector<StatReport> check_degree_balance(const ProcessModel& model,
                                             const std::function<FactorGraph(const Configuration&)>& graph,
                                             const std::string& name, const CheckOptions& o);

std::vector<StatReport> check_palm_thinning(const ProcessModel& model, const LocalPredicate& a,
                                            const std::string& name, const CheckOptions& o);

StatReport check_palm_colouring(const ProcessModel& model, const LocalMap& p, const std::string& name,
                                const CheckOptions& o);

std::vector<StatReport> check_palm_thickening(const ProcessModel& base, const std::vector<GroupPoint>& F,
                                              const CheckOptions& o);

struct NonUnimodularParams {
  double intensity = 20.0;
  std::array<double, 2> u_lo{1.0, 0.0};
  std::array<double, 2> u_hi{2.0, 1.0};
  std::array<double, 2> f{2.0, 0.0};
  /// Torus used for the unimodular control.
  double control_side = 10.0;
  double control_intensity = 1.0;
};

std::vector<StatReport> check_nonunimodular_thickening(const NonUnimodularParams& p, const CheckOptions& o);

// Shared pieces for the nearest-neighbour test rules.
LocalTransport nearest_neighbour_transport(double radius);
LocalPredicate delta_isolation(double delta);

}  // namespace palmlab
