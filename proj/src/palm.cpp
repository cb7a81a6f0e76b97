#include "palmlab/palm.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "palmlab/error.hpp"

namespace palmlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

double ball_volume(int d, double r) {
  switch (d) {
    case 1: return 2.0 * r;
    case 2: return kPi * r * r;
    default: return 4.0 / 3.0 * kPi * r * r * r;
  }
}

void check_battery_radii(const std::vector<double>& radii, double r_obs) {
  if (radii.empty() || radii.size() > 3) throw UsageError("battery takes one to three radii");
  for (double r : radii) {
    if (!(r > 0.0) || r > r_obs) throw UsageError("battery radii must lie in (0, r_obs]");
  }
}

// Number of adjoined-root locations per reference trial.
std::size_t reference_locations(const ProcessModel& m, const Window& core) {
  if (!m.intensity) return 16;
  return static_cast<std::size_t>(std::max<long long>(1, std::llround(*m.intensity * haar_volume(core))));
}

struct PairedSums {
  double out = 0.0;
  double in = 0.0;
  double roots = 0.0;
};

std::vector<StatReport> paired_reports(const std::string& experiment, const std::string& out_name,
                                       const std::string& in_name, const std::vector<PairedSums>& trials,
                                       double threshold) {
  std::vector<double> y_out, y_in, y_diff, w;
  for (const auto& t : trials) {
    y_out.push_back(t.out);
    y_in.push_back(t.in);
    y_diff.push_back(t.in - t.out);
    w.push_back(t.roots);
  }
  const MeanSe o = clustered_ratio(y_out, w);
  const MeanSe i = clustered_ratio(y_in, w);
  const MeanSe d = clustered_ratio(y_diff, w);
  double roots = 0.0;
  for (double x : w) roots += x;
  const auto n = static_cast<std::int64_t>(roots);
  std::vector<StatReport> r;
  r.push_back(StatReport::from_estimate(experiment, out_name, o.mean, o.std_error, n, std::nullopt, threshold));
  r.push_back(StatReport::from_estimate(experiment, in_name, i.mean, i.std_error, n, std::nullopt, threshold));
  r.push_back(StatReport::from_estimate(experiment, in_name + "-" + out_name, d.mean, d.std_error, n, 0.0, threshold));
  return r;
}

Window check_core(const CarrierGroup& g, const CheckOptions& o) {
  const Window core = core_window(g, o);
  if (!(o.r_obs > 0.0) || !(o.r_obs < g.side() / 4.0)) throw UsageError("r_obs must lie in (0, L/4)");
  return core;
}

}  // namespace

ProcessModel poisson_model(const CarrierGroup& g, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw UsageError("intensity must be finite and non-negative");
  if (g.kind() != CarrierKind::FlatTorus) throw UsageError("process models live on the torus");
  ProcessModel m;
  m.name = "poisson(t=" + fmt(t) + ")";
  m.carrier = g;
  m.intensity = t;
  const Window w = Window::full(g);
  m.sample = [g, w, t](Rng& rng) { return sample_poisson(g, w, t, rng); };
  return m;
}

ProcessModel lattice_model(const CarrierGroup& g, double spacing) {
  ProcessModel m;
  m.name = "lattice(s=" + fmt(spacing) + ")";
  m.carrier = g;
  m.intensity = std::pow(spacing, -g.dim());
  Rng probe(0);
  (void)sample_lattice_shift(g, spacing, probe);  // validates the spacing now
  m.sample = [g, spacing](Rng& rng) { return sample_lattice_shift(g, spacing, rng); };
  return m;
}

ProcessModel delta_thinned_poisson_model(const CarrierGroup& g, double t, double delta) {
  ProcessModel m = poisson_model(g, t);
  m.name = "delta_thinned_poisson(t=" + fmt(t) + ",delta=" + fmt(delta) + ")";
  m.intensity = t * std::exp(-t * ball_volume(g.dim(), delta));
  auto base = m.sample;
  m.sample = [base, delta](Rng& rng) { return delta_thinning(base(rng), delta); };
  return m;
}

ProcessModel independent_thinned_model(const CarrierGroup& g, double t, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw UsageError("retention probability must lie in [0, 1]");
  ProcessModel m = poisson_model(g, t);
  m.name = "independent_thinned_poisson(t=" + fmt(t) + ",p=" + fmt(p) + ")";
  m.intensity = p * t;
  auto base = m.sample;
  m.sample = [base, p](Rng& rng) {
    const Configuration c = base(rng);
    return independent_thinning(attach_iid_marks(c, MarkSpace::unit_interval(), rng), p);
  };
  return m;
}

ProcessModel thickened_model(const ProcessModel& base, std::vector<GroupPoint> F) {
  ProcessModel m = base;
  m.name = "thickened(" + base.name + ",|F|=" + std::to_string(F.size()) + ")";
  if (base.intensity) m.intensity = *base.intensity * static_cast<double>(F.size());
  auto inner = base.sample;
  m.sample = [inner, F = std::move(F)](Rng& rng) { return constant_thickening(inner(rng), F); };
  return m;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PALMLAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0 && v <= 1024) return static_cast<int>(v);
  }
  return 1;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

Window core_window(const CarrierGroup& g, const CheckOptions& o) {
  if (g.kind() != CarrierKind::FlatTorus) throw UsageError("Palm estimation runs on the torus");
  const double L = g.side();
  const double m = o.margin < 0.0 ? L / 4.0 : o.margin;
  if (!(o.r_obs + m < L / 2.0)) throw UsageError("r_obs + margin must stay below L/2");
  if (!(2.0 * m < L)) throw UsageError("core window is empty");
  std::vector<double> lo(g.dim(), m), hi(g.dim(), L - m);
  return Window::box(g, lo, hi);
}

std::size_t Battery::size() const {
  std::size_t n = 0;
  for (const auto& c : clusters) n += c.size();
  return n;
}

BatteryObs observe(const NeighborIndex& index, const GroupPoint& q, std::optional<std::size_t> self,
                   const std::vector<double>& radii, double r_obs) {
  const Configuration& c = index.config();
  const CarrierGroup& G = c.carrier();
  BatteryObs obs;
  obs.nn = r_obs;
  obs.censored = true;
  const double search = r_obs * (1.0 + 1e-12) + 2.0 * G.tick();
  index.for_each_within(q, search, [&](std::size_t j, double) {
    if (self && j == *self) return;
    const double d = G.distance(q, c[j]);
    if (d > r_obs) return;
    for (std::size_t k = 0; k < radii.size(); ++k) {
      if (d <= radii[k]) ++obs.counts[k];
    }
    if (obs.censored || d < obs.nn) {
      obs.nn = d;
      obs.censored = false;
    }
  });
  return obs;
}

BatteryObs observe(const RootedConfiguration& rc, const std::vector<double>& radii, double r_obs) {
  const CarrierGroup& G = rc.carrier();
  const GroupPoint e = G.identity();
  BatteryObs obs;
  obs.nn = r_obs;
  obs.censored = true;
  for (std::size_t j = 0; j < rc.size(); ++j) {
    if (j == rc.root_index()) continue;
    const double d = G.distance(e, rc.points()[j]);
    if (d > r_obs) continue;
    for (std::size_t k = 0; k < radii.size(); ++k) {
      if (d <= radii[k]) ++obs.counts[k];
    }
    if (obs.censored || d < obs.nn) {
      obs.nn = d;
      obs.censored = false;
    }
  }
  return obs;
}

std::vector<StatReport> compare_batteries(const std::string& experiment, const Battery& a, const Battery& b,
                                          double alpha) {
  if (a.radii != b.radii || a.r_obs != b.r_obs) throw UsageError("batteries were collected with different settings");
  const std::size_t stats = a.radii.size() + 1;
  const double level = alpha / static_cast<double>(stats);
  const auto n = static_cast<std::int64_t>(a.size() + b.size());
  std::vector<StatReport> out;

  auto run = [&](const std::string& name, std::size_t bins, const std::function<int(const BatteryObs&)>& bin_of) {
    ClusterHistogram ha{bins, {}}, hb{bins, {}};
    for (const auto* pair : {&a, &b}) {
      ClusterHistogram& h = pair == &a ? ha : hb;
      for (const auto& cluster : pair->clusters) {
        std::vector<int> v;
        v.reserve(cluster.size());
        for (const auto& o : cluster) v.push_back(bin_of(o));
        h.add_cluster(v);
      }
    }
    const TestResult t = clustered_homogeneity(ha, hb);
    StatReport r = StatReport::from_pvalue(experiment, name, t.pvalue, level, n);
    r.note = "wald=" + fmt(t.statistic) + " df=" + fmt(t.df) + " alpha/" + std::to_string(stats);
    out.push_back(std::move(r));
  };

  for (std::size_t k = 0; k < a.radii.size(); ++k) {
    int top = 0;
    for (const auto* s : {&a, &b}) {
      for (const auto& cl : s->clusters) {
        for (const auto& o : cl) top = std::max(top, o.counts[k]);
      }
    }
    run("count_r=" + fmt(a.radii[k]), static_cast<std::size_t>(top) + 1, [k](const BatteryObs& o) { return o.counts[k]; });
  }

  std::vector<double> pooled;
  for (const auto* s : {&a, &b}) {
    for (const auto& cl : s->clusters) {
      for (const auto& o : cl) {
        if (!o.censored) pooled.push_back(o.nn);
      }
    }
  }
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> edges;
  if (!pooled.empty()) {
    for (int q = 1; q < 10; ++q) edges.push_back(pooled[pooled.size() * q / 10]);
  }
  const int censored_bin = static_cast<int>(edges.size()) + 1;
  run("nn_distance", edges.size() + 2, [&](const BatteryObs& o) {
    if (o.censored) return censored_bin;
    return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), o.nn) - edges.begin());
  });
  return out;
}

Battery palm_battery(const ProcessModel& model, const CheckOptions& o, std::string_view stream,
                     const std::function<Configuration(const Configuration&, Rng&)>& transform) {
  check_battery_radii(o.radii, o.r_obs);
  const Window core = check_core(model.carrier, o);
  Battery b{o.radii, o.r_obs, {}};
  b.clusters = run_trials<std::vector<BatteryObs>>(o.seed, stream, o.trials, o.threads, [&](std::size_t, Rng& rng) {
    Configuration c = model.sample(rng);
    if (transform) c = transform(c, rng);
    std::vector<BatteryObs> obs;
    if (c.empty()) return obs;
    NeighborIndex index(c);
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (core.contains(c[i])) obs.push_back(observe(index, c[i], i, o.radii, o.r_obs));
    }
    return obs;
  });
  return b;
}

Battery adjoined_root_battery(const ProcessModel& model, const CheckOptions& o, std::string_view stream) {
  check_battery_radii(o.radii, o.r_obs);
  const Window core = check_core(model.carrier, o);
  const std::size_t k = reference_locations(model, core);
  Battery b{o.radii, o.r_obs, {}};
  b.clusters = run_trials<std::vector<BatteryObs>>(o.seed, stream, o.trials, o.threads, [&](std::size_t, Rng& rng) {
    const Configuration c = model.sample(rng);
    std::vector<BatteryObs> obs;
    std::vector<GroupPoint> at;
    for (std::size_t j = 0; j < k; ++j) at.push_back(sample_uniform(model.carrier, core, rng));
    if (c.empty()) {
      for (std::size_t j = 0; j < k; ++j) obs.push_back(BatteryObs{{}, o.r_obs, true});
      return obs;
    }
    NeighborIndex index(c);
    for (const auto& u : at) obs.push_back(observe(index, u, std::nullopt, o.radii, o.r_obs));
    return obs;
  });
  return b;
}

std::size_t PalmSampleSet::size() const {
  std::size_t n = 0;
  for (const auto& t : by_trial) n += t.size();
  return n;
}

PalmSampleSet palm_samples(const ProcessModel& model, const CheckOptions& o) {
  const Window core = check_core(model.carrier, o);
  PalmSampleSet ps;
  ps.r_obs = o.r_obs;
  ps.process = model.name;
  ps.seed = o.seed;
  ps.trials = o.trials;
  ps.by_trial = run_trials<std::vector<RootedConfiguration>>(
      o.seed, "palm-samples", o.trials, o.threads, [&](std::size_t, Rng& rng) {
        const Configuration c = model.sample(rng);
        std::vector<RootedConfiguration> out;
        if (c.empty()) return out;
        NeighborIndex index(c);
        for (std::size_t i = 0; i < c.size(); ++i) {
          if (core.contains(c[i])) out.push_back(clip_rooted(index, i, o.r_obs));
        }
        return out;
      });
  if (ps.size() == 0) ps.warning = "no_samples: the process put no point in the core window";
  return ps;
}

StatReport palm_probability(const PalmSampleSet& ps, const std::function<bool(const RootedConfiguration&)>& event,
                            const std::string& name, std::optional<double> reference, double threshold) {
  std::vector<double> y, w;
  for (const auto& trial : ps.by_trial) {
    double hits = 0.0;
    for (const auto& rc : trial) hits += event(rc) ? 1.0 : 0.0;
    y.push_back(hits);
    w.push_back(static_cast<double>(trial.size()));
  }
  const MeanSe r = clustered_ratio(y, w);
  StatReport rep = StatReport::from_estimate("palm:" + ps.process, name, r.mean, r.std_error,
                                             static_cast<std::int64_t>(ps.size()), reference, threshold);
  if (ps.size() == 0) rep.note = "no_samples";
  return rep;
}

std::vector<StatReport> check_mecke_slivnyak(const ProcessModel& model, const CheckOptions& o) {
  const std::string exp = "mecke:" + model.name;
  const Battery palm = palm_battery(model, o, "mecke-palm");
  if (palm.size() == 0) return {StatReport::exact(exp, "battery", true, 0, "no_samples")};
  const Battery ref = adjoined_root_battery(model, o, "mecke-reference");
  return compare_batteries(exp, palm, ref, o.alpha);
}

std::vector<StatReport> check_clmm(const ProcessModel& model, const ClmmFunction& f, const CheckOptions& o) {
  const CarrierGroup& G = model.carrier;
  if (!model.intensity) throw UsageError("CLMM check needs the process intensity");
  check_clip_radius(G, f.radius);
  const bool separable = static_cast<bool>(f.weight) && static_cast<bool>(f.palm_factor);
  if (!separable && !f.generic) throw UsageError("CLMM function has no definition");
  const Window core = check_core(G, o);
  const std::string exp = "clmm:" + f.name;

  auto nonneg = [](double v) {
    if (!(v >= 0.0)) throw UsageError("CLMM function must be non-negative");
    return v;
  };
  auto value = [&](const GroupPoint& x, const RootedConfiguration& rc) {
    return nonneg(separable ? nonneg(f.weight(x)) * nonneg(f.palm_factor(rc)) : f.generic(x, rc));
  };

  // Midpoint grid over the support with cells no larger than the Voronoi grid.
  const double h = o.grid > 0.0 ? o.grid : G.side() / 512.0;
  std::array<std::int64_t, 3> cells{1, 1, 1};
  std::array<double, 3> step{};
  double cell_vol = 1.0;
  for (int k = 0; k < G.dim(); ++k) {
    const double ext = f.support.hi[k] - f.support.lo[k];
    cells[k] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(ext / h - 1e-9)));
    step[k] = ext / static_cast<double>(cells[k]);
    cell_vol *= step[k];
  }
  auto integrate = [&](const std::function<double(const GroupPoint&)>& g) {
    double s = 0.0;
    std::array<std::int64_t, 3> i{};
    for (i[0] = 0; i[0] < cells[0]; ++i[0]) {
      for (i[1] = 0; i[1] < cells[1]; ++i[1]) {
        for (i[2] = 0; i[2] < cells[2]; ++i[2]) {
          std::array<double, 3> x{};
          for (int k = 0; k < G.dim(); ++k) x[k] = f.support.lo[k] + (static_cast<double>(i[k]) + 0.5) * step[k];
          s += g(G.point(std::span<const double>(x.data(), G.dim())));
        }
      }
    }
    return s * cell_vol;
  };

  const auto lhs = run_trials<double>(o.seed, "clmm-lhs", o.trials, o.threads, [&](std::size_t, Rng& rng) {
    const Configuration c = model.sample(rng);
    if (c.empty()) return 0.0;
    NeighborIndex index(c);
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (f.support.contains(c[i])) s += value(c[i], clip_rooted(index, i, f.radius));
    }
    return s;
  });
  Moments ml;
  for (double v : lhs) ml.add(v);

  const double weight_integral = separable ? integrate([&](const GroupPoint& x) { return nonneg(f.weight(x)); }) : 1.0;
  struct Sums {
    double y = 0.0;
    double w = 0.0;
  };
  const auto rhs = run_trials<Sums>(o.seed, "clmm-rhs", o.trials, o.threads, [&](std::size_t, Rng& rng) {
    const Configuration c = model.sample(rng);
    Sums s;
    if (c.empty()) return s;
    NeighborIndex index(c);
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!core.contains(c[i])) continue;
      const RootedConfiguration rc = clip_rooted(index, i, f.radius);
      s.y += separable ? nonneg(f.palm_factor(rc)) : integrate([&](const GroupPoint& x) { return value(x, rc); });
      s.w += 1.0;
    }
    return s;
  });
  std::vector<double> y, w;
  for (const auto& s : rhs) {
    y.push_back(s.y);
    w.push_back(s.w);
  }
  const MeanSe palm = clustered_ratio(y, w);
  const double scale = *model.intensity * weight_integral;
  const double rhs_est = scale * palm.mean;
  const double rhs_se = scale * palm.std_error;

  const auto n = static_cast<std::int64_t>(o.trials);
  std::vector<StatReport> r;
  r.push_back(StatReport::from_moments(exp, "lhs", ml, std::nullopt, o.threshold));
  r.push_back(StatReport::from_estimate(exp, "rhs", rhs_est, rhs_se, n, std::nullopt, o.threshold));
  r.push_back(StatReport::from_estimate(exp, "lhs-rhs", ml.mean() - rhs_est,
                                        std::sqrt(ml.std_error() * ml.std_error() + rhs_se * rhs_se), n, 0.0,
                                        o.threshold));
  return r;
}

std::vector<StatReport> check_mtp(const ProcessModel& model, const LocalTransport& T, const CheckOptions& o) {
  check_clip_radius(model.carrier, T.radius);
  const Window core = check_core(model.carrier, o);
  const auto sums = run_trials<PairedSums>(o.seed, "mtp", o.trials, o.threads, [&](std::size_t, Rng& rng) {
    const Configuration c = model.sample(rng);
    PairedSums s;
    if (c.empty()) return s;
    NeighborIndex index(c);
    std::vector<double> in(c.size(), 0.0), out(c.size(), 0.0);
    for (std::size_t x = 0; x < c.size(); ++x) {
      const ClippedRoot clip = clip_rooted_with_sources(index, x, T.radius);
      const auto& pts = clip.rooted.points();
      for (std::size_t k = 0; k < pts.size(); ++k) {
        if (k == clip.rooted.root_index()) continue;
        const double m = T.fn(clip.rooted, pts[k]);
        if (!(m >= 0.0)) throw UsageError("transport mass must be non-negative");
        out[x] += m;
        in[clip.source[k]] += m;
      }
    }
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!core.contains(c[i])) continue;
      s.out += out[i];
      s.in += in[i];
      s.roots += 1.0;
    }
    return s;
  });
  return paired_reports("mtp:" + T.name + ":" + model.name, "mass_out", "mass_in", sums, o.threshold);
}

std::vector<StatReport> check_degree_balance(const ProcessModel& model,
                                             const std::function<FactorGraph(const Configuration&)>& graph,
                                             const std::string& name, const CheckOptions& o) {
  const Window core = check_core(model.carrier, o);
  const auto sums = run_trials<PairedSums>(o.seed, "degrees", o.trials, o.threads, [&](std::size_t, Rng& rng) {
    const Configuration c = model.sample(rng);
    PairedSums s;
    if (c.size() < 2) return s;
    const FactorGraph g = graph(c);
    const auto od = g.out_degrees();
    const auto id = g.in_degrees();
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!core.contains(c[i])) continue;
      s.out += od[i];
      s.in += id[i];
      s.roots += 1.0;
    }
    return s;
  });
  return paired_reports("degrees:" + name + ":" + model.name, "outdeg", "indeg", sums, o.threshold);
}

std::vector<StatReport> check_palm_thinning(const ProcessModel& model, const LocalPredicate& a,
                                            const std::string& name, const CheckOptions& o) {
  check_clip_radius(model.carrier, a.radius);
  check_battery_radii(o.radii, o.r_obs);
  const Window core = check_core(model.carrier, o);
  const std::string exp = "palm-thinning:" + name + ":" + model.name;

  struct Conditioned {
    std::vector<BatteryObs> obs;
    double roots = 0.0;
  };
  const double big_r = o.r_obs + a.radius;
  if (!(big_r < model.carrier.side() / 2.0)) throw UsageError("r_obs plus the rule radius must stay below L/2");
  const auto cond = run_trials<Conditioned>(o.seed, "thinning-conditioned", o.trials, o.threads,
                                            [&](std::size_t, Rng& rng) {
    const Configuration c = model.sample(rng);
    Conditioned out;
    if (c.empty()) return out;
    NeighborIndex index(c);
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!core.contains(c[i])) continue;
      out.roots += 1.0;
      if (!a.fn(clip_rooted(index, i, a.radius))) continue;
      // Thin the rooted sample itself; decisions within r_obs only see points inside the clip.
      const RootedConfiguration big = clip_rooted(index, i, big_r);
      const RootedConfiguration thinned(thinning_from_set(big.config(), a));
      out.obs.push_back(observe(thinned, o.radii, o.r_obs));
    }
    return out;
  });
  Battery conditioned{o.radii, o.r_obs, {}};
  double roots = 0.0, kept = 0.0;
  for (auto& t : cond) {
    roots += t.roots;
    kept += static_cast<double>(t.obs.size());
    conditioned.clusters.push_back(t.obs);
  }
  const double mass = roots > 0.0 ? kept / roots : 0.0;
  if (mass < 1e-3) throw InsufficientData("insufficient conditioning mass (" + fmt(mass) + ") for " + name);

  const Battery direct = palm_battery(model, o, "thinning-direct",
                                      [&](const Configuration& c, Rng&) { return thinning_from_set(c, a); });
  std::vector<StatReport> r = compare_batteries(exp, direct, conditioned, o.alpha);
  StatReport m = StatReport::from_estimate(exp, "conditioning_mass", mass, 0.0, static_cast<std::int64_t>(roots),
                                           std::nullopt, o.threshold);
  r.push_back(m);
  return r;
}

StatReport check_palm_colouring(const ProcessModel& model, const LocalMap& p, const std::string& name,
                                const CheckOptions& o) {
  check_clip_radius(model.carrier, p.radius);
  const Window core = check_core(model.carrier, o);
  struct Tally {
    std::int64_t checked = 0;
    std::int64_t mismatched = 0;
  };
  const auto tallies = run_trials<Tally>(o.seed, "colouring", o.trials, o.threads, [&](std::size_t, Rng& rng) {
    const Configuration c = model.sample(rng);
    Tally t;
    if (c.empty()) return t;
    const MarkedConfiguration coloured = marking_from_map(c, p);
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!core.contains(c[i])) continue;
      const MarkedConfiguration lhs = reroot(coloured, c[i]);
      const MarkedConfiguration rhs = marking_from_map(reroot(c, c[i]).config(), p);
      ++t.checked;
      if (!(lhs == rhs)) ++t.mismatched;
    }
    return t;
  });
  Tally total;
  for (const auto& t : tallies) {
    total.checked += t.checked;
    total.mismatched += t.mismatched;
  }
  return StatReport::exact("palm-colouring:" + name + ":" + model.name, "reroot_commutes", total.mismatched == 0,
                           total.checked, std::to_string(total.mismatched) + " mismatches");
}

std::vector<StatReport> check_palm_thickening(const ProcessModel& base, const std::vector<GroupPoint>& F,
                                              const CheckOptions& o) {
  const CarrierGroup& G = base.carrier;
  check_battery_radii(o.radii, o.r_obs);
  const Window core = check_core(G, o);
  if (F.empty()) throw UsageError("F must be non-empty");
  double diam = 0.0;
  for (const auto& f : F) diam = std::max(diam, G.distance(G.identity(), f));
  const double big_r = o.r_obs + 2.0 * diam;
  if (!(big_r < G.side() / 2.0)) throw UsageError("r_obs + 2 diam(F) must stay below L/2");
  const std::string exp = "palm-thickening:|F|=" + std::to_string(F.size()) + ":" + base.name;

  std::atomic<std::int64_t> bad_counts{0};
  const Battery direct = palm_battery(base, o, "thickening-direct", [&](const Configuration& c, Rng&) {
    Configuration t = constant_thickening(c, F);
    if (t.size() != F.size() * c.size()) bad_counts.fetch_add(1);
    return t;
  });

  Battery uniform{o.radii, o.r_obs, {}};
  uniform.clusters = run_trials<std::vector<BatteryObs>>(
      o.seed, "thickening-uniform-root", o.trials, o.threads, [&](std::size_t, Rng& rng) {
        const Configuration c = base.sample(rng);
        std::vector<BatteryObs> obs;
        if (c.empty()) return obs;
        NeighborIndex index(c);
        std::uniform_int_distribution<std::size_t> pick(0, F.size() - 1);
        for (std::size_t i = 0; i < c.size(); ++i) {
          if (!core.contains(c[i])) continue;
          const RootedConfiguration palm = clip_rooted(index, i, big_r);
          const Configuration thick = constant_thickening(palm.config(), F);
          const GroupPoint& x = F[pick(rng)];
          const auto at = thick.find(x);
          if (!at) throw PreconditionError("thickened Palm sample lost its root image");
          obs.push_back(observe(reroot(thick, x), o.radii, o.r_obs));
        }
        return obs;
      });

  std::vector<StatReport> r = compare_batteries(exp, direct, uniform, o.alpha);
  r.push_back(StatReport::exact(exp, "|Theta_F|=|F||omega|", bad_counts.load() == 0,
                                static_cast<std::int64_t>(o.trials)));
  return r;
}

std::vector<StatReport> check_nonunimodular_thickening(const NonUnimodularParams& p, const CheckOptions& o) {
  const CarrierGroup G = CarrierGroup::affine_line();
  const Window U = Window::box(G, {p.u_lo[0], p.u_lo[1]}, {p.u_hi[0], p.u_hi[1]});
  const GroupPoint f = G.point({p.f[0], p.f[1]});
  const std::vector<GroupPoint> F{G.identity(), f};
  const double lu = haar_volume(U);
  const double luf = right_translate_volume(G, U, f);
  const double t = p.intensity;

  // U and U f^-1 are both inside the box spanned by the images of U's corners.
  const GroupPoint finv = G.inv(f);
  std::array<double, 2> lo{U.lo[0], U.lo[1]}, hi{U.hi[0], U.hi[1]};
  for (double a : {U.lo[0], U.hi[0]}) {
    for (double b : {U.lo[1], U.hi[1]}) {
      const GroupPoint img = G.mul(G.point({a, b}), finv);
      for (int k = 0; k < 2; ++k) {
        lo[k] = std::min(lo[k], img[k]);
        hi[k] = std::max(hi[k], img[k]);
      }
    }
  }
  const Window S = Window::box(G, {lo[0], lo[1]}, {std::nextafter(hi[0], 1e300), std::nextafter(hi[1], 1e300)});

  const auto counts = run_trials<double>(o.seed, "nonunimodular", o.trials, o.threads, [&](std::size_t, Rng& rng) {
    const Configuration pi = sample_poisson(G, S, t, rng);
    return static_cast<double>(count(constant_thickening(pi, F), U));
  });
  Moments m;
  for (double v : counts) m.add(v);

  const std::string exp = "nonunimodular-thickening";
  std::vector<StatReport> r;
  r.push_back(StatReport::from_moments(exp, "E|ThetaF(Pi)^U| vs t(l(U)+l(Uf^-1))", m, t * (lu + luf), o.threshold));

  StatReport dev = StatReport::from_moments(exp, "E|ThetaF(Pi)^U| vs 2t l(U)", m, 2.0 * t * lu, o.threshold);
  const bool differs = std::abs(luf - lu) > 1e-9 * lu;
  dev.pass = differs ? std::abs(dev.z) > 5.0 : std::abs(dev.z) <= o.threshold;
  dev.note = differs ? "expects |z| > 5" : "volumes agree, expects |z| <= threshold";
  r.push_back(dev);

  const double denom = 2.0 * t * lu;
  r.push_back(StatReport::from_estimate(exp, "ratio to 2t l(U)", m.mean() / denom, m.std_error() / denom, m.count(),
                                        (lu + luf) / (2.0 * lu), o.threshold));

  // Unimodular control on the torus: |F| = 2 doubles every count.
  const CarrierGroup T = CarrierGroup::flat_torus(2, p.control_side);
  const std::vector<GroupPoint> FT{T.identity(), T.point({p.control_side / 8.0, 0.0})};
  const Window UT = Window::box(T, {0.0, 0.0}, {p.control_side / 5.0, p.control_side / 5.0});
  const double tc = p.control_intensity;
  struct Control {
    double in_u = 0.0;
    bool doubled = true;
  };
  const auto ctl = run_trials<Control>(o.seed, "nonunimodular-control", o.trials, o.threads, [&](std::size_t, Rng& rng) {
    const Configuration pi = sample_poisson(T, Window::full(T), tc, rng);
    const Configuration th = constant_thickening(pi, FT);
    return Control{static_cast<double>(count(th, UT)), th.size() == 2 * pi.size()};
  });
  Moments mc;
  bool doubled = true;
  for (const auto& c : ctl) {
    mc.add(c.in_u / (tc * haar_volume(UT)));
    doubled = doubled && c.doubled;
  }
  r.push_back(StatReport::from_moments(exp, "torus control ratio", mc, 2.0, o.threshold));
  r.push_back(StatReport::exact(exp, "torus control |Theta|=2|Pi|", doubled, m.count()));
  return r;
}

LocalTransport nearest_neighbour_transport(double radius) {
  LocalTransport T;
  T.name = "nearest_neighbour";
  T.radius = radius;
  T.fn = [](const RootedConfiguration& rc, const GroupPoint& target) {
    const CarrierGroup& G = rc.carrier();
    const GroupPoint e = G.identity();
    double best = 0.0;
    std::optional<std::size_t> arg;
    for (std::size_t j = 0; j < rc.size(); ++j) {
      if (j == rc.root_index()) continue;
      const double d = G.distance(e, rc.points()[j]);
      if (!arg || d < best) {
        best = d;
        arg = j;
      }
    }
    return arg && rc.points()[*arg] == target ? 1.0 : 0.0;
  };
  return T;
}

LocalPredicate delta_isolation(double delta) {
  return LocalPredicate{delta, [](const RootedConfiguration& rc) { return rc.size() == 1; }};
}

}  // namespace palmlab
