#include "palmlab/process.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "palmlab/error.hpp"

namespace palmlab {

namespace {

std::atomic<std::uint64_t> g_duplicate_redraws{0};

void sort_canonical(std::vector<GroupPoint>& pts) { std::sort(pts.begin(), pts.end(), lex_less); }

void append_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace

Configuration::Configuration(CarrierGroup carrier, Window window, std::vector<GroupPoint> points)
    : carrier_(std::move(carrier)), window_(window), points_(std::move(points)) {
  if (window_.kind != carrier_->kind() || window_.dim != carrier_->dim()) {
    throw UsageError("window does not belong to carrier " + carrier_->describe());
  }
  for (const auto& p : points_) {
    carrier_->check(p);
    if (!window_.contains(p)) throw UsageError("point outside the configuration window");
  }
  sort_canonical(points_);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (points_[i] == points_[i - 1] || carrier_->distance(points_[i], points_[i - 1]) <= 1e-12) {
      throw UsageError("configuration points must be pairwise distinct");
    }
  }
}

Configuration::Configuration(CarrierGroup carrier, Window window, std::vector<GroupPoint> points, Canonical)
    : carrier_(std::move(carrier)), window_(window), points_(std::move(points)) {}

Configuration Configuration::empty(const CarrierGroup& carrier, const Window& window) {
  return Configuration(carrier, window, {});
}

std::optional<std::size_t> Configuration::find(const GroupPoint& p) const noexcept {
  auto it = std::lower_bound(points_.begin(), points_.end(), p, lex_less);
  if (it != points_.end() && *it == p) return static_cast<std::size_t>(it - points_.begin());
  return std::nullopt;
}

bool MarkSpace::admits(double mark) const noexcept {
  if (kind == Kind::UnitInterval) return mark >= 0.0 && mark <= 1.0;
  return mark >= 0.0 && mark < alphabet_size && mark == std::floor(mark);
}

MarkedConfiguration::MarkedConfiguration(Configuration b, MarkSpace s, std::vector<double> m)
    : base(std::move(b)), space(s), marks(std::move(m)) {
  if (marks.size() != base.size()) throw UsageError("exactly one mark per point required");
  if (space.kind == MarkSpace::Kind::Alphabet && space.alphabet_size < 1) throw UsageError("empty mark alphabet");
  for (double v : marks) {
    if (!space.admits(v)) throw UsageError("mark outside its mark space");
  }
}

MarkedConfiguration MarkedConfiguration::from_unsorted(const CarrierGroup& carrier, const Window& window,
                                                       std::vector<GroupPoint> points, MarkSpace space,
                                                       std::vector<double> marks) {
  if (points.size() != marks.size()) throw UsageError("exactly one mark per point required");
  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lex_less(points[a], points[b]); });
  std::vector<GroupPoint> sp;
  std::vector<double> sm;
  sp.reserve(points.size());
  sm.reserve(points.size());
  for (std::size_t i : order) {
    sp.push_back(points[i]);
    sm.push_back(marks[i]);
  }
  return MarkedConfiguration(Configuration(carrier, window, std::move(sp)), space, std::move(sm));
}

RootedConfiguration::RootedConfiguration(Configuration c) : config_(std::move(c)) {
  const auto idx = config_.find(config_.carrier().identity());
  if (!idx) throw UsageError("rooted configuration must contain the identity");
  root_ = *idx;
}

BirootedPair::BirootedPair(RootedConfiguration base, GroupPoint target)
    : base_(std::move(base)), target_(target) {
  if (!base_.config().contains(target_)) throw UsageError("arrow target must be a point of the configuration");
}

RootedConfiguration BirootedPair::target_config() const { return reroot(base_.config(), target_); }

BirootedPair BirootedPair::compose(const BirootedPair& other) const {
  if (!(other.source() == target_config())) throw UsageError("arrows are not composable");
  return BirootedPair(base_, base_.carrier().mul(target_, other.target()));
}

std::uint64_t duplicate_redraws() noexcept { return g_duplicate_redraws.load(std::memory_order_relaxed); }

Configuration sample_poisson(const CarrierGroup& carrier, const Window& window, double intensity, Rng& rng) {
  if (!(intensity >= 0.0) || !std::isfinite(intensity)) throw UsageError("intensity must be finite and >= 0");
  const double mean = intensity * haar_volume(window);
  if (!std::isfinite(mean)) throw UsageError("window volume must be finite");
  if (mean <= 0.0) return Configuration::empty(carrier, window);
  std::poisson_distribution<long long> pois(mean);
  const auto n = static_cast<std::size_t>(pois(rng));
  std::vector<GroupPoint> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pts.push_back(sample_uniform(carrier, window, rng));
  sort_canonical(pts);
  // Collisions have probability ~n^2 2^-52; redraw any and retry.
  for (;;) {
    auto dup = std::adjacent_find(pts.begin(), pts.end());
    if (dup == pts.end()) break;
    g_duplicate_redraws.fetch_add(1, std::memory_order_relaxed);
    *dup = sample_uniform(carrier, window, rng);
    sort_canonical(pts);
  }
  return Configuration(carrier, window, std::move(pts), Configuration::Canonical{});
}

Configuration sample_lattice_shift(const CarrierGroup& carrier, double spacing, Rng& rng) {
  if (carrier.kind() != CarrierKind::FlatTorus) throw UsageError("lattice shifts live on the torus");
  const std::int64_t s = carrier.length_to_ticks(spacing);
  if (s <= 0 || static_cast<double>(s) * carrier.tick() != spacing || carrier.period() % s != 0) {
    throw UsageError("lattice spacing must divide the torus side");
  }
  const std::int64_t per_axis = carrier.period() / s;
  std::uniform_int_distribution<std::int64_t> offset(0, s - 1);
  Ticks base{};
  for (int k = 0; k < carrier.dim(); ++k) base[k] = static_cast<std::int32_t>(offset(rng));
  std::int64_t total = 1;
  for (int k = 0; k < carrier.dim(); ++k) total *= per_axis;
  std::vector<GroupPoint> pts;
  pts.reserve(static_cast<std::size_t>(total));
  for (std::int64_t idx = 0; idx < total; ++idx) {
    Ticks t{};
    std::int64_t rest = idx;
    for (int k = carrier.dim() - 1; k >= 0; --k) {
      t[k] = static_cast<std::int32_t>(base[k] + (rest % per_axis) * s);
      rest /= per_axis;
    }
    pts.push_back(carrier.from_ticks(t));
  }
  sort_canonical(pts);
  return Configuration(carrier, Window::full(carrier), std::move(pts), Configuration::Canonical{});
}

MarkedConfiguration attach_iid_marks(const Configuration& c, MarkSpace space, Rng& rng) {
  if (space.kind == MarkSpace::Kind::Alphabet && space.alphabet_size < 1) throw UsageError("empty mark alphabet");
  std::vector<double> marks(c.size());
  if (space.kind == MarkSpace::Kind::Alphabet) {
    std::uniform_int_distribution<int> pick(0, space.alphabet_size - 1);
    for (auto& m : marks) m = pick(rng);
  } else {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& m : marks) {
      // Open at 0 so that p = 0 thinning removes everything.
      do {
        m = u(rng);
      } while (m == 0.0);
    }
  }
  return MarkedConfiguration(c, space, std::move(marks));
}

std::size_t count(const Configuration& c, const Window& u) {
  return static_cast<std::size_t>(
      std::count_if(c.points().begin(), c.points().end(), [&](const GroupPoint& p) { return u.contains(p); }));
}

StatReport estimate_intensity(std::span<const Configuration> samples, const Window& u,
                              std::optional<double> reference) {
  if (samples.size() < 2) throw UsageError("intensity estimation needs at least two samples");
  const double vol = haar_volume(u);
  if (!(vol > 0.0)) throw UsageError("intensity window has zero volume");
  Moments m;
  for (const auto& c : samples) m.add(static_cast<double>(count(c, u)) / vol);
  return StatReport::from_moments("intensity", "N_U/lambda(U)", m, reference);
}

Configuration translate(const Configuration& c, const GroupPoint& g) {
  const CarrierGroup& G = c.carrier();
  G.check(g);
  std::vector<GroupPoint> pts;
  pts.reserve(c.size());
  for (const auto& p : c.points()) {
    GroupPoint q = G.mul(g, p);
    if (!c.window().contains(q)) throw RangeError("translated point leaves the simulated region");
    pts.push_back(q);
  }
  sort_canonical(pts);
  return Configuration(G, c.window(), std::move(pts), Configuration::Canonical{});
}

MarkedConfiguration translate(const MarkedConfiguration& mc, const GroupPoint& g) {
  const CarrierGroup& G = mc.base.carrier();
  std::vector<GroupPoint> pts;
  pts.reserve(mc.size());
  for (const auto& p : mc.base.points()) {
    GroupPoint q = G.mul(g, p);
    if (!mc.base.window().contains(q)) throw RangeError("translated point leaves the simulated region");
    pts.push_back(q);
  }
  return MarkedConfiguration::from_unsorted(G, mc.base.window(), std::move(pts), mc.space, mc.marks);
}

RootedConfiguration reroot(const Configuration& c, const GroupPoint& x) {
  if (!c.contains(x)) throw UsageError("reroot target is not a point of the configuration");
  return RootedConfiguration(translate(c, c.carrier().inv(x)));
}

MarkedConfiguration reroot(const MarkedConfiguration& mc, const GroupPoint& x) {
  if (!mc.base.contains(x)) throw UsageError("reroot target is not a point of the configuration");
  return translate(mc, mc.base.carrier().inv(x));
}

Configuration clip_around(const Configuration& c, const GroupPoint& centre, double r) {
  const CarrierGroup& G = c.carrier();
  if (G.kind() != CarrierKind::FlatTorus) throw UsageError("clip_around is defined on the torus");
  const GroupPoint shift = G.inv(centre);
  std::vector<GroupPoint> pts;
  for (const auto& p : c.points()) {
    if (G.distance(p, centre) <= r) pts.push_back(G.mul(shift, p));
  }
  sort_canonical(pts);
  return Configuration(G, Window::full(G), std::move(pts), Configuration::Canonical{});
}

std::string carrier_json(const CarrierGroup& g) {
  std::string s = "{\"kind\":\"" + to_string(g.kind()) + "\",\"d\":" + std::to_string(g.dim());
  if (g.kind() == CarrierKind::FlatTorus) {
    s += ",\"L\":";
    append_double(s, g.side());
  }
  return s + "}";
}

namespace {

void append_points(std::string& s, const Configuration& c) {
  s += "\"points\":[";
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) s += ',';
    s += '[';
    for (int k = 0; k < c.carrier().dim(); ++k) {
      if (k) s += ',';
      append_double(s, c[i][k]);
    }
    s += ']';
  }
  s += ']';
}

void append_window(std::string& s, const Configuration& c) {
  if (c.carrier().kind() == CarrierKind::FlatTorus && c.window() == Window::full(c.carrier())) return;
  s += ",\"window\":{\"lo\":[";
  for (int k = 0; k < c.window().dim; ++k) {
    if (k) s += ',';
    append_double(s, c.window().lo[k]);
  }
  s += "],\"hi\":[";
  for (int k = 0; k < c.window().dim; ++k) {
    if (k) s += ',';
    append_double(s, c.window().hi[k]);
  }
  s += "]}";
}

}  // namespace

std::string to_jsonl(const Configuration& c) {
  std::string s = "{\"carrier\":" + carrier_json(c.carrier());
  append_window(s, c);
  s += ',';
  append_points(s, c);
  return s + "}";
}

std::string to_jsonl(const MarkedConfiguration& mc) {
  std::string s = "{\"carrier\":" + carrier_json(mc.base.carrier());
  append_window(s, mc.base);
  s += ',';
  append_points(s, mc.base);
  s += ",\"marks\":[";
  for (std::size_t i = 0; i < mc.marks.size(); ++i) {
    if (i) s += ',';
    append_double(s, mc.marks[i]);
  }
  s += "],\"mark_space\":";
  s += mc.space.kind == MarkSpace::Kind::UnitInterval ? std::string("\"unit\"")
                                                      : "\"alphabet:" + std::to_string(mc.space.alphabet_size) + "\"";
  return s + "}";
}

MarkedConfiguration parse_jsonl(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(std::string("malformed configuration line: ") + e.what());
  }
  try {
    const auto& cj = j.at("carrier");
    const std::string kind = cj.at("kind").get<std::string>();
    const int d = cj.value("d", 2);
    CarrierGroup g = kind == "torus"       ? CarrierGroup::flat_torus(d, cj.at("L").get<double>())
                     : kind == "euclidean" ? CarrierGroup::euclidean(d)
                     : kind == "affine"    ? CarrierGroup::affine_line()
                                           : throw UsageError("unknown carrier kind " + kind);
    Window w;
    if (j.contains("window")) {
      const auto lo = j["window"].at("lo").get<std::vector<double>>();
      const auto hi = j["window"].at("hi").get<std::vector<double>>();
      w = Window::box(g, lo, hi);
    } else {
      w = Window::full(g);
    }
    std::vector<GroupPoint> pts;
    for (const auto& p : j.at("points")) pts.push_back(g.point(p.get<std::vector<double>>()));
    if (!j.contains("marks")) {
      const std::size_t n = pts.size();
      return MarkedConfiguration(Configuration(g, w, std::move(pts)), MarkSpace::alphabet(1),
                                 std::vector<double>(n, 0.0));
    }
    auto marks = j["marks"].get<std::vector<double>>();
    MarkSpace space = MarkSpace::unit_interval();
    const std::string ms = j.value("mark_space", std::string("unit"));
    if (ms.rfind("alphabet:", 0) == 0) space = MarkSpace::alphabet(std::stoi(ms.substr(9)));
    return MarkedConfiguration::from_unsorted(g, w, std::move(pts), space, std::move(marks));
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad configuration line: ") + e.what());
  }
}

}  // namespace palmlab
