#include "palmlab/factor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "palmlab/error.hpp"

namespace palmlab {

namespace {

// Index query radius slightly inflated so that the exact metric test decides.
double search_radius(const CarrierGroup& g, double r) {
  const double pad = g.kind() == CarrierKind::FlatTorus ? 2.0 * g.tick() : 0.0;
  return r * (1.0 + 1e-12) + pad;
}

}  // namespace

ClippedRoot clip_rooted_with_sources(const NeighborIndex& index, std::size_t i, double r) {
  const Configuration& c = index.config();
  const CarrierGroup& G = c.carrier();
  std::vector<std::size_t> idx = neighbours_within(index, i, r);
  idx.push_back(i);

  std::vector<std::pair<GroupPoint, std::size_t>> rel;
  rel.reserve(idx.size());
  if (G.kind() == CarrierKind::FlatTorus) {
    const Ticks root = G.ticks(c[i]);
    const std::int32_t P = G.period();
    for (std::size_t j : idx) {
      Ticks t = G.ticks(c[j]);
      for (int k = 0; k < G.dim(); ++k) {
        std::int32_t d = t[k] - root[k];
        if (d < 0) d += P;
        t[k] = d;
      }
      rel.emplace_back(G.from_ticks(t), j);
    }
  } else {
    const GroupPoint shift = G.inv(c[i]);
    for (std::size_t j : idx) rel.emplace_back(j == i ? G.identity() : G.mul(shift, c[j]), j);
  }
  std::sort(rel.begin(), rel.end(), [](const auto& a, const auto& b) { return lex_less(a.first, b.first); });

  std::vector<GroupPoint> pts;
  ClippedRoot out;
  pts.reserve(rel.size());
  out.source.reserve(rel.size());
  for (auto& [p, j] : rel) {
    pts.push_back(p);
    out.source.push_back(j);
  }
  Window w;
  if (G.kind() == CarrierKind::FlatTorus) {
    w = Window::full(G);
  } else {
    w.kind = G.kind();
    w.dim = G.dim();
    for (int k = 0; k < G.dim(); ++k) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (const auto& p : pts) {
        lo = std::min(lo, p[k]);
        hi = std::max(hi, p[k]);
      }
      w.lo[k] = lo;
      w.hi[k] = std::nextafter(hi, std::numeric_limits<double>::infinity());
    }
  }
  out.rooted = RootedConfiguration(Configuration(G, w, std::move(pts), Configuration::Canonical{}));
  return out;
}

namespace {

std::vector<std::pair<std::uint32_t, std::uint32_t>> sorted_unique(
    std::vector<std::pair<std::uint32_t, std::uint32_t>> e) {
  std::sort(e.begin(), e.end());
  e.erase(std::unique(e.begin(), e.end()), e.end());
  return e;
}

void check_alphabet2_torus2(const CarrierGroup& G, double delta) {
  if (G.kind() != CarrierKind::FlatTorus || G.dim() != 2) throw UsageError("local encoding needs the 2-d torus");
  if (!(delta > 0.0) || !(delta < G.side() / 4.0)) throw UsageError("encoding scale must lie in (0, L/4)");
}

struct ArmTicks {
  std::int32_t inner;
  std::int32_t outer;
};

ArmTicks arm_ticks(const CarrierGroup& G, double delta) {
  const ArmTicks a{static_cast<std::int32_t>(G.length_to_ticks(0.006 * delta)),
                   static_cast<std::int32_t>(G.length_to_ticks(0.009 * delta))};
  const double t = G.tick();
  // Satellites must clear B(x, delta/200), pair up within delta/200 and stay in B(x, delta/100).
  if (!(a.inner * t > delta / 200.0) || !((a.outer - a.inner) * t < delta / 200.0) || !(a.outer * t < delta / 100.0)) {
    throw UsageError("encoding scale is too small for the torus resolution");
  }
  return a;
}

}  // namespace

void check_clip_radius(const CarrierGroup& g, double radius) {
  if (!(radius >= 0.0) || !std::isfinite(radius)) throw PreconditionError("local rule needs a finite clipping radius");
  if (g.kind() == CarrierKind::FlatTorus && !(radius < g.side() / 4.0)) {
    throw PreconditionError("clipping radius must stay below L/4");
  }
}

std::vector<std::size_t> neighbours_within(const NeighborIndex& index, std::size_t i, double r) {
  const Configuration& c = index.config();
  const CarrierGroup& G = c.carrier();
  std::vector<std::size_t> out;
  index.for_each_within(i, search_radius(G, r), [&](std::size_t j, double) {
    if (G.distance(c[i], c[j]) <= r) out.push_back(j);
  });
  std::sort(out.begin(), out.end());
  return out;
}

RootedConfiguration clip_rooted(const NeighborIndex& index, std::size_t i, double r) {
  return clip_rooted_with_sources(index, i, r).rooted;
}

Configuration delta_thinning(const Configuration& c, double delta) {
  if (!(delta > 0.0)) throw UsageError("thinning distance must be positive");
  const CarrierGroup& G = c.carrier();
  if (G.kind() == CarrierKind::FlatTorus && !(delta < G.side() / 4.0)) throw UsageError("thinning distance must stay below L/4");
  NeighborIndex index(c);
  std::vector<GroupPoint> kept;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (neighbours_within(index, i, delta).empty()) kept.push_back(c[i]);
  }
  return Configuration(G, c.window(), std::move(kept), Configuration::Canonical{});
}

Configuration independent_thinning(const MarkedConfiguration& mc, double p) {
  if (mc.space.kind != MarkSpace::Kind::UnitInterval) throw UsageError("independent thinning needs unit-interval marks");
  if (!(p >= 0.0 && p <= 1.0)) throw UsageError("retention probability must lie in [0, 1]");
  std::vector<GroupPoint> kept;
  for (std::size_t i = 0; i < mc.size(); ++i) {
    if (mc.marks[i] <= p) kept.push_back(mc.base[i]);
  }
  return Configuration(mc.base.carrier(), mc.base.window(), std::move(kept), Configuration::Canonical{});
}

std::optional<std::pair<std::size_t, std::size_t>> find_F_violation(const Configuration& c,
                                                                    const std::vector<GroupPoint>& F) {
  const CarrierGroup& G = c.carrier();
  const GroupPoint e = G.identity();
  if (std::find(F.begin(), F.end(), e) == F.end()) throw UsageError("F must contain the identity");
  if (c.empty()) return std::nullopt;
  NeighborIndex index(c);
  for (const auto& f : F) {
    G.check(f);
    if (f == e) continue;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const GroupPoint y = G.mul(c[i], f);
      std::optional<std::size_t> hit;
      index.for_each_within(y, search_radius(G, 1e-9), [&](std::size_t j, double) {
        if (G.distance(y, c[j]) <= 1e-9 && (!hit || j < *hit)) hit = j;
      });
      if (hit) return std::make_pair(i, *hit);
    }
  }
  return std::nullopt;
}

bool check_F_separated(const Configuration& c, const std::vector<GroupPoint>& F) {
  return !find_F_violation(c, F).has_value();
}

Configuration constant_thickening(const Configuration& c, const std::vector<GroupPoint>& F) {
  const CarrierGroup& G = c.carrier();
  if (auto bad = find_F_violation(c, F)) {
    throw PreconditionError("configuration is not F-separated: points " + std::to_string(bad->first) + " and " +
                            std::to_string(bad->second));
  }
  std::vector<GroupPoint> pts;
  pts.reserve(c.size() * F.size());
  for (const auto& x : c.points()) {
    for (const auto& f : F) pts.push_back(G.mul(x, f));
  }
  Window w = c.window();
  if (G.kind() == CarrierKind::FlatTorus) {
    w = Window::full(G);
  } else {
    for (const auto& p : pts) {
      for (int k = 0; k < G.dim(); ++k) {
        w.lo[k] = std::min(w.lo[k], p[k]);
        if (!(p[k] < w.hi[k])) w.hi[k] = std::nextafter(p[k], std::numeric_limits<double>::infinity());
      }
    }
  }
  return Configuration(G, w, std::move(pts));
}

Configuration thinning_from_set(const Configuration& c, const LocalPredicate& a) {
  check_clip_radius(c.carrier(), a.radius);
  NeighborIndex index(c);
  std::vector<GroupPoint> kept;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (a.fn(clip_rooted(index, i, a.radius))) kept.push_back(c[i]);
  }
  return Configuration(c.carrier(), c.window(), std::move(kept), Configuration::Canonical{});
}

MarkedConfiguration marking_from_map(const Configuration& c, const LocalMap& p) {
  check_clip_radius(c.carrier(), p.radius);
  NeighborIndex index(c);
  std::vector<double> marks(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    marks[i] = p.fn(clip_rooted(index, i, p.radius));
    if (!p.space.admits(marks[i])) throw UsageError("local map produced a mark outside its mark space");
  }
  return MarkedConfiguration(c, p.space, std::move(marks));
}

FactorGraph::FactorGraph(Configuration b, std::vector<std::pair<std::uint32_t, std::uint32_t>> e)
    : base(std::move(b)), edges(sorted_unique(std::move(e))) {
  for (const auto& [i, j] : edges) {
    if (i >= base.size() || j >= base.size()) throw UsageError("edge endpoint out of range");
  }
}

std::vector<std::uint32_t> FactorGraph::out_degrees() const {
  std::vector<std::uint32_t> d(base.size(), 0);
  for (const auto& e : edges) ++d[e.first];
  return d;
}

std::vector<std::uint32_t> FactorGraph::in_degrees() const {
  std::vector<std::uint32_t> d(base.size(), 0);
  for (const auto& e : edges) ++d[e.second];
  return d;
}

std::string to_jsonl(const FactorGraph& g) {
  std::string s = to_jsonl(g.base);
  s.pop_back();
  s += ",\"edges\":[";
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    if (k) s += ',';
    s += '[' + std::to_string(g.edges[k].first) + ',' + std::to_string(g.edges[k].second) + ']';
  }
  return s + "]}";
}

FactorGraph graph_from_arrow_set(const Configuration& c, const LocalArrowPredicate& a) {
  check_clip_radius(c.carrier(), a.radius);
  NeighborIndex index(c);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const ClippedRoot clip = clip_rooted_with_sources(index, i, a.radius);
    const auto& pts = clip.rooted.points();
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (k == clip.rooted.root_index()) continue;
      if (a.fn(clip.rooted, pts[k])) {
        edges.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(clip.source[k]));
      }
    }
  }
  return FactorGraph(c, std::move(edges));
}

FactorGraph distance_R_graph(const Configuration& c, double R) {
  check_clip_radius(c.carrier(), R);
  NeighborIndex index(c);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j : neighbours_within(index, i, R)) {
      edges.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
    }
  }
  return FactorGraph(c, std::move(edges));
}

FactorGraph nearest_neighbor_digraph(const Configuration& c) {
  if (c.size() < 2) throw UsageError("nearest-neighbour digraph needs at least two points");
  NeighborIndex index(c);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  edges.reserve(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    edges.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(index.nearest_other(i)));
  }
  return FactorGraph(c, std::move(edges));
}

double VoronoiPartition::cell_volume() const {
  const double h = static_cast<double>(h_ticks) * base.carrier().tick();
  return std::pow(h, base.carrier().dim());
}

std::vector<std::int64_t> VoronoiPartition::cell_counts() const {
  std::vector<std::int64_t> n(base.size(), 0);
  for (auto o : owner) ++n[o];
  return n;
}

std::vector<double> VoronoiPartition::volumes() const {
  const auto n = cell_counts();
  std::vector<double> v(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) v[i] = static_cast<double>(n[i]) * cell_volume();
  return v;
}

VoronoiPartition voronoi_partition(const Configuration& c, double h) {
  const CarrierGroup& G = c.carrier();
  if (G.kind() != CarrierKind::FlatTorus) throw UsageError("grid Voronoi cells are defined on the torus");
  if (c.empty()) throw UsageError("Voronoi partition of an empty configuration");
  const std::int64_t ht = G.length_to_ticks(h);
  if (ht <= 0 || static_cast<double>(ht) * G.tick() != h || G.period() % ht != 0) {
    throw UsageError("grid side must divide the torus side");
  }
  VoronoiPartition v;
  v.base = c;
  v.h_ticks = ht;
  v.cells_per_side = G.period() / ht;
  std::vector<double> sq;
  NeighborIndex(v.base).nearest_on_grid(ht, v.owner, sq);
  return v;
}

MarkedConfiguration input_output_decomposition(const std::function<Configuration(const Configuration&)>& phi,
                                               const Configuration& c) {
  const Configuration out = phi(c);
  if (!(out.carrier() == c.carrier())) throw UsageError("factor changed the carrier");
  for (const auto& p : c.points()) {
    if (!out.window().contains(p)) throw UsageError("input point lies outside the output window");
  }
  std::vector<GroupPoint> pts;
  std::vector<double> colour;
  std::size_t i = 0, j = 0;
  while (i < c.size() || j < out.size()) {
    if (j == out.size() || (i < c.size() && lex_less(c[i], out[j]))) {
      pts.push_back(c[i++]);
      colour.push_back(static_cast<double>(Colour::Red));
    } else if (i == c.size() || lex_less(out[j], c[i])) {
      pts.push_back(out[j++]);
      colour.push_back(static_cast<double>(Colour::Blue));
    } else {
      pts.push_back(c[i]);
      ++i;
      ++j;
      colour.push_back(static_cast<double>(Colour::Purple));
    }
  }
  return MarkedConfiguration(Configuration(c.carrier(), out.window(), std::move(pts), Configuration::Canonical{}),
                             MarkSpace::alphabet(3), std::move(colour));
}

Configuration project_output(const MarkedConfiguration& d) {
  std::vector<GroupPoint> pts;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.marks[i] != static_cast<double>(Colour::Red)) pts.push_back(d.base[i]);
  }
  return Configuration(d.base.carrier(), d.base.window(), std::move(pts), Configuration::Canonical{});
}

Configuration local_encode_marks(const MarkedConfiguration& mc, double delta) {
  const CarrierGroup& G = mc.base.carrier();
  check_alphabet2_torus2(G, delta);
  if (mc.space.kind != MarkSpace::Kind::Alphabet || mc.space.alphabet_size != 2) {
    throw UsageError("local encoding takes binary marks");
  }
  const ArmTicks arm = arm_ticks(G, delta);
  NeighborIndex index(mc.base);
  for (std::size_t i = 0; i < mc.size(); ++i) {
    if (!neighbours_within(index, i, delta).empty()) {
      throw PreconditionError("marked configuration is not delta-separated at point " + std::to_string(i));
    }
  }
  const std::int32_t P = G.period();
  std::vector<GroupPoint> pts;
  for (std::size_t i = 0; i < mc.size(); ++i) {
    const Ticks x = G.ticks(mc.base[i]);
    pts.push_back(mc.base[i]);
    const int axes = mc.marks[i] == 1.0 ? 2 : 1;
    for (int axis = 0; axis < axes; ++axis) {
      for (int sign : {1, -1}) {
        for (std::int32_t r : {arm.inner, arm.outer}) {
          Ticks t = x;
          t[axis] = static_cast<std::int32_t>(((static_cast<std::int64_t>(t[axis]) + sign * r) % P + P) % P);
          pts.push_back(G.from_ticks(t));
        }
      }
    }
  }
  return Configuration(G, Window::full(G), std::move(pts));
}

MarkedConfiguration local_decode_marks(const Configuration& c, double delta) {
  const CarrierGroup& G = c.carrier();
  check_alphabet2_torus2(G, delta);
  NeighborIndex index(c);
  std::vector<GroupPoint> originals;
  std::vector<double> marks;
  std::size_t accounted = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!neighbours_within(index, i, delta / 200.0).empty()) continue;
    const std::size_t sats = neighbours_within(index, i, delta / 100.0).size();
    if (sats != 8 && sats != 4) {
      throw PreconditionError("point " + std::to_string(i) + " carries " + std::to_string(sats) + " satellites");
    }
    originals.push_back(c[i]);
    marks.push_back(sats == 8 ? 1.0 : 0.0);
    accounted += 1 + sats;
  }
  if (accounted != c.size()) throw PreconditionError("configuration is not a local encoding");
  return MarkedConfiguration(Configuration(G, c.window(), std::move(originals), Configuration::Canonical{}),
                             MarkSpace::alphabet(2), std::move(marks));
}

}  // namespace palmlab
