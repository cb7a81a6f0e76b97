#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "palmlab/process.hpp"
#include "palmlab/spatial.hpp"

namespace palmlab {

// Local rules. Each rule sees only the rooted configuration clipped to its
// declared radius, which must stay below L/4 on the torus; this is what makes
// the induced factors exactly equivariant.

struct LocalPredicate {
  double radius = 0.0;
  std::function<bool(const RootedConfiguration&)> fn;
};

struct LocalMap {
  double radius = 0.0;
  MarkSpace space = MarkSpace::alphabet(2);
  std::function<double(const RootedConfiguration&)> fn;
};

/// Decides the arrow (root, target) of a clipped rooted configuration. Targets
/// farther than `radius` are never offered.
struct LocalArrowPredicate {
  double radius = 0.0;
  std::function<bool(const RootedConfiguration&, const GroupPoint& target)> fn;
};

/// Throws PreconditionError unless 0 <= radius < L/4 (torus) or radius is finite.
void check_clip_radius(const CarrierGroup& g, double radius);

/// x^-1 omega restricted to B(x, r), for the i-th point x of c. Uses the index for
/// the candidate search; membership is decided by the carrier metric.
RootedConfiguration clip_rooted(const NeighborIndex& index, std::size_t i, double r);

/// The clip together with the original index of each clipped point (canonical order).
struct ClippedRoot {
  RootedConfiguration rooted;
  std::vector<std::size_t> source;
};
ClippedRoot clip_rooted_with_sources(const NeighborIndex& index, std::size_t i, double r);

/// Indices j != i with distance(c[i], c[j]) <= r, ascending.
std::vector<std::size_t> neighbours_within(const NeighborIndex& index, std::size_t i, double r);

/// Points at distance > delta from every other point.
Configuration delta_thinning(const Configuration& c, double delta);

/// Points whose unit-interval mark is <= p.
Configuration independent_thinning(const MarkedConfiguration& mc, double p);

/// A pair (x, y) of points with y = x f for some non-identity f in F, if any.
std::optional<std::pair<std::size_t, std::size_t>> find_F_violation(const Configuration& c,
                                                                    const std::vector<GroupPoint>& F);
bool check_F_separated(const Configuration& c, const std::vector<GroupPoint>& F);

/// omega F. The result window is the full torus, or the smallest box holding the
/// input window and every image on the other carriers.
Configuration constant_thickening(const Configuration& c, const std::vector<GroupPoint>& F);

Configuration thinning_from_set(const Configuration& c, const LocalPredicate& a);
MarkedConfiguration marking_from_map(const Configuration& c, const LocalMap& p);

/// Directed edges (i, j) over the points of `base`, sorted and unique.
struct FactorGraph {
  Configuration base;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;

  FactorGraph() = default;
  FactorGraph(Configuration base, std::vector<std::pair<std::uint32_t, std::uint32_t>> edges);

  std::vector<std::uint32_t> out_degrees() const;
  std::vector<std::uint32_t> in_degrees() const;
  friend bool operator==(const FactorGraph&, const FactorGraph&) = default;
};

std::string to_jsonl(const FactorGraph& g);

/// Loops are never produced: the root is not offered as a target.
FactorGraph graph_from_arrow_set(const Configuration& c, const LocalArrowPredicate& a);
FactorGraph distance_R_graph(const Configuration& c, double R);
/// One edge per point, to its nearest other point (ties to the smaller index).
FactorGraph nearest_neighbor_digraph(const Configuration& c);

/// Grid Voronoi tessellation of the torus: cell k (row-major, first axis slowest,
/// centre at (i + 1/2) h) belongs to its nearest point.
struct VoronoiPartition {
  Configuration base;
  std::int64_t h_ticks = 0;
  std::int64_t cells_per_side = 0;
  std::vector<std::uint32_t> owner;

  double cell_volume() const;
  std::vector<std::int64_t> cell_counts() const;
  std::vector<double> volumes() const;
};

VoronoiPartition voronoi_partition(const Configuration& c, double h);

enum class Colour : int { Red = 0, Blue = 1, Purple = 2 };

/// Input points red, output points blue, points in both purple; the marked
/// configuration lives on the union with the output's window.
MarkedConfiguration input_output_decomposition(const std::function<Configuration(const Configuration&)>& phi,
                                               const Configuration& c);
/// Deletes red points and forgets the colours.
Configuration project_output(const MarkedConfiguration& decomposition);

/// Binary marks (1 = plus, 0 = minus) encoded as satellite patterns on the 2-d
/// torus. Each arm is a pair of satellites at 0.6 and 0.9 times delta/100 along an
/// axis; a plus has four arms, a minus two (along the first axis).
Configuration local_encode_marks(const MarkedConfiguration& mc, double delta);
/// Originals are the delta/200-isolated points; the satellite count within
/// delta/100 gives the mark. Throws PreconditionError on inputs the encoder could
/// not have produced.
MarkedConfiguration local_decode_marks(const Configuration& c, double delta);

}  // namespace palmlab
