#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "palmlab/geometry.hpp"
#include "palmlab/random.hpp"
#include "palmlab/stats.hpp"

namespace palmlab {

/// A finite point set in a window, held in canonical (lexicographic) order.
class Configuration {
 public:
  struct Canonical {};

  Configuration() = default;
  /// Sorts and validates: every point must lie in the window and be distinct.
  Configuration(CarrierGroup carrier, Window window, std::vector<GroupPoint> points);
  /// Skips validation; `points` must already be canonical.
  Configuration(CarrierGroup carrier, Window window, std::vector<GroupPoint> points, Canonical);

  static Configuration empty(const CarrierGroup& carrier, const Window& window);

  const CarrierGroup& carrier() const noexcept { return *carrier_; }
  const Window& window() const noexcept { return window_; }
  const std::vector<GroupPoint>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  const GroupPoint& operator[](std::size_t i) const { return points_[i]; }

  /// Index of p in canonical order, if present.
  std::optional<std::size_t> find(const GroupPoint& p) const noexcept;
  bool contains(const GroupPoint& p) const noexcept { return find(p).has_value(); }

  friend bool operator==(const Configuration& a, const Configuration& b) noexcept {
    return a.carrier_ == b.carrier_ && a.window_ == b.window_ && a.points_ == b.points_;
  }

 private:
  std::optional<CarrierGroup> carrier_;
  Window window_;
  std::vector<GroupPoint> points_;
};

/// Mark alphabet {0, ..., size-1} or the unit interval.
struct MarkSpace {
  enum class Kind { Alphabet, UnitInterval };
  Kind kind = Kind::Alphabet;
  int alphabet_size = 2;

  static MarkSpace alphabet(int size) { return {Kind::Alphabet, size}; }
  static MarkSpace unit_interval() { return {Kind::UnitInterval, 0}; }
  bool admits(double mark) const noexcept;
  friend bool operator==(const MarkSpace&, const MarkSpace&) = default;
};

/// Marks stored aligned to the canonical point order of `base`.
struct MarkedConfiguration {
  Configuration base;
  MarkSpace space;
  std::vector<double> marks;

  MarkedConfiguration() = default;
  MarkedConfiguration(Configuration base, MarkSpace space, std::vector<double> marks);
  /// Pairs arbitrary-order points with marks, then canonicalizes both together.
  static MarkedConfiguration from_unsorted(const CarrierGroup& carrier, const Window& window,
                                           std::vector<GroupPoint> points, MarkSpace space, std::vector<double> marks);

  std::size_t size() const noexcept { return base.size(); }
  friend bool operator==(const MarkedConfiguration&, const MarkedConfiguration&) = default;
};

/// A configuration containing the identity.
class RootedConfiguration {
 public:
  RootedConfiguration() = default;
  explicit RootedConfiguration(Configuration c);

  const Configuration& config() const noexcept { return config_; }
  std::size_t root_index() const noexcept { return root_; }
  const CarrierGroup& carrier() const noexcept { return config_.carrier(); }
  const std::vector<GroupPoint>& points() const noexcept { return config_.points(); }
  std::size_t size() const noexcept { return config_.size(); }

  friend bool operator==(const RootedConfiguration& a, const RootedConfiguration& b) noexcept {
    return a.config_ == b.config_;
  }

 private:
  Configuration config_;
  std::size_t root_ = 0;
};

/// An arrow (omega, g) of the rerooting groupoid: g is a point of the rooted omega.
class BirootedPair {
 public:
  BirootedPair(RootedConfiguration base, GroupPoint target);

  const RootedConfiguration& source() const noexcept { return base_; }
  const GroupPoint& target() const noexcept { return target_; }
  /// g^-1 omega.
  RootedConfiguration target_config() const;
  /// (omega, g) . (g^-1 omega, h) = (omega, g h); requires other.source() == target_config().
  BirootedPair compose(const BirootedPair& other) const;

 private:
  RootedConfiguration base_;
  GroupPoint target_;
};

/// Number of placements redrawn because they collided with an existing point.
std::uint64_t duplicate_redraws() noexcept;

/// Poisson process of intensity t on the window: one Pois(t lambda(W)) draw and
/// Haar-uniform placement.
Configuration sample_poisson(const CarrierGroup& carrier, const Window& window, double intensity, Rng& rng);

/// s Z^d mod L translated by a uniform element of [0, s)^d. s must divide L.
Configuration sample_lattice_shift(const CarrierGroup& carrier, double spacing, Rng& rng);

MarkedConfiguration attach_iid_marks(const Configuration& c, MarkSpace space, Rng& rng);

/// |c intersect u|.
std::size_t count(const Configuration& c, const Window& u);

/// Mean of N_U / lambda(U) across samples with its standard error.
StatReport estimate_intensity(std::span<const Configuration> samples, const Window& u,
                              std::optional<double> reference = std::nullopt);

/// Left action g . omega. Throws RangeError when a Euclidean/affine image leaves the window.
Configuration translate(const Configuration& c, const GroupPoint& g);
/// Marks follow their points.
MarkedConfiguration translate(const MarkedConfiguration& mc, const GroupPoint& g);

/// x^-1 omega for a point x of omega.
RootedConfiguration reroot(const Configuration& c, const GroupPoint& x);
MarkedConfiguration reroot(const MarkedConfiguration& mc, const GroupPoint& x);

/// Points of `c` within distance r of `centre`, translated so that `centre`
/// becomes the identity (torus only; r < L/2).
Configuration clip_around(const Configuration& c, const GroupPoint& centre, double r);

// JSONL dumps: {"carrier": {...}, "points": [[...], ...], "marks": [...]} with
// canonical order and 17 significant digits.
std::string to_jsonl(const Configuration& c);
std::string to_jsonl(const MarkedConfiguration& mc);
std::string carrier_json(const CarrierGroup& g);
/// Parses one dump line. Marks, when present, come back with the alphabet
/// or unit-interval space named by "mark_space"; unmarked lines come back with the
/// one-letter alphabet and all-zero marks.
MarkedConfiguration parse_jsonl(const std::string& line);

}  // namespace palmlab
