#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "palmlab/factor.hpp"
#include "palmlab/palm.hpp"

namespace palmlab {

/// Grid allocation of torus cells to points. Cells are indexed as in
/// VoronoiPartition; kUnclaimed marks land nobody owns.
struct Allocation {
  static constexpr std::uint32_t kUnclaimed = 0xFFFFFFFFu;

  Configuration base;
  std::int64_t h_ticks = 0;
  std::int64_t cells_per_side = 0;
  std::vector<std::uint32_t> owner;
  double capacity = 0.0;
  /// Cells a point may hold: floor(capacity / cell volume).
  std::int64_t quota = 0;
  double epsilon = 0.0;
  int rounds = 0;
  bool converged = false;
  /// Claimed cell count after initialization and after every round.
  std::vector<std::int64_t> claimed_history;

  double cell_volume() const;
  std::vector<std::int64_t> cell_counts() const;
  std::vector<double> volumes() const;
  std::int64_t unclaimed_cells() const;
};

/// Wanter/sharer allocation with capacity L^d / |c|. Each point starts with the
/// nearest `quota` cells of its Voronoi cell; the rest is unclaimed and belongs to
/// that point as a sharer. Every round each wanter (volume < capacity - epsilon)
/// applies to its nearest sharer and each sharer serves its closest applicant,
/// nearest cells to the sharer first, up to the applicant's quota.
Allocation balanced_allocation(const Configuration& c, double h, double epsilon = 0.01, int max_rounds = 500);

/// The identity's cell is unclaimed; the caller should resample.
class UnclaimedOrigin : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Index of the owner of the cell containing the identity.
std::size_t extra_head_index(const Allocation& a);
GroupPoint extra_head_point(const Allocation& a);

/// Per-run allocation post-conditions; empty string when all hold.
std::string allocation_violations(const Allocation& a);

struct AllocationCheck {
  double epsilon = 0.01;
  int max_rounds = 500;
  /// Compare extra-head samples with the adjoined-root law (Poisson) rather than
  /// with the process's own Palm battery.
  bool adjoined_reference = true;
};

/// Convergence rate (>= 99%) and post-conditions of balanced_allocation.
std::vector<StatReport> check_allocation(const ProcessModel& model, const AllocationCheck& ac, const CheckOptions& o);

/// Extra-head battery against the reference, plus the nearest-point control that
/// is expected to be rejected.
std::vector<StatReport> check_extra_head(const ProcessModel& model, const AllocationCheck& ac, const CheckOptions& o);

/// E_0[volume of the root's grid Voronoi cell] against 1 / intensity.
StatReport check_voronoi_palm_volume(const ProcessModel& model, const CheckOptions& o);

}  // namespace palmlab
