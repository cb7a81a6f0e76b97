#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "palmlab/kernels.hpp"
#include "palmlab/process.hpp"

namespace palmlab {

/// Uniform bucket grid over a torus or Euclidean configuration, with points
/// stored bucket-contiguous in structure-of-arrays form for the kernels. Affine
/// configurations fall back to exhaustive scans.
///
/// Distances inside the index are squared and, on the torus, measured in ticks;
/// `length_to_units` converts a radius into the same units.
class NeighborIndex {
 public:
  explicit NeighborIndex(const Configuration& c);

  const Configuration& config() const noexcept { return *config_; }
  double length_to_units(double length) const noexcept { return length / unit_; }
  double units_to_length(double units) const noexcept { return units * unit_; }

  /// Calls f(j, squared distance in units) for every point j within distance r of
  /// point i (j != i). Visiting order is unspecified.
  void for_each_within(std::size_t i, double r, const std::function<void(std::size_t, double)>& f) const;
  /// Same around an arbitrary location (no exclusion).
  void for_each_within(const GroupPoint& q, double r, const std::function<void(std::size_t, double)>& f) const;
  bool any_within(std::size_t i, double r) const;

  /// Nearest other point (ties: smaller canonical index). Requires size() >= 2.
  std::size_t nearest_other(std::size_t i) const;
  /// Nearest point to an arbitrary location (ties: smaller canonical index).
  kernels::Nearest nearest(const GroupPoint& q) const;

  /// Owner (nearest point, ties to the smaller index) of every cell of the
  /// (P/h_ticks)^d torus grid, cell centres at i*h + h/2, row-major with the
  /// first axis slowest. Also returns squared distances in ticks^2.
  void nearest_on_grid(std::int64_t h_ticks, std::vector<std::uint32_t>& owner, std::vector<double>& sqdist) const;

 private:
  struct Slice {
    std::size_t begin;
    std::size_t end;
  };

  void build_torus();
  void build_real();
  std::size_t bucket_linear(const std::array<std::int64_t, 3>& b) const noexcept;
  std::array<std::int64_t, 3> bucket_of(const GroupPoint& p) const noexcept;
  /// Visits the buckets at Chebyshev ring `ring` around `centre`; returns false
  /// when the ring would revisit buckets (the neighbourhood already covers the grid).
  bool visit_ring(const std::array<std::int64_t, 3>& centre, std::int64_t ring,
                  const std::function<void(const Slice&)>& f) const;
  void visit_all(const std::function<void(const Slice&)>& f) const;
  kernels::TorusView torus_slice(const Slice& s) const noexcept;
  kernels::RealView real_slice(const Slice& s) const noexcept;
  void query_coords(const GroupPoint& q, std::int32_t* tq, double* rq) const noexcept;
  double bucket_side_units(int axis) const noexcept;

  const Configuration* config_;
  CarrierKind kind_;
  int dim_;
  double unit_ = 1.0;
  std::int32_t period_ = 0;
  std::array<std::int64_t, 3> buckets_{1, 1, 1};
  std::array<double, 3> origin_{};
  std::array<double, 3> side_{};
  std::vector<std::size_t> start_;  // CSR offsets, size = total buckets + 1
  std::vector<std::uint32_t> label_;
  std::array<std::vector<std::int32_t>, 3> ticks_;
  std::array<std::vector<double>, 3> real_;
};

}  // namespace palmlab
