#pragma once

// Distance inner loops shared by the factor, Voronoi, allocation and Palm code.
//
// Every kernel has a scalar reference implementation and an AVX2 variant. The
// variants perform the same IEEE operations in the same order (no FMA), so
// their outputs are bit-identical; the dispatcher picks one at startup and the
// equivalence tests hold both to that.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace palmlab::kernels {

/// Structure-of-arrays view of torus tick coordinates.
struct TorusView {
  const std::int32_t* axis[3] = {nullptr, nullptr, nullptr};
  std::size_t n = 0;
  int dim = 0;
  std::int32_t period = 0;
};

/// Structure-of-arrays view of real coordinates.
struct RealView {
  const double* axis[3] = {nullptr, nullptr, nullptr};
  std::size_t n = 0;
  int dim = 0;
};

/// Result of a nearest search. `index` is SIZE_MAX when nothing qualified.
struct Nearest {
  double sqdist;
  std::size_t index;
};

struct KernelTable {
  std::string_view name;
  /// out[i] = squared min-image distance (in ticks^2) from q to point i.
  void (*torus_sqdist)(const TorusView& pts, const std::int32_t* q, double* out);
  /// Smallest (sqdist, label) over points, skipping label == skip. Ties go to the smaller label.
  Nearest (*torus_nearest)(const TorusView& pts, const std::uint32_t* labels, const std::int32_t* q,
                           std::uint32_t skip);
  /// Number of points with sqdist <= r2.
  std::size_t (*torus_count_within)(const TorusView& pts, const std::int32_t* q, double r2);

  void (*real_sqdist)(const RealView& pts, const double* q, double* out);
  Nearest (*real_nearest)(const RealView& pts, const std::uint32_t* labels, const double* q, std::uint32_t skip);
  std::size_t (*real_count_within)(const RealView& pts, const double* q, double r2);
};

inline constexpr std::uint32_t kNoSkip = 0xFFFFFFFFu;

const KernelTable& scalar_table() noexcept;
/// nullptr when the binary or the CPU lacks AVX2.
const KernelTable* avx2_table() noexcept;

/// The table in use: AVX2 when available unless PALMLAB_SIMD=scalar is set.
const KernelTable& active() noexcept;

}  // namespace palmlab::kernels
