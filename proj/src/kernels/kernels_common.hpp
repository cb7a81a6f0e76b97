#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>

#include "palmlab/kernels.hpp"

namespace palmlab::kernels::detail {

inline std::int32_t wrap(std::int32_t d, std::int32_t period) noexcept {
  const std::int32_t half = period / 2;
  if (d > half) d -= period;
  if (d <= -half) d += period;
  return d;
}

inline double torus_sq(const TorusView& pts, std::size_t i, const std::int32_t* q) noexcept {
  double s = 0.0;
  for (int k = 0; k < pts.dim; ++k) {
    const double d = static_cast<double>(wrap(pts.axis[k][i] - q[k], pts.period));
    s = s + d * d;
  }
  return s;
}

inline double real_sq(const RealView& pts, std::size_t i, const double* q) noexcept {
  double s = 0.0;
  for (int k = 0; k < pts.dim; ++k) {
    const double d = pts.axis[k][i] - q[k];
    s = s + d * d;
  }
  return s;
}

/// Running minimum of (sqdist, label) in the total order used by every kernel.
struct Best {
  double value = std::numeric_limits<double>::infinity();
  std::uint32_t label = 0xFFFFFFFFu;
  bool found = false;

  void offer(double v, std::uint32_t l) noexcept {
    if (!found || v < value || (v == value && l < label)) {
      value = v;
      label = l;
      found = true;
    }
  }
  Nearest result() const noexcept {
    return found ? Nearest{value, label} : Nearest{std::numeric_limits<double>::infinity(), SIZE_MAX};
  }
};

}  // namespace palmlab::kernels::detail
