#include <limits>

#include "palmlab/kernels.hpp"
#include "kernels_common.hpp"

namespace palmlab::kernels {

namespace {

void torus_sqdist_scalar(const TorusView& pts, const std::int32_t* q, double* out) {
  for (std::size_t i = 0; i < pts.n; ++i) out[i] = detail::torus_sq(pts, i, q);
}

Nearest torus_nearest_scalar(const TorusView& pts, const std::uint32_t* labels, const std::int32_t* q,
                             std::uint32_t skip) {
  detail::Best best;
  for (std::size_t i = 0; i < pts.n; ++i) {
    const std::uint32_t label = labels ? labels[i] : static_cast<std::uint32_t>(i);
    if (label == skip) continue;
    best.offer(detail::torus_sq(pts, i, q), label);
  }
  return best.result();
}

std::size_t torus_count_within_scalar(const TorusView& pts, const std::int32_t* q, double r2) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < pts.n; ++i) c += detail::torus_sq(pts, i, q) <= r2 ? 1 : 0;
  return c;
}

void real_sqdist_scalar(const RealView& pts, const double* q, double* out) {
  for (std::size_t i = 0; i < pts.n; ++i) out[i] = detail::real_sq(pts, i, q);
}

Nearest real_nearest_scalar(const RealView& pts, const std::uint32_t* labels, const double* q, std::uint32_t skip) {
  detail::Best best;
  for (std::size_t i = 0; i < pts.n; ++i) {
    const std::uint32_t label = labels ? labels[i] : static_cast<std::uint32_t>(i);
    if (label == skip) continue;
    best.offer(detail::real_sq(pts, i, q), label);
  }
  return best.result();
}

std::size_t real_count_within_scalar(const RealView& pts, const double* q, double r2) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < pts.n; ++i) c += detail::real_sq(pts, i, q) <= r2 ? 1 : 0;
  return c;
}

}  // namespace

const KernelTable& scalar_table() noexcept {
  static const KernelTable table{
      "scalar",          torus_sqdist_scalar, torus_nearest_scalar, torus_count_within_scalar,
      real_sqdist_scalar, real_nearest_scalar, real_count_within_scalar,
  };
  return table;
}

}  // namespace palmlab::kernels
