// Built with -mavx2. Only reachable through avx2_table_unchecked() after the
// dispatcher has confirmed CPU support. Helpers stay in an anonymous namespace
// so no AVX2-encoded inline function can be merged into the scalar objects.

#include <cstring>
#include <limits>

#include "palmlab/kernels.hpp"

#if defined(__AVX2__)
#include <immintrin.h>
#endif

namespace palmlab::kernels {

#if defined(__AVX2__)

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

inline std::int32_t wrap1(std::int32_t d, std::int32_t period) noexcept {
  const std::int32_t half = period / 2;
  if (d > half) d -= period;
  if (d <= -half) d += period;
  return d;
}

inline double torus_sq1(const TorusView& pts, std::size_t i, const std::int32_t* q) noexcept {
  double s = 0.0;
  for (int k = 0; k < pts.dim; ++k) {
    const double d = static_cast<double>(wrap1(pts.axis[k][i] - q[k], pts.period));
    s = s + d * d;
  }
  return s;
}

inline double real_sq1(const RealView& pts, std::size_t i, const double* q) noexcept {
  double s = 0.0;
  for (int k = 0; k < pts.dim; ++k) {
    const double d = pts.axis[k][i] - q[k];
    s = s + d * d;
  }
  return s;
}

// Four lanes of squared min-image distance.
inline __m256d torus_sq4(const TorusView& pts, std::size_t i, const std::int32_t* q) noexcept {
  const __m128i period = _mm_set1_epi32(pts.period);
  const __m128i half = _mm_set1_epi32(pts.period / 2);
  const __m128i neg_half_plus1 = _mm_set1_epi32(-(pts.period / 2) + 1);
  __m256d s = _mm256_setzero_pd();
  for (int k = 0; k < pts.dim; ++k) {
    __m128i d = _mm_sub_epi32(_mm_loadu_si128(reinterpret_cast<const __m128i*>(pts.axis[k] + i)),
                              _mm_set1_epi32(q[k]));
    d = _mm_sub_epi32(d, _mm_and_si128(_mm_cmpgt_epi32(d, half), period));
    d = _mm_add_epi32(d, _mm_and_si128(_mm_cmpgt_epi32(neg_half_plus1, d), period));
    const __m256d dd = _mm256_cvtepi32_pd(d);
    s = _mm256_add_pd(s, _mm256_mul_pd(dd, dd));
  }
  return s;
}

inline __m256d real_sq4(const RealView& pts, std::size_t i, const double* q) noexcept {
  __m256d s = _mm256_setzero_pd();
  for (int k = 0; k < pts.dim; ++k) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(pts.axis[k] + i), _mm256_set1_pd(q[k]));
    s = _mm256_add_pd(s, _mm256_mul_pd(d, d));
  }
  return s;
}

struct Best {
  double value = kInf;
  std::uint32_t label = 0xFFFFFFFFu;
  bool found = false;
  void offer(double v, std::uint32_t l) noexcept {
    if (!found || v < value || (v == value && l < label)) {
      value = v;
      label = l;
      found = true;
    }
  }
};

inline __m256d load_labels(const std::uint32_t* labels, std::size_t i) noexcept {
  if (labels) return _mm256_cvtepi32_pd(_mm_loadu_si128(reinterpret_cast<const __m128i*>(labels + i)));
  const double b = static_cast<double>(i);
  return _mm256_set_pd(b + 3.0, b + 2.0, b + 1.0, b);
}

// Labels above 2^31 would not survive the signed conversion; the callers index
// configurations far below that.
template <class Sq4, class Sq1>
Nearest nearest_impl(std::size_t n, const std::uint32_t* labels, std::uint32_t skip, Sq4 sq4, Sq1 sq1) {
  __m256d best_v = _mm256_set1_pd(kInf);
  __m256d best_l = _mm256_set1_pd(kInf);
  const __m256d skip_l = _mm256_set1_pd(skip == kNoSkip ? -1.0 : static_cast<double>(skip));
  const __m256d inf = _mm256_set1_pd(kInf);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = sq4(i);
    const __m256d l = load_labels(labels, i);
    v = _mm256_blendv_pd(v, inf, _mm256_cmp_pd(l, skip_l, _CMP_EQ_OQ));
    const __m256d lt = _mm256_cmp_pd(v, best_v, _CMP_LT_OQ);
    const __m256d tie = _mm256_and_pd(_mm256_cmp_pd(v, best_v, _CMP_EQ_OQ), _mm256_cmp_pd(l, best_l, _CMP_LT_OQ));
    const __m256d take = _mm256_or_pd(lt, tie);
    best_v = _mm256_blendv_pd(best_v, v, take);
    best_l = _mm256_blendv_pd(best_l, l, take);
  }
  alignas(32) double vs[4];
  alignas(32) double ls[4];
  _mm256_store_pd(vs, best_v);
  _mm256_store_pd(ls, best_l);
  Best best;
  for (int k = 0; k < 4; ++k) {
    if (ls[k] != kInf && vs[k] != kInf) best.offer(vs[k], static_cast<std::uint32_t>(ls[k]));
  }
  for (; i < n; ++i) {
    const std::uint32_t label = labels ? labels[i] : static_cast<std::uint32_t>(i);
    if (label == skip) continue;
    best.offer(sq1(i), label);
  }
  return best.found ? Nearest{best.value, best.label} : Nearest{kInf, SIZE_MAX};
}

void torus_sqdist_avx2(const TorusView& pts, const std::int32_t* q, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= pts.n; i += 4) _mm256_storeu_pd(out + i, torus_sq4(pts, i, q));
  for (; i < pts.n; ++i) out[i] = torus_sq1(pts, i, q);
}

Nearest torus_nearest_avx2(const TorusView& pts, const std::uint32_t* labels, const std::int32_t* q,
                           std::uint32_t skip) {
  return nearest_impl(
      pts.n, labels, skip, [&](std::size_t i) { return torus_sq4(pts, i, q); },
      [&](std::size_t i) { return torus_sq1(pts, i, q); });
}

std::size_t torus_count_within_avx2(const TorusView& pts, const std::int32_t* q, double r2) {
  const __m256d rr = _mm256_set1_pd(r2);
  std::size_t c = 0;
  std::size_t i = 0;
  for (; i + 4 <= pts.n; i += 4) {
    c += static_cast<std::size_t>(
        __builtin_popcount(static_cast<unsigned>(_mm256_movemask_pd(_mm256_cmp_pd(torus_sq4(pts, i, q), rr, _CMP_LE_OQ)))));
  }
  for (; i < pts.n; ++i) c += torus_sq1(pts, i, q) <= r2 ? 1 : 0;
  return c;
}

void real_sqdist_avx2(const RealView& pts, const double* q, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= pts.n; i += 4) _mm256_storeu_pd(out + i, real_sq4(pts, i, q));
  for (; i < pts.n; ++i) out[i] = real_sq1(pts, i, q);
}

Nearest real_nearest_avx2(const RealView& pts, const std::uint32_t* labels, const double* q, std::uint32_t skip) {
  return nearest_impl(
      pts.n, labels, skip, [&](std::size_t i) { return real_sq4(pts, i, q); },
      [&](std::size_t i) { return real_sq1(pts, i, q); });
}

std::size_t real_count_within_avx2(const RealView& pts, const double* q, double r2) {
  const __m256d rr = _mm256_set1_pd(r2);
  std::size_t c = 0;
  std::size_t i = 0;
  for (; i + 4 <= pts.n; i += 4) {
    c += static_cast<std::size_t>(
        __builtin_popcount(static_cast<unsigned>(_mm256_movemask_pd(_mm256_cmp_pd(real_sq4(pts, i, q), rr, _CMP_LE_OQ)))));
  }
  for (; i < pts.n; ++i) c += real_sq1(pts, i, q) <= r2 ? 1 : 0;
  return c;
}

}  // namespace

const KernelTable* avx2_table_unchecked() noexcept {
  static const KernelTable table{
      "avx2",          torus_sqdist_avx2, torus_nearest_avx2, torus_count_within_avx2,
      real_sqdist_avx2, real_nearest_avx2, real_count_within_avx2,
  };
  return &table;
}

#else

const KernelTable* avx2_table_unchecked() noexcept { return nullptr; }

#endif

}  // namespace palmlab::kernels
