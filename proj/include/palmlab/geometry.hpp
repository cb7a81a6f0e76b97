#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>

#include "palmlab/random.hpp"

namespace palmlab {

enum class CarrierKind : std::uint8_t { FlatTorus, EuclideanBox, AffineLine };

std::string to_string(CarrierKind kind);

/// An element of the carrier group. Torus and Euclidean points use the first
/// `dim` coordinates; affine points are (a, b) with a > 0, acting by x -> a x + b.
struct GroupPoint {
  CarrierKind kind = CarrierKind::FlatTorus;
  std::uint8_t dim = 0;
  std::array<double, 3> x{};

  double operator[](std::size_t i) const { return x[i]; }
  friend bool operator==(const GroupPoint&, const GroupPoint&) = default;
};

/// Lexicographic order on coordinates; the canonical order of configurations.
bool lex_less(const GroupPoint& a, const GroupPoint& b) noexcept;

/// Integer torus coordinates. Each entry lies in [0, period).
using Ticks = std::array<std::int32_t, 3>;

/// The ambient group G: its law, a left-invariant proper metric and left Haar density.
///
/// Three instances:
///  - FlatTorus(d, L): R^d / L Z^d. Coordinates are held on a grid of ticks of
///    size 2^-k (largest k with L 2^k <= 2^30) so that the group law is exact
///    integer arithmetic. L must be a whole number of ticks.
///  - EuclideanBox(d): R^d, for boundary-effect experiments.
///  - AffineLine: {(a, b) : a > 0} with (a,b)(a',b') = (a a', a b' + b), left Haar
///    density da db / a^2 and the hyperbolic metric of the upper half-plane on b + i a.
///    Not unimodular.
class CarrierGroup {
 public:
  static CarrierGroup flat_torus(int dim, double side);
  static CarrierGroup euclidean(int dim);
  static CarrierGroup affine_line();

  CarrierKind kind() const noexcept { return kind_; }
  int dim() const noexcept { return dim_; }
  /// Torus side length L (0 for the other carriers).
  double side() const noexcept { return side_; }
  bool is_unimodular() const noexcept { return kind_ != CarrierKind::AffineLine; }

  GroupPoint identity() const noexcept;
  /// Builds a validated point; torus coordinates are reduced mod L and snapped to ticks.
  GroupPoint point(std::span<const double> coords) const;
  GroupPoint point(std::initializer_list<double> coords) const {
    return point(std::span<const double>(coords.begin(), coords.size()));
  }

  GroupPoint mul(const GroupPoint& g, const GroupPoint& h) const;
  GroupPoint inv(const GroupPoint& g) const;
  double distance(const GroupPoint& g, const GroupPoint& h) const;
  double haar_density(const GroupPoint& g) const;
  /// |det| of the differential of x -> x g (constant in x for all three carriers).
  double right_jacobian(const GroupPoint& g) const;

  /// Throws UsageError unless g belongs to this carrier.
  void check(const GroupPoint& g) const;

  // Fixed-point torus access.
  std::int32_t period() const noexcept { return period_; }
  double tick() const noexcept { return tick_; }
  Ticks ticks(const GroupPoint& g) const noexcept;
  GroupPoint from_ticks(const Ticks& t) const noexcept;
  /// Nearest whole number of ticks for a length.
  std::int64_t length_to_ticks(double length) const noexcept;

  std::string describe() const;

  friend bool operator==(const CarrierGroup& a, const CarrierGroup& b) noexcept {
    return a.kind_ == b.kind_ && a.dim_ == b.dim_ && a.side_ == b.side_;
  }

 private:
  CarrierGroup(CarrierKind kind, int dim, double side);

  CarrierKind kind_;
  int dim_;
  double side_ = 0.0;
  std::int32_t period_ = 0;
  double tick_ = 0.0;
};

/// Minimum-image difference of two tick coordinates, in (-period/2, period/2].
inline std::int32_t wrap_delta(std::int32_t a, std::int32_t b, std::int32_t period) noexcept {
  std::int32_t d = a - b;
  const std::int32_t half = period / 2;
  if (d > half) d -= period;
  if (d <= -half) d += period;
  return d;
}

/// Axis-aligned region. Torus windows are sub-boxes of [0, L)^d; affine windows
/// are {(a, b) : a in [lo0, hi0), b in [lo1, hi1)}.
struct Window {
  CarrierKind kind = CarrierKind::FlatTorus;
  int dim = 0;
  std::array<double, 3> lo{};
  std::array<double, 3> hi{};

  static Window full(const CarrierGroup& g);
  static Window box(const CarrierGroup& g, std::span<const double> lo, std::span<const double> hi);
  static Window box(const CarrierGroup& g, std::initializer_list<double> lo, std::initializer_list<double> hi) {
    return box(g, std::span<const double>(lo.begin(), lo.size()), std::span<const double>(hi.begin(), hi.size()));
  }

  bool contains(const GroupPoint& p) const noexcept;
  bool empty() const noexcept;
  friend bool operator==(const Window&, const Window&) = default;
};

/// Left Haar measure of a window; 0 for degenerate windows.
double haar_volume(const Window& w);

/// Adaptive Gauss-Kronrod integral of `f` over the window box (coordinates, not group points).
double integrate_box(const Window& w, const std::function<double(const std::array<double, 3>&)>& f);

/// lambda(W f^-1), by quadrature of the pulled-back Haar density over W.
double right_translate_volume(const CarrierGroup& g, const Window& w, const GroupPoint& f);

/// A point distributed proportionally to Haar measure restricted to w.
GroupPoint sample_uniform(const CarrierGroup& g, const Window& w, Rng& rng);

}  // namespace palmlab
