#include "palmlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "palmlab/error.hpp"

namespace palmlab {

std::string to_string(CarrierKind kind) {
  switch (kind) {
    case CarrierKind::FlatTorus: return "torus";
    case CarrierKind::EuclideanBox: return "euclidean";
    case CarrierKind::AffineLine: return "affine";
  }
  return "unknown";
}

bool lex_less(const GroupPoint& a, const GroupPoint& b) noexcept {
  return std::lexicographical_compare(a.x.begin(), a.x.begin() + a.dim, b.x.begin(), b.x.begin() + b.dim);
}

CarrierGroup::CarrierGroup(CarrierKind kind, int dim, double side) : kind_(kind), dim_(dim), side_(side) {}

CarrierGroup CarrierGroup::flat_torus(int dim, double side) {
  if (dim < 1 || dim > 3) throw UsageError("torus dimension must be 1, 2 or 3");
  if (!(side > 0.0) || !std::isfinite(side)) throw UsageError("torus side must be positive and finite");
  CarrierGroup g(CarrierKind::FlatTorus, dim, side);
  int exponent = static_cast<int>(std::floor(std::log2(std::ldexp(1.0, 30) / side)));
  while (std::ldexp(side, exponent) > std::ldexp(1.0, 30)) --exponent;
  const double scaled = std::ldexp(side, exponent);
  if (scaled != std::floor(scaled) || scaled < 16.0) {
    throw UsageError("torus side must be a whole number of 2^-" + std::to_string(exponent) + " ticks");
  }
  g.period_ = static_cast<std::int32_t>(scaled);
  g.tick_ = std::ldexp(1.0, -exponent);
  return g;
}

CarrierGroup CarrierGroup::euclidean(int dim) {
  if (dim < 1 || dim > 3) throw UsageError("euclidean dimension must be 1, 2 or 3");
  return CarrierGroup(CarrierKind::EuclideanBox, dim, 0.0);
}

CarrierGroup CarrierGroup::affine_line() { return CarrierGroup(CarrierKind::AffineLine, 2, 0.0); }

GroupPoint CarrierGroup::identity() const noexcept {
  GroupPoint p{kind_, static_cast<std::uint8_t>(dim_), {}};
  if (kind_ == CarrierKind::AffineLine) p.x[0] = 1.0;
  return p;
}

std::int64_t CarrierGroup::length_to_ticks(double length) const noexcept {
  return std::llround(length / tick_);
}

Ticks CarrierGroup::ticks(const GroupPoint& g) const noexcept {
  Ticks t{};
  for (int i = 0; i < dim_; ++i) t[i] = static_cast<std::int32_t>(std::llround(g.x[i] / tick_));
  return t;
}

GroupPoint CarrierGroup::from_ticks(const Ticks& t) const noexcept {
  GroupPoint p{kind_, static_cast<std::uint8_t>(dim_), {}};
  for (int i = 0; i < dim_; ++i) p.x[i] = static_cast<double>(t[i]) * tick_;
  return p;
}

GroupPoint CarrierGroup::point(std::span<const double> coords) const {
  if (static_cast<int>(coords.size()) != dim_) {
    throw UsageError("expected " + std::to_string(dim_) + " coordinates, got " + std::to_string(coords.size()));
  }
  for (double c : coords) {
    if (!std::isfinite(c)) throw UsageError("non-finite coordinate");
  }
  GroupPoint p{kind_, static_cast<std::uint8_t>(dim_), {}};
  switch (kind_) {
    case CarrierKind::FlatTorus: {
      Ticks t{};
      for (int i = 0; i < dim_; ++i) {
        std::int64_t v = std::llround(coords[i] / tick_) % period_;
        if (v < 0) v += period_;
        t[i] = static_cast<std::int32_t>(v);
      }
      return from_ticks(t);
    }
    case CarrierKind::EuclideanBox:
      std::copy(coords.begin(), coords.end(), p.x.begin());
      return p;
    case CarrierKind::AffineLine:
      if (!(coords[0] > 0.0)) throw UsageError("affine scale coordinate must be positive");
      p.x[0] = coords[0];
      p.x[1] = coords[1];
      return p;
  }
  return p;
}

void CarrierGroup::check(const GroupPoint& g) const {
  if (g.kind != kind_ || g.dim != dim_) {
    throw UsageError("point of carrier " + to_string(g.kind) + "/" + std::to_string(g.dim) + " used with " + describe());
  }
}

GroupPoint CarrierGroup::mul(const GroupPoint& g, const GroupPoint& h) const {
  check(g);
  check(h);
  switch (kind_) {
    case CarrierKind::FlatTorus: {
      const Ticks a = ticks(g), b = ticks(h);
      Ticks c{};
      for (int i = 0; i < dim_; ++i) {
        std::int64_t s = static_cast<std::int64_t>(a[i]) + b[i];
        if (s >= period_) s -= period_;
        c[i] = static_cast<std::int32_t>(s);
      }
      return from_ticks(c);
    }
    case CarrierKind::EuclideanBox: {
      GroupPoint r = g;
      for (int i = 0; i < dim_; ++i) r.x[i] = g.x[i] + h.x[i];
      return r;
    }
    case CarrierKind::AffineLine: {
      GroupPoint r = g;
      r.x[0] = g.x[0] * h.x[0];
      r.x[1] = g.x[0] * h.x[1] + g.x[1];
      return r;
    }
  }
  return g;
}

GroupPoint CarrierGroup::inv(const GroupPoint& g) const {
  check(g);
  switch (kind_) {
    case CarrierKind::FlatTorus: {
      Ticks a = ticks(g);
      for (int i = 0; i < dim_; ++i) a[i] = a[i] == 0 ? 0 : period_ - a[i];
      return from_ticks(a);
    }
    case CarrierKind::EuclideanBox: {
      GroupPoint r = g;
      for (int i = 0; i < dim_; ++i) r.x[i] = -g.x[i];
      return r;
    }
    case CarrierKind::AffineLine: {
      GroupPoint r = g;
      r.x[0] = 1.0 / g.x[0];
      r.x[1] = -g.x[1] / g.x[0];
      return r;
    }
  }
  return g;
}

double CarrierGroup::distance(const GroupPoint& g, const GroupPoint& h) const {
  check(g);
  check(h);
  switch (kind_) {
    case CarrierKind::FlatTorus: {
      const Ticks a = ticks(g), b = ticks(h);
      double s = 0.0;
      for (int i = 0; i < dim_; ++i) {
        const double d = static_cast<double>(wrap_delta(a[i], b[i], period_));
        s += d * d;
      }
      return std::sqrt(s) * tick_;
    }
    case CarrierKind::EuclideanBox: {
      double s = 0.0;
      for (int i = 0; i < dim_; ++i) {
        const double d = g.x[i] - h.x[i];
        s += d * d;
      }
      return std::sqrt(s);
    }
    case CarrierKind::AffineLine: {
      // Upper half-plane point z = b + i a; d = 2 asinh(|z - w| / (2 sqrt(Im z Im w))).
      const double da = g.x[0] - h.x[0];
      const double db = g.x[1] - h.x[1];
      return 2.0 * std::asinh(std::hypot(da, db) / (2.0 * std::sqrt(g.x[0] * h.x[0])));
    }
  }
  return 0.0;
}

double CarrierGroup::haar_density(const GroupPoint& g) const {
  check(g);
  return kind_ == CarrierKind::AffineLine ? 1.0 / (g.x[0] * g.x[0]) : 1.0;
}

double CarrierGroup::right_jacobian(const GroupPoint& g) const {
  check(g);
  // (a, b)(alpha, beta) = (a alpha, a beta + b): differential [[alpha, 0], [beta, 1]].
  return kind_ == CarrierKind::AffineLine ? g.x[0] : 1.0;
}

std::string CarrierGroup::describe() const {
  std::ostringstream os;
  os << to_string(kind_) << "(d=" << dim_;
  if (kind_ == CarrierKind::FlatTorus) os << ", L=" << side_;
  os << ")";
  return os.str();
}

Window Window::full(const CarrierGroup& g) {
  if (g.kind() != CarrierKind::FlatTorus) throw UsageError("only the torus has a finite full window");
  Window w{g.kind(), g.dim(), {}, {}};
  for (int i = 0; i < g.dim(); ++i) w.hi[i] = g.side();
  return w;
}

Window Window::box(const CarrierGroup& g, std::span<const double> lo, std::span<const double> hi) {
  if (static_cast<int>(lo.size()) != g.dim() || static_cast<int>(hi.size()) != g.dim()) {
    throw UsageError("window corner dimension mismatch");
  }
  Window w{g.kind(), g.dim(), {}, {}};
  for (int i = 0; i < g.dim(); ++i) {
    if (!std::isfinite(lo[i]) || !std::isfinite(hi[i])) throw UsageError("window corners must be finite");
    if (lo[i] > hi[i]) throw UsageError("window lower corner exceeds upper corner");
    if (g.kind() == CarrierKind::FlatTorus && (lo[i] < 0.0 || hi[i] > g.side())) {
      throw UsageError("torus window must lie inside [0, L)");
    }
    w.lo[i] = lo[i];
    w.hi[i] = hi[i];
  }
  if (g.kind() == CarrierKind::AffineLine && !(w.lo[0] > 0.0)) throw UsageError("affine window needs a > 0");
  return w;
}

bool Window::contains(const GroupPoint& p) const noexcept {
  if (p.kind != kind || p.dim != dim) return false;
  for (int i = 0; i < dim; ++i) {
    if (!(p.x[i] >= lo[i] && p.x[i] < hi[i])) return false;
  }
  return true;
}

bool Window::empty() const noexcept {
  for (int i = 0; i < dim; ++i) {
    if (!(hi[i] > lo[i])) return true;
  }
  return false;
}

double haar_volume(const Window& w) {
  if (w.empty()) return 0.0;
  if (w.kind == CarrierKind::AffineLine) return (1.0 / w.lo[0] - 1.0 / w.hi[0]) * (w.hi[1] - w.lo[1]);
  double v = 1.0;
  for (int i = 0; i < w.dim; ++i) v *= w.hi[i] - w.lo[i];
  return v;
}

namespace {

double integrate_axis(const Window& w, int axis, std::array<double, 3>& x,
                      const std::function<double(const std::array<double, 3>&)>& f) {
  using boost::math::quadrature::gauss_kronrod;
  auto inner = [&](double t) {
    x[axis] = t;
    return axis + 1 == w.dim ? f(x) : integrate_axis(w, axis + 1, x, f);
  };
  return gauss_kronrod<double, 31>::integrate(inner, w.lo[axis], w.hi[axis], 15, 1e-12);
}

}  // namespace

double integrate_box(const Window& w, const std::function<double(const std::array<double, 3>&)>& f) {
  if (w.empty()) return 0.0;
  std::array<double, 3> x{};
  return integrate_axis(w, 0, x, f);
}

double right_translate_volume(const CarrierGroup& g, const Window& w, const GroupPoint& f) {
  g.check(f);
  if (w.kind != g.kind() || w.dim != g.dim()) throw UsageError("window and translate on different carriers");
  const GroupPoint finv = g.inv(f);
  const double jac = g.right_jacobian(finv);
  // Change of variables y = x f^-1 over x in W.
  return integrate_box(w, [&](const std::array<double, 3>& x) {
    GroupPoint p{g.kind(), static_cast<std::uint8_t>(g.dim()), x};
    if (g.kind() == CarrierKind::FlatTorus) return jac;
    return g.haar_density(g.mul(p, finv)) * jac;
  });
}

GroupPoint sample_uniform(const CarrierGroup& g, const Window& w, Rng& rng) {
  if (w.kind != g.kind() || w.dim != g.dim()) throw UsageError("window on a different carrier");
  const double vol = haar_volume(w);
  if (!(vol > 0.0) || !std::isfinite(vol)) throw UsageError("cannot sample from a zero-volume window");
  GroupPoint p{g.kind(), static_cast<std::uint8_t>(g.dim()), {}};
  switch (g.kind()) {
    case CarrierKind::FlatTorus: {
      Ticks t{};
      for (int i = 0; i < g.dim(); ++i) {
        const auto lo = static_cast<std::int64_t>(std::ceil(w.lo[i] / g.tick()));
        const auto hi = static_cast<std::int64_t>(std::ceil(w.hi[i] / g.tick()));
        std::uniform_int_distribution<std::int64_t> pick(lo, hi - 1);
        t[i] = static_cast<std::int32_t>(pick(rng) % g.period());
      }
      return g.from_ticks(t);
    }
    case CarrierKind::EuclideanBox: {
      for (int i = 0; i < g.dim(); ++i) {
        std::uniform_real_distribution<double> u(w.lo[i], w.hi[i]);
        p.x[i] = u(rng);
      }
      return p;
    }
    case CarrierKind::AffineLine: {
      std::uniform_real_distribution<double> u01(0.0, 1.0);
      // Inverse transform of the marginal density proportional to a^-2 on [a0, a1).
      const double inv0 = 1.0 / w.lo[0], inv1 = 1.0 / w.hi[0];
      p.x[0] = 1.0 / (inv0 - u01(rng) * (inv0 - inv1));
      p.x[1] = w.lo[1] + u01(rng) * (w.hi[1] - w.lo[1]);
      for (int i = 0; i < 2; ++i) {
        if (p.x[i] >= w.hi[i]) p.x[i] = std::nextafter(w.hi[i], w.lo[i]);
      }
      return p;
    }
  }
  return p;
}

}  // namespace palmlab
