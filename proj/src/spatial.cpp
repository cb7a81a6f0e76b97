#include "palmlab/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "palmlab/error.hpp"

namespace palmlab {

namespace {

void offer(kernels::Nearest& best, const kernels::Nearest& cand) {
  if (cand.index == SIZE_MAX) return;
  if (best.index == SIZE_MAX || cand.sqdist < best.sqdist || (cand.sqdist == best.sqdist && cand.index < best.index)) {
    best = cand;
  }
}

}  // namespace

NeighborIndex::NeighborIndex(const Configuration& c)
    : config_(&c), kind_(c.carrier().kind()), dim_(c.carrier().dim()) {
  if (c.size() >= 0xFFFFFFFFull) throw UsageError("configuration too large for the neighbour index");
  switch (kind_) {
    case CarrierKind::FlatTorus: build_torus(); break;
    case CarrierKind::EuclideanBox: build_real(); break;
    case CarrierKind::AffineLine:
      start_ = {0, c.size()};
      label_.resize(c.size());
      for (std::size_t i = 0; i < c.size(); ++i) label_[i] = static_cast<std::uint32_t>(i);
      break;
  }
}

void NeighborIndex::build_torus() {
  const Configuration& c = *config_;
  unit_ = c.carrier().tick();
  period_ = c.carrier().period();
  const double per_axis = std::pow(std::max<double>(1.0, c.size() / 2.0), 1.0 / dim_);
  const auto b = std::clamp<std::int64_t>(static_cast<std::int64_t>(per_axis), 1, 1024);
  for (int k = 0; k < 3; ++k) buckets_[k] = k < dim_ ? b : 1;
  for (int k = 0; k < dim_; ++k) side_[k] = static_cast<double>(period_) / static_cast<double>(b);

  std::size_t total = 1;
  for (int k = 0; k < dim_; ++k) total *= static_cast<std::size_t>(buckets_[k]);
  std::vector<std::size_t> bucket_of_point(c.size());
  start_.assign(total + 1, 0);
  for (std::size_t i = 0; i < c.size(); ++i) {
    bucket_of_point[i] = bucket_linear(bucket_of(c[i]));
    ++start_[bucket_of_point[i] + 1];
  }
  for (std::size_t k = 0; k < total; ++k) start_[k + 1] += start_[k];
  std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
  label_.resize(c.size());
  for (int k = 0; k < dim_; ++k) ticks_[k].resize(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const std::size_t slot = fill[bucket_of_point[i]]++;
    label_[slot] = static_cast<std::uint32_t>(i);
    const Ticks t = c.carrier().ticks(c[i]);
    for (int k = 0; k < dim_; ++k) ticks_[k][slot] = t[k];
  }
}

void NeighborIndex::build_real() {
  const Configuration& c = *config_;
  const Window& w = c.window();
  const double per_axis = std::pow(std::max<double>(1.0, c.size() / 2.0), 1.0 / dim_);
  const auto b = std::clamp<std::int64_t>(static_cast<std::int64_t>(per_axis), 1, 1024);
  for (int k = 0; k < 3; ++k) buckets_[k] = k < dim_ ? b : 1;
  for (int k = 0; k < dim_; ++k) {
    origin_[k] = w.lo[k];
    side_[k] = std::max((w.hi[k] - w.lo[k]) / static_cast<double>(b), 1e-300);
  }
  std::size_t total = 1;
  for (int k = 0; k < dim_; ++k) total *= static_cast<std::size_t>(buckets_[k]);
  std::vector<std::size_t> bucket_of_point(c.size());
  start_.assign(total + 1, 0);
  for (std::size_t i = 0; i < c.size(); ++i) {
    bucket_of_point[i] = bucket_linear(bucket_of(c[i]));
    ++start_[bucket_of_point[i] + 1];
  }
  for (std::size_t k = 0; k < total; ++k) start_[k + 1] += start_[k];
  std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
  label_.resize(c.size());
  for (int k = 0; k < dim_; ++k) real_[k].resize(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const std::size_t slot = fill[bucket_of_point[i]]++;
    label_[slot] = static_cast<std::uint32_t>(i);
    for (int k = 0; k < dim_; ++k) real_[k][slot] = c[i][k];
  }
}

std::size_t NeighborIndex::bucket_linear(const std::array<std::int64_t, 3>& b) const noexcept {
  std::size_t idx = 0;
  for (int k = 0; k < dim_; ++k) idx = idx * static_cast<std::size_t>(buckets_[k]) + static_cast<std::size_t>(b[k]);
  return idx;
}

std::array<std::int64_t, 3> NeighborIndex::bucket_of(const GroupPoint& p) const noexcept {
  std::array<std::int64_t, 3> b{};
  if (kind_ == CarrierKind::FlatTorus) {
    const Ticks t = config_->carrier().ticks(p);
    for (int k = 0; k < dim_; ++k) {
      std::int64_t v = t[k] % period_;
      if (v < 0) v += period_;
      b[k] = v * buckets_[k] / period_;
    }
  } else if (kind_ == CarrierKind::EuclideanBox) {
    for (int k = 0; k < dim_; ++k) {
      const double f = std::floor((p[k] - origin_[k]) / side_[k]);
      b[k] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::clamp(f, -1.0, 1e9)), 0, buckets_[k] - 1);
    }
  }
  return b;
}

double NeighborIndex::bucket_side_units(int axis) const noexcept { return side_[axis]; }

bool NeighborIndex::visit_ring(const std::array<std::int64_t, 3>& centre, std::int64_t ring,
                               const std::function<void(const Slice&)>& f) const {
  if (kind_ == CarrierKind::FlatTorus) {
    for (int k = 0; k < dim_; ++k) {
      if (2 * ring + 1 > buckets_[k]) return false;
    }
  } else {
    bool any_inside = false;
    for (int k = 0; k < dim_; ++k) {
      if (centre[k] - ring >= 0 || centre[k] + ring < buckets_[k]) any_inside = true;
    }
    if (!any_inside) return false;
  }
  std::array<std::int64_t, 3> off{};
  for (int k = 0; k < dim_; ++k) off[k] = -ring;
  for (;;) {
    std::int64_t cheb = 0;
    for (int k = 0; k < dim_; ++k) cheb = std::max(cheb, std::abs(off[k]));
    if (cheb == ring) {
      std::array<std::int64_t, 3> b{};
      bool inside = true;
      for (int k = 0; k < dim_; ++k) {
        std::int64_t v = centre[k] + off[k];
        if (kind_ == CarrierKind::FlatTorus) {
          v = ((v % buckets_[k]) + buckets_[k]) % buckets_[k];
        } else if (v < 0 || v >= buckets_[k]) {
          inside = false;
        }
        b[k] = v;
      }
      if (inside) {
        const std::size_t lin = bucket_linear(b);
        if (start_[lin + 1] > start_[lin]) f(Slice{start_[lin], start_[lin + 1]});
      }
    }
    int k = dim_ - 1;
    while (k >= 0 && off[k] == ring) {
      off[k] = -ring;
      --k;
    }
    if (k < 0) break;
    ++off[k];
  }
  return true;
}

void NeighborIndex::visit_all(const std::function<void(const Slice&)>& f) const {
  if (!label_.empty()) f(Slice{0, label_.size()});
}

kernels::TorusView NeighborIndex::torus_slice(const Slice& s) const noexcept {
  kernels::TorusView v;
  for (int k = 0; k < dim_; ++k) v.axis[k] = ticks_[k].data() + s.begin;
  v.n = s.end - s.begin;
  v.dim = dim_;
  v.period = period_;
  return v;
}

kernels::RealView NeighborIndex::real_slice(const Slice& s) const noexcept {
  kernels::RealView v;
  for (int k = 0; k < dim_; ++k) v.axis[k] = real_[k].data() + s.begin;
  v.n = s.end - s.begin;
  v.dim = dim_;
  return v;
}

void NeighborIndex::query_coords(const GroupPoint& q, std::int32_t* tq, double* rq) const noexcept {
  if (kind_ == CarrierKind::FlatTorus) {
    const Ticks t = config_->carrier().ticks(q);
    for (int k = 0; k < dim_; ++k) tq[k] = t[k];
  } else {
    for (int k = 0; k < dim_; ++k) rq[k] = q[k];
  }
}

void NeighborIndex::for_each_within(const GroupPoint& q, double r,
                                    const std::function<void(std::size_t, double)>& f) const {
  const Configuration& c = *config_;
  if (kind_ == CarrierKind::AffineLine) {
    for (std::size_t j = 0; j < c.size(); ++j) {
      const double d = c.carrier().distance(q, c[j]);
      if (d <= r) f(j, d * d);
    }
    return;
  }
  const double r_units = length_to_units(r);
  const double r2 = r_units * r_units;
  std::int32_t tq[3] = {0, 0, 0};
  double rq[3] = {0, 0, 0};
  query_coords(q, tq, rq);
  const auto& K = kernels::active();
  std::vector<double> buf;
  auto scan = [&](const Slice& s) {
    buf.resize(s.end - s.begin);
    if (kind_ == CarrierKind::FlatTorus) {
      K.torus_sqdist(torus_slice(s), tq, buf.data());
    } else {
      K.real_sqdist(real_slice(s), rq, buf.data());
    }
    for (std::size_t i = 0; i < buf.size(); ++i) {
      if (buf[i] <= r2) f(label_[s.begin + i], buf[i]);
    }
  };
  double min_side = std::numeric_limits<double>::infinity();
  for (int k = 0; k < dim_; ++k) min_side = std::min(min_side, bucket_side_units(k));
  const auto rings = static_cast<std::int64_t>(std::ceil(r_units / min_side));
  const auto centre = bucket_of(q);
  bool outside = false;
  if (kind_ == CarrierKind::EuclideanBox) outside = !c.window().contains(q);
  bool covers = outside;
  for (int k = 0; k < dim_; ++k) {
    if (kind_ == CarrierKind::FlatTorus && 2 * rings + 1 > buckets_[k]) covers = true;
  }
  if (covers) {
    visit_all(scan);
    return;
  }
  for (std::int64_t ring = 0; ring <= rings; ++ring) {
    if (!visit_ring(centre, ring, scan)) break;
  }
}

void NeighborIndex::for_each_within(std::size_t i, double r, const std::function<void(std::size_t, double)>& f) const {
  for_each_within((*config_)[i], r, [&](std::size_t j, double d2) {
    if (j != i) f(j, d2);
  });
}

bool NeighborIndex::any_within(std::size_t i, double r) const {
  bool found = false;
  for_each_within(i, r, [&](std::size_t, double) { found = true; });
  return found;
}

kernels::Nearest NeighborIndex::nearest(const GroupPoint& q) const {
  const Configuration& c = *config_;
  kernels::Nearest best{std::numeric_limits<double>::infinity(), SIZE_MAX};
  if (c.empty()) return best;
  if (kind_ == CarrierKind::AffineLine) {
    for (std::size_t j = 0; j < c.size(); ++j) {
      const double d = c.carrier().distance(q, c[j]);
      offer(best, {d * d, j});
    }
    return best;
  }
  std::int32_t tq[3] = {0, 0, 0};
  double rq[3] = {0, 0, 0};
  query_coords(q, tq, rq);
  const auto& K = kernels::active();
  auto scan = [&](const Slice& s) {
    const kernels::Nearest n = kind_ == CarrierKind::FlatTorus
                                   ? K.torus_nearest(torus_slice(s), label_.data() + s.begin, tq, kernels::kNoSkip)
                                   : K.real_nearest(real_slice(s), label_.data() + s.begin, rq, kernels::kNoSkip);
    offer(best, n);
  };
  if (kind_ == CarrierKind::EuclideanBox && !c.window().contains(q)) {
    visit_all(scan);
    return best;
  }
  double min_side = std::numeric_limits<double>::infinity();
  for (int k = 0; k < dim_; ++k) min_side = std::min(min_side, bucket_side_units(k));
  const auto centre = bucket_of(q);
  for (std::int64_t ring = 0;; ++ring) {
    if (!visit_ring(centre, ring, scan)) {
      if (kind_ == CarrierKind::FlatTorus) {
        best = {std::numeric_limits<double>::infinity(), SIZE_MAX};
        visit_all(scan);
      }
      break;
    }
    // Everything outside rings 0..ring is at least ring * side away.
    const double reach = static_cast<double>(ring) * min_side;
    if (best.index != SIZE_MAX && best.sqdist < reach * reach) break;
  }
  return best;
}

std::size_t NeighborIndex::nearest_other(std::size_t i) const {
  const Configuration& c = *config_;
  if (c.size() < 2) throw UsageError("nearest neighbour needs at least two points");
  if (kind_ == CarrierKind::AffineLine) {
    kernels::Nearest best{std::numeric_limits<double>::infinity(), SIZE_MAX};
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (j == i) continue;
      const double d = c.carrier().distance(c[i], c[j]);
      offer(best, {d * d, j});
    }
    return best.index;
  }
  std::int32_t tq[3] = {0, 0, 0};
  double rq[3] = {0, 0, 0};
  query_coords(c[i], tq, rq);
  const auto& K = kernels::active();
  const auto skip = static_cast<std::uint32_t>(i);
  kernels::Nearest best{std::numeric_limits<double>::infinity(), SIZE_MAX};
  auto scan = [&](const Slice& s) {
    const kernels::Nearest n = kind_ == CarrierKind::FlatTorus
                                   ? K.torus_nearest(torus_slice(s), label_.data() + s.begin, tq, skip)
                                   : K.real_nearest(real_slice(s), label_.data() + s.begin, rq, skip);
    offer(best, n);
  };
  double min_side = std::numeric_limits<double>::infinity();
  for (int k = 0; k < dim_; ++k) min_side = std::min(min_side, bucket_side_units(k));
  const auto centre = bucket_of(c[i]);
  for (std::int64_t ring = 0;; ++ring) {
    if (!visit_ring(centre, ring, scan)) {
      if (kind_ == CarrierKind::FlatTorus) {
        best = {std::numeric_limits<double>::infinity(), SIZE_MAX};
        visit_all(scan);
      }
      break;
    }
    const double reach = static_cast<double>(ring) * min_side;
    if (best.index != SIZE_MAX && best.sqdist < reach * reach) break;
  }
  return best.index;
}

void NeighborIndex::nearest_on_grid(std::int64_t h_ticks, std::vector<std::uint32_t>& owner,
                                    std::vector<double>& sqdist) const {
  const Configuration& c = *config_;
  if (kind_ != CarrierKind::FlatTorus) throw UsageError("grid ownership is defined on the torus");
  if (c.empty()) throw UsageError("grid ownership needs at least one point");
  if (h_ticks <= 0 || period_ % h_ticks != 0) throw UsageError("grid side must divide the torus side");
  const std::int64_t m = period_ / h_ticks;
  std::size_t cells = 1;
  for (int k = 0; k < dim_; ++k) cells *= static_cast<std::size_t>(m);
  owner.assign(cells, 0);
  sqdist.assign(cells, 0.0);

  // Per axis: cell index range whose centres fall in each bucket.
  const std::int64_t b = buckets_[0];
  std::vector<std::int64_t> first(static_cast<std::size_t>(b + 1), m);
  for (std::int64_t i = m - 1; i >= 0; --i) {
    const std::int64_t centre = i * h_ticks + h_ticks / 2;
    first[static_cast<std::size_t>(centre * b / period_)] = i;
  }
  first[static_cast<std::size_t>(b)] = m;
  for (std::int64_t k = b - 1; k >= 0; --k) first[k] = std::min(first[k], first[k + 1]);

  const auto& K = kernels::active();
  const std::int64_t ring_cover = std::min<std::int64_t>(1, (b - 1) / 2);
  const double reach = static_cast<double>(ring_cover + (2 * ring_cover + 1 >= b ? 1000000 : 0)) * side_[0];
  const double reach2 = (2 * ring_cover + 1 >= b) ? std::numeric_limits<double>::infinity() : reach * reach;

  std::array<std::vector<std::int32_t>, 3> cand;
  std::vector<std::uint32_t> cand_label;
  std::array<std::int64_t, 3> bucket{};
  std::array<std::int64_t, 3> total_buckets{1, 1, 1};
  for (int k = 0; k < dim_; ++k) total_buckets[k] = b;
  for (bucket[0] = 0; bucket[0] < total_buckets[0]; ++bucket[0]) {
    for (bucket[1] = 0; bucket[1] < total_buckets[1]; ++bucket[1]) {
      for (bucket[2] = 0; bucket[2] < total_buckets[2]; ++bucket[2]) {
        for (auto& v : cand) v.clear();
        cand_label.clear();
        auto gather = [&](const Slice& s) {
          for (std::size_t j = s.begin; j < s.end; ++j) {
            for (int k = 0; k < dim_; ++k) cand[k].push_back(ticks_[k][j]);
            cand_label.push_back(label_[j]);
          }
        };
        if (2 * ring_cover + 1 >= b) {
          visit_all(gather);
        } else {
          for (std::int64_t ring = 0; ring <= ring_cover; ++ring) visit_ring(bucket, ring, gather);
        }
        kernels::TorusView view;
        for (int k = 0; k < dim_; ++k) view.axis[k] = cand[k].data();
        view.n = cand_label.size();
        view.dim = dim_;
        view.period = period_;

        std::array<std::int64_t, 3> lo{0, 0, 0}, hi{1, 1, 1};
        for (int k = 0; k < dim_; ++k) {
          lo[k] = first[static_cast<std::size_t>(bucket[k])];
          hi[k] = first[static_cast<std::size_t>(bucket[k] + 1)];
        }
        std::array<std::int64_t, 3> cell{};
        for (cell[0] = lo[0]; cell[0] < hi[0]; ++cell[0]) {
          for (cell[1] = lo[1]; cell[1] < hi[1]; ++cell[1]) {
            for (cell[2] = lo[2]; cell[2] < hi[2]; ++cell[2]) {
              std::int32_t q[3] = {0, 0, 0};
              std::size_t lin = 0;
              for (int k = 0; k < dim_; ++k) {
                q[k] = static_cast<std::int32_t>(cell[k] * h_ticks + h_ticks / 2);
                lin = lin * static_cast<std::size_t>(m) + static_cast<std::size_t>(cell[k]);
              }
              kernels::Nearest n = view.n ? K.torus_nearest(view, cand_label.data(), q, kernels::kNoSkip)
                                          : kernels::Nearest{std::numeric_limits<double>::infinity(), SIZE_MAX};
              if (n.index == SIZE_MAX || !(n.sqdist < reach2)) {
                GroupPoint centre = c.carrier().from_ticks(Ticks{q[0], q[1], q[2]});
                n = nearest(centre);
              }
              owner[lin] = static_cast<std::uint32_t>(n.index);
              sqdist[lin] = n.sqdist;
            }
          }
        }
      }
    }
  }
}

}  // namespace palmlab
