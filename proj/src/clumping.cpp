#include "palmlab/clumping.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "palmlab/error.hpp"

namespace palmlab {

namespace {

std::uint32_t find_root(std::vector<std::uint32_t>& parent, std::uint32_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

std::size_t ClumpingSequence::class_count(std::size_t level) const {
  const auto& l = levels.at(level);
  std::size_t n = 0;
  for (std::size_t i = 0; i < l.size(); ++i) n += l[i] == i ? 1 : 0;
  return n;
}

std::vector<std::vector<std::uint32_t>> ClumpingSequence::classes(std::size_t level) const {
  const auto& l = levels.at(level);
  std::vector<std::vector<std::uint32_t>> out;
  std::vector<std::size_t> slot(l.size(), SIZE_MAX);
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (slot[l[i]] == SIZE_MAX) {
      slot[l[i]] = out.size();
      out.emplace_back();
    }
    out[slot[l[i]]].push_back(static_cast<std::uint32_t>(i));
  }
  return out;
}

ClumpingSequence build_clumping(const Configuration& c, int max_levels) {
  const CarrierGroup& G = c.carrier();
  if (G.kind() != CarrierKind::FlatTorus) throw UsageError("clumpings are built on the torus");
  if (c.empty()) throw UsageError("clumping needs at least one point");
  const std::size_t n = c.size();
  const int d = G.dim();
  const std::int32_t P = G.period();
  std::vector<Ticks> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = G.ticks(c[i]);
  auto sqdist = [&](std::size_t i, std::size_t j) {
    std::int64_t s = 0;
    for (int k = 0; k < d; ++k) {
      const std::int64_t x = wrap_delta(t[i][k], t[j][k], P);
      s += x * x;
    }
    return s;
  };

  ClumpingSequence s;
  s.base = c;
  std::vector<std::uint32_t> label(n);
  std::iota(label.begin(), label.end(), 0u);
  s.levels.push_back(label);

  std::vector<std::int64_t> best(n);
  std::vector<std::uint32_t> choice(n);
  std::vector<std::uint32_t> parent(n);
  for (int level = 0; level < max_levels; ++level) {
    std::size_t classes = 0;
    for (std::size_t i = 0; i < n; ++i) classes += label[i] == i ? 1 : 0;
    if (classes <= 1) break;

    // Nearest other cluster of every cluster, by single linkage.
    std::fill(best.begin(), best.end(), std::numeric_limits<std::int64_t>::max());
    std::fill(choice.begin(), choice.end(), std::numeric_limits<std::uint32_t>::max());
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t a = label[i];
      for (std::size_t j = i + 1; j < n; ++j) {
        const std::uint32_t b = label[j];
        if (a == b) continue;
        const std::int64_t q = sqdist(i, j);
        if (q < best[a] || (q == best[a] && b < choice[a])) {
          best[a] = q;
          choice[a] = b;
        }
        if (q < best[b] || (q == best[b] && a < choice[b])) {
          best[b] = q;
          choice[b] = a;
        }
      }
    }
    std::iota(parent.begin(), parent.end(), 0u);
    for (std::size_t a = 0; a < n; ++a) {
      if (label[a] != a) continue;
      const std::uint32_t ra = find_root(parent, static_cast<std::uint32_t>(a));
      const std::uint32_t rb = find_root(parent, choice[a]);
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
    for (std::size_t i = 0; i < n; ++i) label[i] = find_root(parent, label[i]);
    s.levels.push_back(label);
  }
  return s;
}

ClumpingVerdict verify_clumping(const ClumpingSequence& s) {
  ClumpingVerdict v;
  const std::size_t n = s.base.size();
  auto fail = [&](std::string axiom, std::size_t a, std::size_t b, std::string msg) {
    v.ok = false;
    v.axiom = std::move(axiom);
    v.witness = {a, b};
    v.message = std::move(msg);
    return v;
  };
  if (s.levels.empty()) return n <= 1 ? v : fail("partition", 0, 0, "no levels");
  for (std::size_t lv = 0; lv < s.levels.size(); ++lv) {
    const auto& l = s.levels[lv];
    if (l.size() != n) return fail("partition", 0, 0, "level " + std::to_string(lv) + " has the wrong size");
    for (std::size_t i = 0; i < n; ++i) {
      if (l[i] >= n || l[i] > i || l[l[i]] != l[i]) {
        return fail("partition", i, l[i] < n ? l[i] : i, "bad class label at level " + std::to_string(lv));
      }
      if (lv == 0 && l[i] != i) return fail("partition", i, l[i], "level 0 is not all singletons");
    }
  }
  for (std::size_t lv = 1; lv < s.levels.size(); ++lv) {
    const auto& prev = s.levels[lv - 1];
    const auto& cur = s.levels[lv];
    std::vector<std::uint32_t> image(n, std::numeric_limits<std::uint32_t>::max());
    std::vector<std::size_t> first(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& im = image[prev[i]];
      if (im == std::numeric_limits<std::uint32_t>::max()) {
        im = cur[i];
        first[prev[i]] = i;
      } else if (im != cur[i]) {
        return fail("ascending", first[prev[i]], i, "class split between levels " + std::to_string(lv - 1) + " and " +
                                                        std::to_string(lv));
      }
    }
  }
  const auto& last = s.levels.back();
  for (std::size_t i = 1; i < n; ++i) {
    if (last[i] != last[0]) return fail("one-ended", 0, i, "points never share a class");
  }
  return v;
}

FactorGraph z_line_factor(const ClumpingSequence& s) {
  const std::size_t n = s.base.size();
  if (s.levels.empty() || s.class_count(s.levels.size() - 1) != 1) {
    throw UsageError("z-line needs a clumping that ends in a single class");
  }
  std::vector<std::vector<std::uint32_t>> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = {static_cast<std::uint32_t>(i)};
  for (std::size_t lv = 1; lv < s.levels.size(); ++lv) {
    const auto& prev = s.levels[lv - 1];
    const auto& cur = s.levels[lv];
    std::vector<std::vector<std::uint32_t>> next(n);
    // Old labels ascend with i at their own index, so concatenation follows label order.
    for (std::size_t a = 0; a < n; ++a) {
      if (prev[a] != a) continue;
      auto& dst = next[cur[a]];
      dst.insert(dst.end(), order[a].begin(), order[a].end());
    }
    order.swap(next);
  }
  const auto& line = order[s.levels.back()[0]];
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::size_t k = 1; k < line.size(); ++k) edges.emplace_back(line[k - 1], line[k]);
  return FactorGraph(s.base, std::move(edges));
}

std::string clumping_json(const ClumpingSequence& s) {
  std::string out = "{\"levels\":[";
  for (std::size_t lv = 0; lv < s.levels.size(); ++lv) {
    if (lv) out += ',';
    out += '[';
    const auto cls = s.classes(lv);
    for (std::size_t k = 0; k < cls.size(); ++k) {
      if (k) out += ',';
      out += '[';
      for (std::size_t m = 0; m < cls[k].size(); ++m) {
        if (m) out += ',';
        out += std::to_string(cls[k][m]);
      }
      out += ']';
    }
    out += ']';
  }
  return out + "]}";
}

}  // namespace palmlab
