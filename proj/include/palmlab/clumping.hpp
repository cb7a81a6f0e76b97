#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "palmlab/factor.hpp"

namespace palmlab {

/// Nested partitions of the points of `base`. levels[n][i] is the class label of
/// point i at level n, and a label is the smallest canonical index (the
/// lexicographically least point) of its class. Level 0 is all singletons.
struct ClumpingSequence {
  Configuration base;
  std::vector<std::vector<std::uint32_t>> levels;

  std::size_t class_count(std::size_t level) const;
  /// Classes of a level as sorted index lists, ordered by label.
  std::vector<std::vector<std::uint32_t>> classes(std::size_t level) const;
};

/// Single-linkage nearest-cluster merging on the torus: at every level each
/// cluster selects its nearest other cluster (ties to the smaller label) and the
/// selection graph's components form the next level. Stops at one class or
/// after `max_levels` merging levels.
ClumpingSequence build_clumping(const Configuration& c, int max_levels = 64);

struct ClumpingVerdict {
  bool ok = true;
  std::string axiom;  // "partition", "ascending" or "one-ended"
  std::pair<std::size_t, std::size_t> witness{0, 0};
  std::string message;
};

ClumpingVerdict verify_clumping(const ClumpingSequence& s);

/// Successor edges of the order obtained by concatenating merged clusters'
/// orders by ascending label. Requires a single class at the last level.
FactorGraph z_line_factor(const ClumpingSequence& s);

/// {"levels": [[[i, ...], ...], ...]}
std::string clumping_json(const ClumpingSequence& s);

}  // namespace palmlab
