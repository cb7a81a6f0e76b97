#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace palmlab {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// FNV-1a, used to turn experiment names into stream ids.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// Counter-based seed derivation:
///   derive_seed(m, e, i) = mix64(mix64(m ^ mix64(e)) + golden * (i + 1))
/// with golden = 0x9E3779B97F4A7C15. Trial i of experiment e gets the same
/// stream no matter which worker runs it or in which order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) noexcept;

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

}  // namespace palmlab
