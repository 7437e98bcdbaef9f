#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gausshead {

/// Derives a child seed from a parent seed and a label, e.g.
/// `child_seed(seed, "train/shuffle")`. Stable across platforms: FNV-1a over
/// the label mixed into the parent with a splitmix64 finalizer.
[[nodiscard]] std::uint64_t child_seed(std::uint64_t parent, std::string_view label) noexcept;

/// Same as above with an integer index appended to the label.
[[nodiscard]] std::uint64_t child_seed(std::uint64_t parent, std::string_view label,
                                       std::uint64_t index) noexcept;

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) built from the top 53 bits, so results do not
/// depend on the standard library's distribution implementations.
[[nodiscard]] inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

[[nodiscard]] inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [lo, hi] (inclusive), unbiased by rejection.
[[nodiscard]] std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi);

/// Standard normal via Box-Muller on uniform01.
[[nodiscard]] double standard_normal(Rng& rng);

}  // namespace gausshead
