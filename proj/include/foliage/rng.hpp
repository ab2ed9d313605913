#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace foliage {

/// SplitMix64 finalizer. Stable across platforms; used for seed derivation.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for one item (image, tree, sampler) under a master seed:
/// mix64(mix64(master) ^ uint64(item_id)).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::int64_t item_id) {
  return mix64(mix64(master) ^ static_cast<std::uint64_t>(item_id));
}

/// SplitMix64 stream generator. Every draw helper consumes a fixed, documented
/// number of 64-bit outputs so that sequences can be replayed elsewhere:
///
///   uniform01()          one output: (u >> 11) * 2^-53, in [0, 1)
///   uniform(lo, hi)      one output: lo + (hi - lo) * uniform01()
///   uniform_int(lo, hi)  inclusive; rejection sampling on u % span with
///                        limit = 2^64 - (2^64 mod span), usually one output
///   poisson(mean)        Knuth's product-of-uniforms method
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  double uniform01() { return double(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = std::uint64_t(hi - lo) + 1;
    if (span == 0) return std::int64_t(next());  // full 64-bit range
    const std::uint64_t rem = (std::numeric_limits<std::uint64_t>::max() % span + 1) % span;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - rem;
    std::uint64_t u = next();
    while (u > limit) u = next();
    return lo + std::int64_t(u % span);
  }

  std::int64_t poisson(double mean) {
    const double floor_p = std::exp(-mean);
    std::int64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform01();
    } while (p > floor_p);
    return k - 1;
  }

 private:
  std::uint64_t state_;
};

/// Closed interval [lo, hi] for real-valued draws.
struct UniformRange {
  double lo = 0.0;
  double hi = 0.0;

  bool valid() const { return lo <= hi; }
  double sample(Rng& rng) const { return rng.uniform(lo, hi); }

  friend bool operator==(const UniformRange&, const UniformRange&) = default;
};

/// Closed integer interval [lo, hi].
struct IntRange {
  int lo = 0;
  int hi = 0;

  bool valid() const { return lo <= hi; }
  int sample(Rng& rng) const { return int(rng.uniform_int(lo, hi)); }

  friend bool operator==(const IntRange&, const IntRange&) = default;
};

}  // namespace foliage
