#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "warprnn/common.hpp"

namespace warprnn {

namespace detail {
// splitmix64 finalizer; used to turn (seed, stream id) pairs into
// well-separated engine seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}
}  // namespace detail

// Deterministic random source: a documented, fixed 64-bit generator
// (std::mt19937_64) seeded through splitmix64. Identical seeds yield
// bit-identical streams within one build of this library. Sub-streams for
// independent purposes (weights, data, eval data, per-sample draws) come from
// derive(), which depends only on the construction seed, never on how many
// samples were already drawn.
class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : seed_(seed), gen_(detail::splitmix64(seed)) {}

  // Independent child stream; deterministic function of (seed, stream).
  Rng derive(std::uint64_t stream) const {
    return Rng(detail::splitmix64(detail::splitmix64(seed_) ^
                                  (0x9E3779B97F4A7C15ull * (stream + 1))));
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform real in [lo, hi); returns lo when lo == hi. Uses the top 53 bits
  // of the engine output so every value is an exact multiple of 2^-53.
  double uniform(double lo, double hi) {
    check_config(lo <= hi, "rng_uniform: lo > hi");
    if (lo == hi) return lo;
    const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    double r = lo + u * (hi - lo);
    if (r >= hi) r = std::nextafter(hi, lo);  // guard against rounding up
    return r;
  }

  // Uniform integer in [lo, hi] inclusive, by rejection sampling (unbiased).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    check_config(lo <= hi, "uniform_int: lo > hi");
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return lo + static_cast<std::int64_t>(gen_());  // full span
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % range);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

// Free-function forms used by module-level call sites.
inline double rng_uniform(Rng& rng, double lo, double hi) {
  return rng.uniform(lo, hi);
}

inline std::int64_t rng_uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return rng.uniform_int(lo, hi);
}

}  // namespace warprnn
