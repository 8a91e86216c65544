#pragma once

// Seeded random streams. Every random quantity is drawn from its own
// std::mt19937_64 stream whose seed is derived from (run seed, stream tag,
// index) with splitmix64, so results do not depend on evaluation order or on
// how scenarios are scheduled across threads. Uniform doubles use the top 53
// bits of each 64-bit output, which makes the sequence identical on every
// platform (std::uniform_real_distribution is implementation-defined).

#include <cstdint>
#include <random>

namespace reinsurance {

enum class Stream : std::uint64_t {
  outside_premiums = 1,
  equities = 2,
  shock_1_in_100 = 3,
  shock_1_in_250 = 4,
  perturbation = 5,
  synthetic_network = 6,
  fixed_shock = 7,
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed, Stream tag, std::uint64_t index) {
  std::uint64_t state = seed;
  std::uint64_t out = splitmix64(state);
  state ^= static_cast<std::uint64_t>(tag) * 0xD1B54A32D192ED03ULL;
  out ^= splitmix64(state);
  state ^= index * 0x8CB92BA72F3D8DD7ULL;
  out ^= splitmix64(state);
  return out;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::uint64_t seed, Stream tag, std::uint64_t index = 0) {
    return Rng(stream_seed(seed, tag, index));
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi]; returns lo exactly when lo == hi.
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), n > 0, by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do x = engine_();
    while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace reinsurance
