#pragma once

#include <cstdint>
#include <random>

namespace muxncs {

/// Named random streams derived from one master seed.
enum class Stream : std::uint32_t { Network = 1, Exploration = 2, InitialState = 3, Replay = 4, WeightInit = 5 };

/// mt19937_64 with fixed integer-to-real conversions, so draws do not depend on the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t master_seed, Stream stream, std::uint64_t index = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    engine_.seed(seq);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Unbiased integer in [0, n) by rejection.
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace muxncs
