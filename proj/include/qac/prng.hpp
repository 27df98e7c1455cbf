#pragma once

#include <cstdint>
#include <stdexcept>

namespace qac {

// splitmix64 stream. Fixed algorithm so that seeded graphs, initial-state
// draws, and every CSV produced from them are reproducible bit-for-bit
// across platforms and runs.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) using the top 53 bits of the stream.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [0, bound). Rejection keeps the draw unbiased.
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("next_below: bound must be positive");
    const std::uint64_t reject = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= reject) return r % bound;
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace qac
