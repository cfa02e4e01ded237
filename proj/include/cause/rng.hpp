#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace cause {

// Deterministic random stream. All sampling goes through the helpers below so
// that output depends only on the seed and the call sequence, never on the
// standard library's distribution internals (which differ between platforms).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t index(std::uint64_t n) {
    // discard the biased low range so that the remaining values split evenly
    const std::uint64_t min = (0 - n) % n;
    std::uint64_t r = engine_();
    while (r < min) r = engine_();
    return r % n;
  }

  // Uniform double in [0, 1), 53 random bits.
  double real() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * real(); }

  bool coin() { return (engine_() & 1u) != 0; }

  // Fisher-Yates; the element order after shuffling depends only on the seed.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(index(i))]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cause
