#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace finegrid {

// Seeded RNG for the tick loop. mt19937_64 has a fully specified output
// sequence; the draw helpers below avoid std::*_distribution, whose results
// are implementation-defined, so identical seeds give identical runs on any
// standard library.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return (gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Rejection sampling, unbiased.
  uint64_t below(uint64_t n) {
    if (n <= 1) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  // Poisson draw by inversion (sequential search). Intended for small means;
  // the transition-rank lambda is < 0.1 and spawn means are < 1.
  int poisson(double lambda) {
    const double u = uniform();
    double p = std::exp(-lambda);
    double cum = p;
    int k = 0;
    while (u >= cum && k < 1024) {
      ++k;
      p *= lambda / k;
      cum += p;
    }
    return k;
  }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (size_t i = items.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace finegrid
