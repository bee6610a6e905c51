#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "error.hpp"

namespace mixlen {

// splitmix64 step; used to mix seeds and derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed for an independent substream, e.g. one reverse chain of one test row.
// Two mixing rounds keep (seed, a, b) collisions out of reach.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t s = seed;
  std::uint64_t m = splitmix64(s);
  s = m ^ (a * 0x9e3779b97f4a7c15ULL + 0x7f4a7c15ULL);
  m = splitmix64(s);
  s = m ^ (b * 0xbf58476d1ce4e5b9ULL + 0x1ce4e5b9ULL);
  return splitmix64(s);
}

// Deterministic random stream.  The distribution transforms are written out
// here (not taken from <random>) so that identical seeds give identical
// streams under any standard library.
class rng {
 public:
  explicit rng(std::uint64_t seed) : gen_(seed) {}

  // uniform on [0, 1): 53-bit mantissa
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // standard Normal via Marsaglia polar (second value cached)
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  // uniform integer on [lo, hi] inclusive, rejection-free bias below 2^-64
  // is not acceptable for reproducibility, so use Lemire-style rejection.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
    if (lo > hi) throw usage_error("uniform_int: empty range");
    const std::uint64_t span = hi - lo + 1;  // wraps to 0 for full range
    if (span == 0) return gen_();
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t r;
    do {
      r = gen_();
    } while (r >= limit);
    return lo + r % span;
  }

  // Fisher-Yates permutation of {0, ..., n-1}
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(0, i - 1));
      std::swap(p[i - 1], p[j]);
    }
    return p;
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mixlen
