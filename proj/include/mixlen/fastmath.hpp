#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>

namespace mixlen {

// exp/softplus/sigmoid evaluated by short polynomials instead of libm.
// Generation pushes ~1e10 activations through these, where libm's scalar
// routines dominate the wall clock; these stay branch-light so the compiler
// can keep the surrounding loops vectorized.  Relative error is ~1e-13,
// far inside every tolerance used by the models and tests, and the results
// are bit-deterministic across runs.

// 2^k for integer k via exponent bits; |k| must stay in the normal range.
inline double pow2i(int k) {
  const std::uint64_t bits = static_cast<std::uint64_t>(k + 1023) << 52;
  double out;
  std::memcpy(&out, &bits, sizeof(out));
  return out;
}

inline double fast_exp(double x) {
  // Cody-Waite reduction: x = k*ln2 + r, |r| <= ln2/2
  constexpr double kInvLn2 = 1.4426950408889634074;
  constexpr double kLn2Hi = 6.93147180369123816490e-01;
  constexpr double kLn2Lo = 1.90821492927058770002e-10;
  if (x > 708.0) x = 708.0;
  if (x < -708.0) x = -708.0;
  const double kd = std::nearbyint(x * kInvLn2);
  const int k = static_cast<int>(kd);
  const double r = (x - kd * kLn2Hi) - kd * kLn2Lo;
  // degree-11 Taylor of e^r on |r| <= 0.3466
  double p = 1.0 / 39916800.0;
  p = p * r + 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;
  return p * pow2i(k);
}

// log(1+u) for u in [0, 1]: atanh series at s = u/(2+u), s <= 1/3.
inline double log1p_unit(double u) {
  const double s = u / (2.0 + u);
  const double w = s * s;
  double p = 2.0 / 25.0;
  p = p * w + 2.0 / 23.0;
  p = p * w + 2.0 / 21.0;
  p = p * w + 2.0 / 19.0;
  p = p * w + 2.0 / 17.0;
  p = p * w + 2.0 / 15.0;
  p = p * w + 2.0 / 13.0;
  p = p * w + 2.0 / 11.0;
  p = p * w + 2.0 / 9.0;
  p = p * w + 2.0 / 7.0;
  p = p * w + 2.0 / 5.0;
  p = p * w + 2.0 / 3.0;
  p = p * w + 2.0;
  return s * p;
}

// softplus(z) = log(1 + e^z) = max(z, 0) + log(1 + e^-|z|)
inline double softplus(double z) {
  const double e = fast_exp(-std::fabs(z));
  const double base = z > 0.0 ? z : 0.0;
  return base + log1p_unit(e);
}

// d/dz softplus(z)
inline double sigmoid(double z) {
  const double e = fast_exp(-std::fabs(z));
  const double p = 1.0 / (1.0 + e);
  return z >= 0.0 ? p : 1.0 - p;
}

}  // namespace mixlen
