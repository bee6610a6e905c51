#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <string>
#include <system_error>
#include <vector>

#include "error.hpp"

namespace mixlen {

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw usage_error("mean: empty input");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// population standard deviation (divisor n)
inline double stddev(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

// Affine standardization y -> (y - mu) / sd.  A zero sd degenerates to a
// pass-through shift so constant columns cannot poison downstream math.
struct standardizer {
  double mu = 0.0;
  double sd = 1.0;

  static standardizer fit(const std::vector<double>& v) {
    standardizer s;
    s.mu = mean(v);
    s.sd = stddev(v);
    if (s.sd == 0.0 || !std::isfinite(s.sd)) s.sd = 1.0;
    return s;
  }

  double apply(double x) const { return (x - mu) / sd; }
  double invert(double z) const { return z * sd + mu; }
};

// Shortest decimal representation that round-trips the exact double.
inline std::string format_double(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, const std::string& what) {
  double out = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  // tolerate leading whitespace but nothing else beyond the number
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  const auto res = std::from_chars(first, last, out);
  if (res.ec != std::errc() || res.ptr != last)
    throw data_error("cannot parse number for " + what + ": '" + std::string(text) + "'");
  return out;
}

inline long long parse_int(std::string_view text, const std::string& what) {
  long long out = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  const auto res = std::from_chars(first, last, out);
  if (res.ec != std::errc() || res.ptr != last)
    throw data_error("cannot parse integer for " + what + ": '" + std::string(text) + "'");
  return out;
}

}  // namespace mixlen
