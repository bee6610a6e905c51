#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "numeric.hpp"

namespace mixlen {

// Type-7 sample quantile: linear interpolation of order statistics at rank
// h = (n-1)p + 1.  Continuous in the data and hand-checkable.
inline double empirical_quantile(std::vector<double> samples, double p) {
  if (samples.empty()) throw usage_error("empirical_quantile: empty sample set");
  if (!(p >= 0.0 && p <= 1.0)) throw usage_error("empirical_quantile: p must be in [0, 1]");
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  if (n == 1) return samples[0];
  const double h = (static_cast<double>(n) - 1.0) * p;  // 0-based rank
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return samples[n - 1];
  const double frac = h - std::floor(h);
  return samples[lo] + frac * (samples[lo + 1] - samples[lo]);
}

struct interval_estimate {
  double point = 0.0;   // mean of the pseudo-samples
  double lower = 0.0;   // (1-alpha)/2 quantile
  double upper = 0.0;   // (1+alpha)/2 quantile
  double level = 0.0;   // alpha
  std::size_t n_samples = 0;
};

inline interval_estimate make_interval(const std::vector<double>& samples, double alpha) {
  if (samples.size() < 20)
    throw usage_error("make_interval: need N >= 20 pseudo-samples, got " +
                      std::to_string(samples.size()));
  if (!(alpha > 0.0 && alpha < 1.0))
    throw usage_error("make_interval: alpha must be in (0, 1)");
  interval_estimate est;
  est.level = alpha;
  est.n_samples = samples.size();
  est.lower = empirical_quantile(samples, (1.0 - alpha) / 2.0);
  est.upper = empirical_quantile(samples, (1.0 + alpha) / 2.0);
  double s = 0.0;
  for (double v : samples) s += v;
  est.point = s / static_cast<double>(samples.size());
  return est;
}

inline double coverage_rate(const std::vector<interval_estimate>& intervals,
                            const std::vector<double>& truths) {
  if (intervals.empty() || intervals.size() != truths.size())
    throw usage_error("coverage_rate: intervals and truths must be aligned and non-empty");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truths.size(); ++i)
    if (intervals[i].lower <= truths[i] && truths[i] <= intervals[i].upper) ++hit;
  return static_cast<double>(hit) / static_cast<double>(truths.size());
}

inline double average_radius(const std::vector<interval_estimate>& intervals) {
  if (intervals.empty()) throw usage_error("average_radius: empty input");
  double s = 0.0;
  for (const auto& iv : intervals) s += (iv.upper - iv.lower) / 2.0;
  return s / static_cast<double>(intervals.size());
}

// Fraction of cases where the estimate falls strictly below the truth.
inline double underestimation_prob(const std::vector<double>& estimates,
                                   const std::vector<double>& truths) {
  if (estimates.empty() || estimates.size() != truths.size())
    throw usage_error("underestimation_prob: estimates and truths must be aligned and non-empty");
  std::size_t under = 0;
  for (std::size_t i = 0; i < truths.size(); ++i)
    if (estimates[i] < truths[i]) ++under;
  return static_cast<double>(under) / static_cast<double>(truths.size());
}

inline double rmse(const std::vector<double>& predictions, const std::vector<double>& truths) {
  if (predictions.empty() || predictions.size() != truths.size())
    throw usage_error("rmse: predictions and truths must be aligned and non-empty");
  double s = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const double d = predictions[i] - truths[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(truths.size()));
}

inline double mae(const std::vector<double>& predictions, const std::vector<double>& truths) {
  if (predictions.empty() || predictions.size() != truths.size())
    throw usage_error("mae: predictions and truths must be aligned and non-empty");
  double s = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) s += std::fabs(predictions[i] - truths[i]);
  return s / static_cast<double>(truths.size());
}

inline double r2(const std::vector<double>& predictions, const std::vector<double>& truths) {
  if (predictions.size() != truths.size() || truths.size() < 2)
    throw usage_error("r2: need aligned inputs with n >= 2");
  const double m = mean(truths);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    ss_res += (predictions[i] - truths[i]) * (predictions[i] - truths[i]);
    ss_tot += (truths[i] - m) * (truths[i] - m);
  }
  if (ss_tot == 0.0) throw usage_error("r2 undefined: truths have zero variance");
  return 1.0 - ss_res / ss_tot;
}

struct evaluation_report {
  double coverage = 0.0;
  double average_radius = 0.0;
  double average_length = 0.0;
  double underestimation_prob_point = 0.0;  // point estimate below truth
  double underestimation_prob_upper = 0.0;  // interval upper bound below truth
  double rmse = 0.0;
  double r2 = 0.0;
  double mae = 0.0;
  std::size_t n = 0;
};

inline evaluation_report build_report(const std::vector<interval_estimate>& intervals,
                                      const std::vector<double>& truths) {
  evaluation_report rep;
  rep.n = truths.size();
  rep.coverage = coverage_rate(intervals, truths);
  rep.average_radius = average_radius(intervals);
  rep.average_length = 2.0 * rep.average_radius;
  std::vector<double> points, uppers;
  points.reserve(intervals.size());
  uppers.reserve(intervals.size());
  for (const auto& iv : intervals) {
    points.push_back(iv.point);
    uppers.push_back(iv.upper);
  }
  rep.underestimation_prob_point = underestimation_prob(points, truths);
  rep.underestimation_prob_upper = underestimation_prob(uppers, truths);
  rep.rmse = rmse(points, truths);
  rep.r2 = r2(points, truths);
  rep.mae = mae(points, truths);
  return rep;
}

// Per-sample plot-data file: `index,point,lower,upper,truth,covered`.
inline void write_intervals_csv(const std::string& path,
                                const std::vector<interval_estimate>& intervals,
                                const std::vector<double>& truths) {
  if (intervals.size() != truths.size())
    throw usage_error("write_intervals_csv: intervals and truths must be aligned");
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  out << "index,point,lower,upper,truth,covered\n";
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const auto& iv = intervals[i];
    const bool cov = iv.lower <= truths[i] && truths[i] <= iv.upper;
    out << i << ',' << format_double(iv.point) << ',' << format_double(iv.lower) << ','
        << format_double(iv.upper) << ',' << format_double(truths[i]) << ',' << (cov ? 1 : 0)
        << '\n';
  }
  if (!out) throw io_error("write failed for " + path);
}

}  // namespace mixlen
