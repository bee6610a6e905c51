#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "dataio.hpp"
#include "diffusion.hpp"
#include "error.hpp"
#include "intervals.hpp"
#include "numeric.hpp"
#include "pretrain.hpp"
#include "rng.hpp"

namespace mixlen {

inline double pinball_loss(double u, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw usage_error("quantile level must be in (0, 1)");
  return u >= 0.0 ? tau * u : (tau - 1.0) * u;
}

// ------------------------------------------------------------------
// linear quantile regression (standardized features + intercept)

struct quantile_linear_model {
  double tau = 0.5;
  std::vector<standardizer> x_std;
  std::vector<double> w;
  double b = 0.0;

  double predict(const std::vector<double>& x) const {
    if (x.size() != w.size()) throw usage_error("linear quantile: feature size mismatch");
    double p = b;
    for (std::size_t j = 0; j < w.size(); ++j) p += w[j] * x_std[j].apply(x[j]);
    return p;
  }
};

namespace detail {

inline double mean_pinball(const std::vector<std::vector<double>>& Xs,
                           const std::vector<double>& y, const std::vector<double>& w,
                           double b, double tau) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double p = b;
    for (std::size_t j = 0; j < w.size(); ++j) p += w[j] * Xs[i][j];
    s += pinball_loss(y[i] - p, tau);
  }
  return s / static_cast<double>(y.size());
}

}  // namespace detail

// Subgradient descent on mean pinball loss with step size c/sqrt(k); keeps
// the best iterate seen.  step_size < 0 picks c from the target spread.
inline quantile_linear_model fit_linear_quantile(const std::vector<std::vector<double>>& X,
                                                 const std::vector<double>& y, double tau,
                                                 int steps = 10000, double step_size = -1.0,
                                                 std::uint64_t seed = 0) {
  if (!(tau > 0.0 && tau < 1.0)) throw usage_error("quantile level must be in (0, 1)");
  if (X.empty() || X.size() != y.size())
    throw usage_error("fit_linear_quantile: empty or misaligned data");
  if (steps < 1) throw usage_error("fit_linear_quantile: steps must be >= 1");
  const std::size_t n = X.size();
  const std::size_t d = X[0].size();

  quantile_linear_model m;
  m.tau = tau;
  m.x_std.resize(d);
  std::vector<double> col(n);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = X[i][j];
    m.x_std[j].fit(col);
  }
  std::vector<std::vector<double>> Xs(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) Xs[i][j] = m.x_std[j].apply(X[i][j]);

  const double c = step_size > 0.0 ? step_size : std::max(1.0, stddev(y));
  rng r(derive_seed(seed, 0x91a7));
  m.w.assign(d, 0.0);
  for (auto& wj : m.w) wj = r.uniform(-0.01, 0.01);
  m.b = 0.0;

  std::vector<double> gw(d);
  std::vector<double> best_w = m.w;
  double best_b = m.b;
  double best_loss = detail::mean_pinball(Xs, y, m.w, m.b, tau);
  for (int k = 1; k <= steps; ++k) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double p = m.b;
      for (std::size_t j = 0; j < d; ++j) p += m.w[j] * Xs[i][j];
      // d pinball(y - p) / dp
      const double g = y[i] - p >= 0.0 ? -tau : 1.0 - tau;
      gb += g;
      for (std::size_t j = 0; j < d; ++j) gw[j] += g * Xs[i][j];
    }
    const double step = c / std::sqrt(static_cast<double>(k)) / static_cast<double>(n);
    for (std::size_t j = 0; j < d; ++j) m.w[j] -= step * gw[j];
    m.b -= step * gb;
    const double loss = detail::mean_pinball(Xs, y, m.w, m.b, tau);
    if (!std::isfinite(loss)) throw train_error("quantile regression diverged at step " +
                                                std::to_string(k));
    if (loss < best_loss) {
      best_loss = loss;
      best_w = m.w;
      best_b = m.b;
    }
  }
  m.w = std::move(best_w);
  m.b = best_b;
  return m;
}

// ------------------------------------------------------------------
// random-forest quantile regression

struct qf_params {
  int n_trees = 100;
  int min_samples_leaf = 5;
  int max_depth = 64;  // effectively unbounded; min_samples_leaf stops growth

  void validate() const {
    if (n_trees < 1) throw usage_error("quantile forest: n_trees must be >= 1");
    if (min_samples_leaf < 1) throw usage_error("quantile forest: min_samples_leaf must be >= 1");
    if (max_depth < 1) throw usage_error("quantile forest: max_depth must be >= 1");
  }
};

struct qf_node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  // leaves store (training index, bootstrap multiplicity)
  std::vector<std::pair<std::uint32_t, std::uint32_t>> items;
};

struct qf_tree {
  std::vector<qf_node> nodes;

  const qf_node& leaf_for(const std::vector<double>& x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& nd = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(i)];
  }
};

struct quantile_forest {
  std::vector<qf_tree> trees;
  std::vector<double> targets;  // training targets, indexed by items

  // Meinshausen weights: mean over trees of leaf-multiplicity / leaf size
  std::vector<double> weights(const std::vector<double>& x) const {
    if (trees.empty()) throw usage_error("quantile forest is not fitted");
    std::vector<double> acc(targets.size(), 0.0);
    const double inv_trees = 1.0 / static_cast<double>(trees.size());
    for (const auto& t : trees) {
      const auto& leaf = t.leaf_for(x);
      double total = 0.0;
      for (const auto& it : leaf.items) total += static_cast<double>(it.second);
      for (const auto& it : leaf.items)
        acc[it.first] += static_cast<double>(it.second) / total * inv_trees;
    }
    return acc;
  }
};

namespace detail {

inline int qf_grow(qf_tree& tree, const std::vector<std::vector<double>>& X,
                   const std::vector<double>& y, std::vector<std::size_t>& idx, int depth,
                   const qf_params& p) {
  const int node_id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  bool make_leaf = depth >= p.max_depth ||
                   idx.size() < 2 * static_cast<std::size_t>(p.min_samples_leaf);
  split_choice choice;
  if (!make_leaf) {
    choice = best_split(X, y, idx, X.empty() ? 0 : X[0].size(), p.min_samples_leaf);
    make_leaf = !choice.found;
  }
  if (!make_leaf) {
    std::vector<std::size_t> left_idx, right_idx;
    left_idx.reserve(idx.size());
    right_idx.reserve(idx.size());
    for (auto i : idx)
      (X[i][static_cast<std::size_t>(choice.feature)] <= choice.threshold ? left_idx
                                                                          : right_idx)
          .push_back(i);
    if (!left_idx.empty() && !right_idx.empty()) {
      idx.clear();
      idx.shrink_to_fit();
      const int left = qf_grow(tree, X, y, left_idx, depth + 1, p);
      const int right = qf_grow(tree, X, y, right_idx, depth + 1, p);
      auto& nd = tree.nodes[static_cast<std::size_t>(node_id)];
      nd.feature = choice.feature;
      nd.threshold = choice.threshold;
      nd.left = left;
      nd.right = right;
      return node_id;
    }
  }
  // leaf: compress the (possibly repeated) bootstrap indices into counts
  std::sort(idx.begin(), idx.end());
  auto& items = tree.nodes[static_cast<std::size_t>(node_id)].items;
  for (std::size_t k = 0; k < idx.size();) {
    std::size_t j = k;
    while (j < idx.size() && idx[j] == idx[k]) ++j;
    items.emplace_back(static_cast<std::uint32_t>(idx[k]), static_cast<std::uint32_t>(j - k));
    k = j;
  }
  return node_id;
}

}  // namespace detail

inline quantile_forest fit_quantile_forest(const std::vector<std::vector<double>>& X,
                                           const std::vector<double>& y, const qf_params& p,
                                           std::uint64_t seed = 0) {
  p.validate();
  if (X.empty() || X.size() != y.size())
    throw usage_error("fit_quantile_forest: empty or misaligned data");
  const std::size_t n = X.size();
  quantile_forest f;
  f.targets = y;
  f.trees.reserve(static_cast<std::size_t>(p.n_trees));
  for (int t = 0; t < p.n_trees; ++t) {
    rng r(derive_seed(seed, 0x4f5e, static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = static_cast<std::size_t>(r.uniform_int(0, n - 1));
    qf_tree tree;
    detail::qf_grow(tree, X, y, idx, 0, p);
    f.trees.push_back(std::move(tree));
  }
  return f;
}

// Weighted generalization of the type-7 quantile: order statistics at
// plotting positions p_k = (S_k - w_k) / (1 - w_k), interpolated linearly.
// Reduces to the unweighted rule (k-1)/(n-1) for equal weights.
inline double weighted_quantile(const std::vector<double>& values,
                                const std::vector<double>& weights, double p) {
  if (values.size() != weights.size() || values.empty())
    throw usage_error("weighted_quantile: empty or misaligned input");
  if (!(p >= 0.0 && p <= 1.0)) throw usage_error("quantile level must be in [0, 1]");
  std::vector<std::pair<double, double>> vw;
  vw.reserve(values.size());
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (weights[i] < 0.0) throw usage_error("weighted_quantile: negative weight");
    if (weights[i] > 0.0) {
      vw.emplace_back(values[i], weights[i]);
      total += weights[i];
    }
  }
  if (vw.empty()) throw usage_error("weighted_quantile: all weights are zero");
  std::sort(vw.begin(), vw.end());
  if (vw.size() == 1) return vw[0].first;
  double s = 0.0;
  double prev_pos = 0.0;
  double prev_val = vw[0].first;
  for (std::size_t k = 0; k < vw.size(); ++k) {
    s += vw[k].second / total;
    const double wk = vw[k].second / total;
    const double pos = std::min(1.0, std::max(0.0, (s - wk) / (1.0 - wk)));
    if (k == 0) {
      prev_pos = pos;
      prev_val = vw[k].first;
      if (p <= pos) return vw[k].first;
      continue;
    }
    if (p <= pos) {
      const double span = pos - prev_pos;
      const double frac = span > 0.0 ? (p - prev_pos) / span : 1.0;
      return prev_val + frac * (vw[k].first - prev_val);
    }
    prev_pos = pos;
    prev_val = vw[k].first;
  }
  return vw.back().first;
}

inline double qf_predict(const quantile_forest& f, const std::vector<double>& x, double tau) {
  const auto w = f.weights(x);
  return weighted_quantile(f.targets, w, tau);
}

// ------------------------------------------------------------------
// conformalized quantile regression (split conformal, forest base)

struct cqr_model {
  quantile_forest base;
  double alpha = 0.9;
  double tau_lo = 0.05;
  double tau_hi = 0.95;
  double correction = 0.0;  // Q, the rank-based widening
};

inline cqr_model fit_cqr(const std::vector<std::vector<double>>& X_train,
                         const std::vector<double>& y_train,
                         const std::vector<std::vector<double>>& X_cal,
                         const std::vector<double>& y_cal, double alpha,
                         const qf_params& base_config, std::uint64_t seed = 0) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw usage_error("alpha must be in (0, 1)");
  if (X_cal.empty() || X_cal.size() != y_cal.size())
    throw usage_error("fit_cqr: empty or misaligned calibration data");
  const auto n_cal = X_cal.size();
  const auto k = static_cast<std::size_t>(
      std::ceil((static_cast<double>(n_cal) + 1.0) * alpha));
  if (k > n_cal)
    throw data_error("calibration set too small: need ceil((n_cal+1)*alpha) <= n_cal");
  cqr_model m;
  m.alpha = alpha;
  m.tau_lo = (1.0 - alpha) / 2.0;
  m.tau_hi = (1.0 + alpha) / 2.0;
  m.base = fit_quantile_forest(X_train, y_train, base_config, seed);
  std::vector<double> scores(n_cal);
  for (std::size_t i = 0; i < n_cal; ++i) {
    const double lo = qf_predict(m.base, X_cal[i], m.tau_lo);
    const double hi = qf_predict(m.base, X_cal[i], m.tau_hi);
    scores[i] = std::max(lo - y_cal[i], y_cal[i] - hi);
  }
  std::sort(scores.begin(), scores.end());
  m.correction = scores[k - 1];
  return m;
}

inline std::pair<double, double> cqr_interval(const cqr_model& m,
                                              const std::vector<double>& x) {
  const double lo = qf_predict(m.base, x, m.tau_lo) - m.correction;
  const double hi = qf_predict(m.base, x, m.tau_hi) + m.correction;
  return {lo, hi};
}

// ------------------------------------------------------------------
// comparison harness

struct compare_config {
  gbdt_params conditioner;
  diffusion_config diffusion;
  int n_pseudo = 200;
  int qr_steps = 10000;
  double qr_step_size = -1.0;  // auto
  qf_params forest;
  std::uint64_t seed = 0;
};

struct compare_row {
  std::string method;
  double alpha = 0.0;
  double coverage = 0.0;
  double avg_length = 0.0;
  double avg_radius = 0.0;
  double underestimation_prob_upper = 0.0;
  int n_crossings_repaired = 0;
  bool failed = false;
  std::string error;
};

namespace detail {

// swap any crossing endpoints; returns how many intervals needed repair
inline int repair_crossings(std::vector<interval_estimate>& iv, const std::string& method,
                            std::ostream* log) {
  int n = 0;
  for (auto& e : iv)
    if (e.lower > e.upper) {
      std::swap(e.lower, e.upper);
      ++n;
    }
  if (n > 0 && log)
    *log << "warning: " << method << ": repaired " << n << " crossing interval(s)\n";
  return n;
}

inline compare_row summarize(const std::string& method, double alpha,
                             std::vector<interval_estimate>& iv,
                             const std::vector<double>& truths, std::ostream* log) {
  compare_row row;
  row.method = method;
  row.alpha = alpha;
  row.n_crossings_repaired = repair_crossings(iv, method, log);
  const auto rep = build_report(iv, truths);
  row.coverage = rep.coverage;
  row.avg_length = rep.average_length;
  row.avg_radius = rep.average_radius;
  row.underestimation_prob_upper = rep.underestimation_prob_upper;
  return row;
}

}  // namespace detail

// Fits all four methods on the same splits at one level and reports the
// comparison table.  Baselines regress the raw target on the features;
// the diffusion rows learn the mechanistic residual and add the formula
// value back.  A method that throws is reported as failed, not dropped.
inline std::vector<compare_row> compare_methods(
    const dataset& train, const dataset& calib, const dataset& test, double alpha,
    const compare_config& cfg,
    std::map<std::string, std::vector<interval_estimate>>* intervals_out = nullptr,
    std::ostream* log = nullptr) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw usage_error("alpha must be in (0, 1)");
  if (train.size() == 0 || calib.size() == 0 || test.size() == 0)
    throw usage_error("compare_methods: all three splits must be non-empty");
  const double tau_lo = (1.0 - alpha) / 2.0;
  const double tau_hi = (1.0 + alpha) / 2.0;

  const auto X_train = train.feature_matrix();
  const auto X_cal = calib.feature_matrix();
  const auto X_test = test.feature_matrix();
  std::vector<double> y_train(train.size()), y_cal(calib.size()), y_test(test.size());
  for (std::size_t i = 0; i < train.size(); ++i) y_train[i] = train.records[i].c_ac;
  for (std::size_t i = 0; i < calib.size(); ++i) y_cal[i] = calib.records[i].c_ac;
  for (std::size_t i = 0; i < test.size(); ++i) y_test[i] = test.records[i].c_ac;

  std::vector<compare_row> rows;
  auto run = [&](const std::string& method, auto&& body) {
    try {
      std::vector<interval_estimate> iv = body();
      rows.push_back(detail::summarize(method, alpha, iv, y_test, log));
      if (intervals_out) (*intervals_out)[method] = std::move(iv);
    } catch (const error& e) {
      compare_row row;
      row.method = method;
      row.alpha = alpha;
      row.failed = true;
      row.error = e.what();
      const double nan = std::nan("");
      row.coverage = row.avg_length = row.avg_radius = row.underestimation_prob_upper = nan;
      rows.push_back(row);
      if (log) *log << "warning: " << method << " failed: " << e.what() << '\n';
    }
  };

  run("diffusion", [&]() {
    auto cond = fit_gbdt(X_train, train.targets, cfg.conditioner, 5,
                         derive_seed(cfg.seed, 0xc0));
    auto model = train_diffusion(X_train, train.targets, std::move(cond), cfg.diffusion,
                                 derive_seed(cfg.seed, 0xd0));
    const auto samples = generate_many(X_test, model, cfg.n_pseudo,
                                       derive_seed(cfg.seed, 0xe0));
    std::vector<interval_estimate> iv;
    iv.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
      auto s = samples[i];
      for (auto& v : s) v += test.features[i].c_ap;
      iv.push_back(make_interval(s, alpha));
    }
    return iv;
  });

  run("linear_qr", [&]() {
    const auto lo = fit_linear_quantile(X_train, y_train, tau_lo, cfg.qr_steps,
                                        cfg.qr_step_size, derive_seed(cfg.seed, 0x10));
    const auto hi = fit_linear_quantile(X_train, y_train, tau_hi, cfg.qr_steps,
                                        cfg.qr_step_size, derive_seed(cfg.seed, 0x11));
    const auto med = fit_linear_quantile(X_train, y_train, 0.5, cfg.qr_steps,
                                         cfg.qr_step_size, derive_seed(cfg.seed, 0x12));
    std::vector<interval_estimate> iv;
    iv.reserve(test.size());
    for (const auto& x : X_test) {
      interval_estimate e;
      e.point = med.predict(x);
      e.lower = lo.predict(x);
      e.upper = hi.predict(x);
      e.level = alpha;
      e.n_samples = 0;
      iv.push_back(e);
    }
    return iv;
  });

  run("quantile_forest", [&]() {
    const auto f = fit_quantile_forest(X_train, y_train, cfg.forest,
                                       derive_seed(cfg.seed, 0x20));
    std::vector<interval_estimate> iv;
    iv.reserve(test.size());
    for (const auto& x : X_test) {
      interval_estimate e;
      const auto w = f.weights(x);
      e.point = weighted_quantile(f.targets, w, 0.5);
      e.lower = weighted_quantile(f.targets, w, tau_lo);
      e.upper = weighted_quantile(f.targets, w, tau_hi);
      e.level = alpha;
      e.n_samples = 0;
      iv.push_back(e);
    }
    return iv;
  });

  run("cqr", [&]() {
    const auto m = fit_cqr(X_train, y_train, X_cal, y_cal, alpha, cfg.forest,
                           derive_seed(cfg.seed, 0x30));
    std::vector<interval_estimate> iv;
    iv.reserve(test.size());
    for (const auto& x : X_test) {
      interval_estimate e;
      const auto [lo, hi] = cqr_interval(m, x);
      e.point = qf_predict(m.base, x, 0.5);
      e.lower = lo;
      e.upper = hi;
      e.level = alpha;
      e.n_samples = 0;
      iv.push_back(e);
    }
    return iv;
  });

  return rows;
}

inline void write_compare_csv(std::ostream& out, const std::vector<compare_row>& rows) {
  out << "method,alpha,coverage,avg_length,avg_radius,underestimation_prob_upper\n";
  for (const auto& r : rows)
    out << r.method << ',' << format_double(r.alpha) << ',' << format_double(r.coverage)
        << ',' << format_double(r.avg_length) << ',' << format_double(r.avg_radius) << ','
        << format_double(r.underestimation_prob_upper) << '\n';
}

}  // namespace mixlen
