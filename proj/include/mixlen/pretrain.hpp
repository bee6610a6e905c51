#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "numeric.hpp"
#include "rng.hpp"

namespace mixlen {

struct gbdt_params {
  int n_trees = 200;
  int max_depth = 3;
  double learning_rate = 0.1;
  int min_samples_leaf = 5;
  double subsample = 0.9;

  void validate() const {
    if (n_trees < 1) throw usage_error("gbdt: n_trees must be >= 1");
    if (max_depth < 1) throw usage_error("gbdt: max_depth must be >= 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0))
      throw usage_error("gbdt: learning_rate must be in (0, 1]");
    if (min_samples_leaf < 1) throw usage_error("gbdt: min_samples_leaf must be >= 1");
    if (!(subsample > 0.0 && subsample <= 1.0))
      throw usage_error("gbdt: subsample must be in (0, 1]");
  }
};

struct tree_node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct regression_tree {
  std::vector<tree_node> nodes;

  double predict(const std::vector<double>& x) const {
    int i = 0;
    while (nodes[i].feature >= 0)
      i = x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold ? nodes[i].left
                                                                              : nodes[i].right;
    return nodes[i].value;
  }
};

namespace detail {

struct split_choice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;  // sum_L^2/n_L + sum_R^2/n_R, larger is better
};

// Exact greedy split search over all feature/threshold midpoints.  Ties are
// broken toward the lowest feature index, then the lowest threshold, by
// visiting candidates in that order and accepting only strict improvements.
inline split_choice best_split(const std::vector<std::vector<double>>& X,
                               const std::vector<double>& y,
                               const std::vector<std::size_t>& idx, std::size_t n_features,
                               int min_leaf) {
  split_choice best;
  const std::size_t n = idx.size();
  std::vector<std::pair<double, double>> vals(n);  // (feature value, target)
  for (std::size_t f = 0; f < n_features; ++f) {
    for (std::size_t i = 0; i < n; ++i) vals[i] = {X[idx[i]][f], y[idx[i]]};
    std::sort(vals.begin(), vals.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double sum_left = 0.0;
    double sum_total = 0.0;
    for (const auto& v : vals) sum_total += v.second;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      sum_left += vals[i].second;
      if (vals[i].first == vals[i + 1].first) continue;  // no boundary here
      const auto n_left = i + 1;
      const auto n_right = n - n_left;
      if (n_left < static_cast<std::size_t>(min_leaf) ||
          n_right < static_cast<std::size_t>(min_leaf))
        continue;
      const double sum_right = sum_total - sum_left;
      const double score = sum_left * sum_left / static_cast<double>(n_left) +
                           sum_right * sum_right / static_cast<double>(n_right);
      if (!best.found || score > best.score) {
        double thr = (vals[i].first + vals[i + 1].first) / 2.0;
        if (!(thr < vals[i + 1].first)) thr = vals[i].first;  // degenerate midpoint rounding
        best = {true, static_cast<int>(f), thr, score};
      }
    }
  }
  return best;
}

inline int grow_node(regression_tree& tree, const std::vector<std::vector<double>>& X,
                     const std::vector<double>& y, std::vector<std::size_t>& idx, int depth,
                     const gbdt_params& p) {
  const int node_id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  double sum = 0.0;
  for (auto i : idx) sum += y[i];
  const double node_mean = idx.empty() ? 0.0 : sum / static_cast<double>(idx.size());
  tree.nodes[node_id].value = node_mean;
  if (depth >= p.max_depth || idx.size() < 2 * static_cast<std::size_t>(p.min_samples_leaf))
    return node_id;
  const auto choice =
      best_split(X, y, idx, X.empty() ? 0 : X[0].size(), p.min_samples_leaf);
  if (!choice.found) return node_id;

  std::vector<std::size_t> left_idx, right_idx;
  left_idx.reserve(idx.size());
  right_idx.reserve(idx.size());
  for (auto i : idx)
    (X[i][static_cast<std::size_t>(choice.feature)] <= choice.threshold ? left_idx : right_idx)
        .push_back(i);
  if (left_idx.empty() || right_idx.empty()) return node_id;  // FP-degenerate split

  idx.clear();
  idx.shrink_to_fit();
  const int left = grow_node(tree, X, y, left_idx, depth + 1, p);
  const int right = grow_node(tree, X, y, right_idx, depth + 1, p);
  tree.nodes[node_id].feature = choice.feature;
  tree.nodes[node_id].threshold = choice.threshold;
  tree.nodes[node_id].left = left;
  tree.nodes[node_id].right = right;
  return node_id;
}

}  // namespace detail

inline regression_tree fit_tree(const std::vector<std::vector<double>>& X,
                                const std::vector<double>& residuals, const gbdt_params& p,
                                std::vector<std::size_t> idx = {}) {
  p.validate();
  if (X.size() != residuals.size() || X.empty())
    throw usage_error("fit_tree: X and residuals must be aligned and non-empty");
  if (idx.empty()) {
    idx.resize(X.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
  }
  regression_tree tree;
  detail::grow_node(tree, X, residuals, idx, 0, p);
  return tree;
}

struct gbdt_member {
  double base = 0.0;
  double learning_rate = 0.1;
  std::vector<regression_tree> trees;

  double predict(const std::vector<double>& x) const {
    double out = base;
    for (const auto& t : trees) out += learning_rate * t.predict(x);
    return out;
  }
};

// The paper averages five separately trained boosted models; here the five
// members are seed-varied runs of the same in-repo GBDT, differing through
// per-stage row subsampling.  With subsample = 1 the members coincide.
struct gbdt_ensemble {
  std::vector<gbdt_member> members;

  double predict(const std::vector<double>& x) const {
    if (members.empty()) throw usage_error("gbdt predict: ensemble is not fitted");
    double s = 0.0;
    for (const auto& m : members) s += m.predict(x);
    return s / static_cast<double>(members.size());
  }

  std::vector<double> predict_many(const std::vector<std::vector<double>>& X) const {
    std::vector<double> out;
    out.reserve(X.size());
    for (const auto& row : X) out.push_back(predict(row));
    return out;
  }
};

inline gbdt_ensemble fit_gbdt(const std::vector<std::vector<double>>& X,
                              const std::vector<double>& y, const gbdt_params& p,
                              std::size_t n_members = 5, std::uint64_t seed = 0) {
  p.validate();
  if (X.size() != y.size() || X.empty()) throw usage_error("fit_gbdt: empty or misaligned data");
  if (n_members == 0) throw usage_error("fit_gbdt: need at least one member");
  const std::size_t n = X.size();
  gbdt_ensemble ens;
  for (std::size_t m = 0; m < n_members; ++m) {
    rng member_rng(derive_seed(seed, 0x6bd7, m));
    gbdt_member member;
    member.learning_rate = p.learning_rate;
    member.base = mean(y);
    std::vector<double> pred(n, member.base);
    std::vector<double> resid(n);
    const auto k = static_cast<std::size_t>(
        std::floor(p.subsample * static_cast<double>(n) + 0.5));
    for (int t = 0; t < p.n_trees; ++t) {
      for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - pred[i];
      std::vector<std::size_t> idx;
      if (k >= n) {
        idx.resize(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
      } else {
        idx = member_rng.permutation(n);
        idx.resize(k);
        std::sort(idx.begin(), idx.end());
      }
      auto tree = fit_tree(X, resid, p, std::move(idx));
      for (std::size_t i = 0; i < n; ++i) pred[i] += p.learning_rate * tree.predict(X[i]);
      member.trees.push_back(std::move(tree));
    }
    ens.members.push_back(std::move(member));
  }
  return ens;
}

// ------------------------------------------------------------------
// persistence: versioned text, bit-exact round trip via shortest decimals

inline void write_gbdt(std::ostream& out, const gbdt_ensemble& ens) {
  out << "mixlen-gbdt v1\n";
  out << "members " << ens.members.size() << '\n';
  for (const auto& m : ens.members) {
    out << "base " << format_double(m.base) << '\n';
    out << "learning_rate " << format_double(m.learning_rate) << '\n';
    out << "trees " << m.trees.size() << '\n';
    for (const auto& t : m.trees) {
      out << "nodes " << t.nodes.size() << '\n';
      for (const auto& nd : t.nodes)
        out << nd.feature << ' ' << format_double(nd.threshold) << ' ' << nd.left << ' '
            << nd.right << ' ' << format_double(nd.value) << '\n';
    }
  }
}

inline void save_gbdt(const std::string& path, const gbdt_ensemble& ens) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  write_gbdt(out, ens);
  if (!out) throw io_error("write failed for " + path);
}

namespace detail {

inline std::string expect_token(std::istream& in, const std::string& what) {
  std::string tok;
  if (!(in >> tok)) throw data_error("gbdt model file: truncated, expected " + what);
  return tok;
}

inline void expect_literal(std::istream& in, const std::string& lit) {
  const auto tok = expect_token(in, "'" + lit + "'");
  if (tok != lit) throw data_error("gbdt model file: expected '" + lit + "', got '" + tok + "'");
}

}  // namespace detail

inline gbdt_ensemble read_gbdt(std::istream& in) {
  detail::expect_literal(in, "mixlen-gbdt");
  detail::expect_literal(in, "v1");
  detail::expect_literal(in, "members");
  const auto n_members = parse_int(detail::expect_token(in, "member count"), "members");
  if (n_members < 1) throw data_error("gbdt model file: bad member count");
  gbdt_ensemble ens;
  for (long long m = 0; m < n_members; ++m) {
    gbdt_member member;
    detail::expect_literal(in, "base");
    member.base = parse_double(detail::expect_token(in, "base"), "base");
    detail::expect_literal(in, "learning_rate");
    member.learning_rate = parse_double(detail::expect_token(in, "learning_rate"), "learning_rate");
    detail::expect_literal(in, "trees");
    const auto n_trees = parse_int(detail::expect_token(in, "tree count"), "trees");
    for (long long t = 0; t < n_trees; ++t) {
      detail::expect_literal(in, "nodes");
      const auto n_nodes = parse_int(detail::expect_token(in, "node count"), "nodes");
      regression_tree tree;
      for (long long k = 0; k < n_nodes; ++k) {
        tree_node nd;
        nd.feature = static_cast<int>(parse_int(detail::expect_token(in, "feature"), "feature"));
        nd.threshold = parse_double(detail::expect_token(in, "threshold"), "threshold");
        nd.left = static_cast<int>(parse_int(detail::expect_token(in, "left"), "left"));
        nd.right = static_cast<int>(parse_int(detail::expect_token(in, "right"), "right"));
        nd.value = parse_double(detail::expect_token(in, "value"), "value");
        tree.nodes.push_back(nd);
      }
      member.trees.push_back(std::move(tree));
    }
    ens.members.push_back(std::move(member));
  }
  return ens;
}

inline gbdt_ensemble load_gbdt(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);
  return read_gbdt(in);
}

}  // namespace mixlen
