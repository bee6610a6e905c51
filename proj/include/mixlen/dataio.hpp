#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "error.hpp"
#include "mechanistic.hpp"
#include "numeric.hpp"
#include "rng.hpp"

namespace mixlen {

struct pipeline_record {
  pipeline_geometry geometry;
  double c_ac = 0.0;  // actual mixed-oil length, m
  int pipeline_id = 0;
};

// Model inputs per §-selected feature set: {C0, C_AP, d^0.5, Re^-0.1}.
struct feature_vector {
  double c0 = 0.0;
  double c_ap = 0.0;
  double d_prime = 0.0;
  double re_prime = 0.0;

  static constexpr std::size_t size() { return 4; }
  double operator[](std::size_t i) const {
    const std::array<double, 4> v{c0, c_ap, d_prime, re_prime};
    return v[i];
  }
};

inline feature_vector featurize(const pipeline_geometry& g) {
  feature_vector f;
  f.c_ap = austin_palfrey(g).c_ap;
  f.c0 = g.C0;
  f.d_prime = std::sqrt(g.d);
  f.re_prime = std::pow(g.Re, -0.1);
  return f;
}

struct dataset {
  std::vector<pipeline_record> records;
  std::vector<feature_vector> features;
  std::vector<double> targets;  // residuals r = c_ac - c_ap

  std::size_t size() const { return records.size(); }

  void push(const pipeline_record& rec) {
    records.push_back(rec);
    features.push_back(featurize(rec.geometry));
    targets.push_back(rec.c_ac - features.back().c_ap);
  }

  // feature rows as a plain matrix for the tree/net layers
  std::vector<std::vector<double>> feature_matrix() const {
    std::vector<std::vector<double>> X(size());
    for (std::size_t i = 0; i < size(); ++i)
      X[i] = {features[i].c0, features[i].c_ap, features[i].d_prime, features[i].re_prime};
    return X;
  }
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline void check_positive(double v, const char* field, std::size_t line_no) {
  if (!std::isfinite(v) || v <= 0.0)
    throw data_error(std::string("line ") + std::to_string(line_no) + ": field `" + field +
                     "` must be finite and > 0");
}

}  // namespace detail

// CSV schema: header `L,d,Re,C0,C_AC[,pipeline_id]`, '.' decimals, no
// thousands separators.  Errors carry the 1-based line number.
inline dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw data_error(path + ": missing header row");
  auto fields = detail::split_fields(detail::trim(line));
  const bool with_id = fields.size() == 6;
  const std::array<std::string_view, 6> expect{"L", "d", "Re", "C0", "C_AC", "pipeline_id"};
  if (fields.size() != 5 && fields.size() != 6)
    throw data_error(path + ": header must be L,d,Re,C0,C_AC[,pipeline_id]");
  for (std::size_t i = 0; i < fields.size(); ++i)
    if (detail::trim(fields[i]) != expect[i])
      throw data_error(path + ": unexpected header field '" + std::string(fields[i]) + "'");

  dataset ds;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tl = detail::trim(line);
    if (tl.empty()) continue;
    fields = detail::split_fields(tl);
    if (fields.size() != (with_id ? 6u : 5u))
      throw data_error(path + ": line " + std::to_string(line_no) + ": expected " +
                       std::to_string(with_id ? 6 : 5) + " fields, got " +
                       std::to_string(fields.size()));
    pipeline_record rec;
    try {
      rec.geometry.L = parse_double(detail::trim(fields[0]), "L");
      rec.geometry.d = parse_double(detail::trim(fields[1]), "d");
      rec.geometry.Re = parse_double(detail::trim(fields[2]), "Re");
      rec.geometry.C0 = parse_double(detail::trim(fields[3]), "C0");
      rec.c_ac = parse_double(detail::trim(fields[4]), "C_AC");
      if (with_id)
        rec.pipeline_id = static_cast<int>(parse_int(detail::trim(fields[5]), "pipeline_id"));
    } catch (const data_error& e) {
      throw data_error(path + ": line " + std::to_string(line_no) + ": " + e.what());
    }
    detail::check_positive(rec.geometry.L, "L", line_no);
    detail::check_positive(rec.geometry.d, "d", line_no);
    detail::check_positive(rec.geometry.Re, "Re", line_no);
    if (!std::isfinite(rec.geometry.C0) || rec.geometry.C0 < 0.0)
      throw data_error("line " + std::to_string(line_no) + ": field `C0` must be finite and >= 0");
    detail::check_positive(rec.c_ac, "C_AC", line_no);
    ds.push(rec);
  }
  return ds;
}

inline void write_csv(const std::string& path, const dataset& ds) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  out << "L,d,Re,C0,C_AC,pipeline_id\n";
  for (const auto& r : ds.records) {
    out << format_double(r.geometry.L) << ',' << format_double(r.geometry.d) << ','
        << format_double(r.geometry.Re) << ',' << format_double(r.geometry.C0) << ','
        << format_double(r.c_ac) << ',' << r.pipeline_id << '\n';
  }
  if (!out) throw io_error("write failed for " + path);
}

// A record is an outlier iff |c_ac - c_ap| / c_ac exceeds the threshold
// (strictly).  Both outputs keep the original row order.
inline std::pair<dataset, dataset> filter_outliers(const dataset& ds, double threshold = 0.20) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw usage_error("filter_outliers: threshold must be in (0, 1]");
  dataset kept, removed;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double rel = std::fabs(ds.targets[i]) / ds.records[i].c_ac;
    (rel > threshold ? removed : kept).push(ds.records[i]);
  }
  return {std::move(kept), std::move(removed)};
}

// Random 70/30-style partition, reproducible from seed.  Train size is
// round-half-up of n*f; both parts keep original dataset order.
inline std::pair<dataset, dataset> split(const dataset& ds, double train_fraction,
                                         std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw usage_error("split: train_fraction must be in (0, 1)");
  const std::size_t n = ds.size();
  if (n < 2) throw usage_error("split: need at least 2 records");
  const auto k = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * train_fraction + 0.5));
  rng r(derive_seed(seed, 0x511));
  const auto perm = r.permutation(n);
  std::vector<char> in_train(n, 0);
  for (std::size_t i = 0; i < k; ++i) in_train[perm[i]] = 1;
  dataset train, valid;
  for (std::size_t i = 0; i < n; ++i) (in_train[i] ? train : valid).push(ds.records[i]);
  return {std::move(train), std::move(valid)};
}

// ------------------------------------------------------------------
// synthetic generators

struct toy_data {
  std::vector<double> x, y;
  std::size_t size() const { return x.size(); }
};

// Toy law: x ~ U(0,10) (redraw below 1e-6), eps ~ N(0, 0.25),
// y = exp(log x + eps) = x * exp(eps).  E[Y|X=x] = x * exp(0.125).
inline toy_data gen_toy(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw usage_error("gen_toy: n must be > 0");
  rng r(derive_seed(seed, 0x70b));
  toy_data out;
  out.x.reserve(n);
  out.y.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double x;
    do {
      x = r.uniform(0.0, 10.0);
    } while (x < 1e-6);
    const double eps = 0.5 * r.normal();
    out.x.push_back(x);
    out.y.push_back(x * std::exp(eps));
  }
  return out;
}

inline void write_toy_csv(const std::string& path, const toy_data& td) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  out << "x,y\n";
  for (std::size_t i = 0; i < td.size(); ++i)
    out << format_double(td.x[i]) << ',' << format_double(td.y[i]) << '\n';
  if (!out) throw io_error("write failed for " + path);
}

inline toy_data load_toy_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw data_error(path + ": missing header row");
  if (detail::trim(line) != "x,y") throw data_error(path + ": header must be x,y");
  toy_data td;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tl = detail::trim(line);
    if (tl.empty()) continue;
    const auto fields = detail::split_fields(tl);
    if (fields.size() != 2)
      throw data_error(path + ": line " + std::to_string(line_no) + ": expected 2 fields");
    try {
      td.x.push_back(parse_double(detail::trim(fields[0]), "x"));
      td.y.push_back(parse_double(detail::trim(fields[1]), "y"));
    } catch (const data_error& e) {
      throw data_error(path + ": line " + std::to_string(line_no) + ": " + e.what());
    }
    if (td.x.back() <= 0.0)
      throw data_error(path + ": line " + std::to_string(line_no) + ": field `x` must be > 0");
  }
  return td;
}

enum class synth_profile { train, test };

inline synth_profile parse_profile(std::string_view name) {
  if (name == "train") return synth_profile::train;
  if (name == "test") return synth_profile::test;
  throw usage_error("unknown profile '" + std::string(name) + "' (want train|test)");
}

// Synthetic stand-in for the confidential SCADA data.  Geometry ranges match
// the paper's reported operating envelope; C_AC = C_AP * exp(eta) with a
// profile-dependent lognormal factor so train/test raw distributions differ
// while residual structure stays comparable.
inline dataset gen_synthetic_pipeline(std::size_t n, std::uint64_t seed, synth_profile profile) {
  if (n == 0) throw usage_error("gen_synthetic_pipeline: n must be > 0");
  const double mu = profile == synth_profile::train ? 0.03 : 0.05;
  const double sd = profile == synth_profile::train ? 0.06 : 0.07;
  static constexpr std::array<double, 5> kDiameters{0.2, 0.25, 0.3, 0.4, 0.5};
  rng r(derive_seed(seed, 0x9e7));
  dataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    pipeline_record rec;
    rec.geometry.L = r.uniform(5e4, 4e5);
    rec.geometry.d = kDiameters[r.uniform_int(0, kDiameters.size() - 1)];
    rec.geometry.Re = r.uniform(1.124e5, 8.819e5);
    rec.geometry.C0 = r.uniform(0.0, 500.0);
    const double eta = mu + sd * r.normal();
    rec.c_ac = austin_palfrey(rec.geometry).c_ap * std::exp(eta);
    rec.pipeline_id = profile == synth_profile::train ? 1 : 3;
    ds.push(rec);
  }
  return ds;
}

}  // namespace mixlen
