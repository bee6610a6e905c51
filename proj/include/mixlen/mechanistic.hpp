#pragma once

#include <cmath>
#include <string>

#include "error.hpp"

namespace mixlen {

struct pipeline_geometry {
  double L = 0.0;   // transport distance, m
  double d = 0.0;   // inner diameter, m
  double Re = 0.0;  // Reynolds number
  double C0 = 0.0;  // initial mixed-oil length, m

  void validate() const {
    auto bad = [](double v) { return !std::isfinite(v); };
    if (bad(L) || L <= 0.0) throw usage_error("geometry: L must be finite and > 0");
    if (bad(d) || d <= 0.0) throw usage_error("geometry: d must be finite and > 0");
    if (bad(Re) || Re <= 0.0) throw usage_error("geometry: Re must be finite and > 0");
    if (bad(C0) || C0 < 0.0) throw usage_error("geometry: C0 must be finite and >= 0");
  }
};

// Critical Reynolds number Re_j = 10000 * exp(2.72 * sqrt(d)).
// d = 0 is accepted (limit value 10000) even though real diameters are
// positive; see the regime-boundary tests.
inline double critical_reynolds(double d) {
  if (!std::isfinite(d) || d < 0.0)
    throw usage_error("critical_reynolds: d must be finite and >= 0, got " + std::to_string(d));
  return 10000.0 * std::exp(2.72 * std::sqrt(d));
}

// Equivalent transport length for an initial mixed-oil slug C0:
// L_e = (C0 * Re^0.1 / (11.75 * sqrt(d)))^2, zero iff C0 = 0.
inline double equivalent_length(double C0, double Re, double d) {
  if (!std::isfinite(C0) || C0 < 0.0)
    throw usage_error("equivalent_length: C0 must be finite and >= 0");
  if (!std::isfinite(Re) || Re <= 0.0)
    throw usage_error("equivalent_length: Re must be finite and > 0");
  if (!std::isfinite(d) || d <= 0.0)
    throw usage_error("equivalent_length: d must be finite and > 0");
  const double r = C0 * std::pow(Re, 0.1) / (11.75 * std::sqrt(d));
  return r * r;
}

enum class flow_regime { low, high };

inline const char* regime_name(flow_regime r) {
  return r == flow_regime::low ? "low-regime" : "high-regime";
}

struct ap_result {
  double c_ap = 0.0;
  flow_regime regime = flow_regime::high;
};

// Austin-Palfrey mixed-oil length with regime selection at Re_j(d).
// Below Re_j:  C_AP = 18384 * sqrt(d) * sqrt(L_c) * Re^-0.9 * exp(2.18*sqrt(d))
// At/above:    C_AP = 11.75 * sqrt(d) * sqrt(L_c) * Re^-0.1
// where L_c = L + L_e.  Ties Re == Re_j take the high branch.  L = 0 is
// accepted here (degenerate L_c = C_AP = 0) although records require L > 0.
inline ap_result austin_palfrey(const pipeline_geometry& g) {
  if (!std::isfinite(g.L) || g.L < 0.0)
    throw usage_error("austin_palfrey: L must be finite and >= 0");
  if (!std::isfinite(g.d) || g.d <= 0.0)
    throw usage_error("austin_palfrey: d must be finite and > 0");
  if (!std::isfinite(g.Re) || g.Re <= 0.0)
    throw usage_error("austin_palfrey: Re must be finite and > 0");
  if (!std::isfinite(g.C0) || g.C0 < 0.0)
    throw usage_error("austin_palfrey: C0 must be finite and >= 0");
  const double L_c = g.L + equivalent_length(g.C0, g.Re, g.d);
  const double sqrt_d = std::sqrt(g.d);
  const double sqrt_Lc = std::sqrt(L_c);
  ap_result out;
  if (g.Re < critical_reynolds(g.d)) {
    out.regime = flow_regime::low;
    out.c_ap = 18384.0 * sqrt_d * sqrt_Lc * std::pow(g.Re, -0.9) * std::exp(2.18 * sqrt_d);
  } else {
    out.regime = flow_regime::high;
    out.c_ap = 11.75 * sqrt_d * sqrt_Lc * std::pow(g.Re, -0.1);
  }
  return out;
}

}  // namespace mixlen
