#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace cmfg::poly {

// Real roots of c0 + c1 s + c2 s^2 inside [lo, hi], ascending.
inline std::vector<double> quadratic_roots(double c0, double c1, double c2, double lo, double hi) {
  std::vector<double> out;
  auto keep = [&](double r) {
    if (std::isfinite(r) && r >= lo && r <= hi) out.push_back(r);
  };
  const double scale = std::max({std::abs(c0), std::abs(c1), std::abs(c2)});
  if (scale == 0.0) return out;
  if (std::abs(c2) <= 1e-14 * scale) {
    if (c1 != 0.0) keep(-c0 / c1);
  } else {
    const double disc = c1 * c1 - 4.0 * c2 * c0;
    if (disc < 0.0) return out;
    const double sq = std::sqrt(disc);
    const double q = -0.5 * (c1 + (c1 >= 0.0 ? sq : -sq));
    if (q != 0.0) {
      keep(q / c2);
      keep(c0 / q);
    } else {
      keep(0.0);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline double cubic_eval(const double c[4], double s) { return ((c[3] * s + c[2]) * s + c[1]) * s + c[0]; }

// Real roots of a cubic (coefficients ascending) inside [lo, hi] by bracketing between
// critical points and bisection refined with Newton.
inline std::vector<double> cubic_roots(const double c[4], double lo, double hi) {
  const double scale = std::max({std::abs(c[0]), std::abs(c[1]), std::abs(c[2]), std::abs(c[3])});
  if (scale == 0.0) return {};
  if (std::abs(c[3]) <= 1e-14 * scale) return quadratic_roots(c[0], c[1], c[2], lo, hi);
  std::vector<double> cuts{lo};
  for (double r : quadratic_roots(c[1], 2.0 * c[2], 3.0 * c[3], lo, hi))
    if (r > lo && r < hi) cuts.push_back(r);
  cuts.push_back(hi);
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double a = cuts[i], b = cuts[i + 1];
    double fa = cubic_eval(c, a), fb = cubic_eval(c, b);
    if (fa == 0.0) {
      out.push_back(a);
      continue;
    }
    if (fb == 0.0 || (fa < 0.0) == (fb < 0.0)) continue;
    for (int it = 0; it < 200 && b - a > 1e-16 * (1.0 + std::abs(a)); ++it) {
      const double m = 0.5 * (a + b);
      const double fm = cubic_eval(c, m);
      if ((fm < 0.0) == (fa < 0.0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    out.push_back(0.5 * (a + b));
  }
  if (cubic_eval(c, hi) == 0.0) out.push_back(hi);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace cmfg::poly
