#pragma once

// Independent reference computations used by the tests. None of these call
// into the library code they check.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace sentprobe::oracle {

// Rank by counting: (#less) + (#equal + 1) / 2.
inline std::vector<double> brute_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::size_t less = 0, equal = 0;
    for (double y : x) {
      less += y < x[i];
      equal += y == x[i];
    }
    r[i] = static_cast<double>(less) + (static_cast<double>(equal) + 1.0) / 2.0;
  }
  return r;
}

// Pearson from raw sums in extended precision.
inline double pearson_sums(const std::vector<double>& x, const std::vector<double>& y) {
  long double n = static_cast<long double>(x.size());
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  const long double cov = sxy - sx * sy / n;
  const long double vx = sxx - sx * sx / n;
  const long double vy = syy - sy * sy / n;
  return static_cast<double>(cov / std::sqrt(vx * vy));
}

inline double spearman_brute(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson_sums(brute_ranks(x), brute_ranks(y));
}

inline double cosine_ld(const std::vector<double>& a, const std::vector<double>& b) {
  long double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += static_cast<long double>(a[i]) * b[i];
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  return static_cast<double>(d / std::sqrt(na * nb));
}

// Central difference of f around params[i]; restores params[i].
inline double central_difference(std::vector<double>& params, std::size_t i,
                                 const std::function<double()>& f, double h = 1e-5) {
  const double saved = params[i];
  params[i] = saved + h;
  const double up = f();
  params[i] = saved - h;
  const double down = f();
  params[i] = saved;
  return (up - down) / (2.0 * h);
}

// Relative error with a tiny absolute floor for components that are zero in
// both computations.
inline bool grad_close(double analytic, double numeric, double rel_tol = 1e-4,
                       double abs_floor = 1e-9) {
  const double diff = std::abs(analytic - numeric);
  if (diff <= abs_floor) return true;
  return diff <= rel_tol * std::max(std::abs(analytic), std::abs(numeric));
}

}  // namespace sentprobe::oracle
