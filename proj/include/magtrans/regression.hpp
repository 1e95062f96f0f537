#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "magtrans/physcore.hpp"

namespace magtrans {

/// Ordinary least-squares line y = slope * x + intercept.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
  double cov_slope_intercept = 0.0;
  double residual_rms = 0.0;
  std::size_t n = 0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("fit_line: x and y differ in length");
  const std::size_t n = x.size();
  if (n < 2) throw InputError("fit_line: need at least two points");

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw InputError("fit_line: abscissa is degenerate (all x equal)");

  LineFit f;
  f.n = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;

  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.slope * x[i] + f.intercept);
    ssr += r * r;
  }
  f.residual_rms = std::sqrt(ssr / static_cast<double>(n));
  if (n > 2) {
    const double s2 = ssr / static_cast<double>(n - 2);
    const double var_slope = s2 / sxx;
    f.slope_se = std::sqrt(var_slope);
    f.intercept_se = std::sqrt(s2 / static_cast<double>(n) + mx * mx * var_slope);
    f.cov_slope_intercept = -mx * var_slope;
  }
  return f;
}

}  // namespace magtrans
