#pragma once

// Shared test fixtures: the sample table and independent reference
// evaluations that do not go through the library code paths.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "magtrans/magtrans.hpp"

namespace magtrans::testing {

// One row of the reference sample table, in the table's own units.
struct TableRow {
  int id;
  double n13, n13_err;        // 1e13 cm^-2
  double mu_cm2, mu_err;      // cm^2/(V s)
  double sigma4, sigma4_err;  // 1e-4 S per square
  double l_nm, l_err;
  double l_phi_nm, l_phi_err;
  double delta_nm, delta_err;
  double kfl, kfl_err;

  double n() const { return to_si({n13 * 1e13, Unit::PerSquareCentimeter}).value; }
  double mu() const { return to_si({mu_cm2, Unit::SquareCentimeterPerVoltSecond}).value; }
  double l() const { return l_nm * 1e-9; }
  double l_phi() const { return l_phi_nm * 1e-9; }
  double delta() const { return delta_nm * 1e-9; }
};

inline const std::array<TableRow, 10> kTable{{
    {1, 18.73, 0.06, 51.8, 0.2, 15.6, 0.5, 11.7, 0.04, 86, 6, 10, 1, 40.1, 0.2},
    {2, 12.23, 0.08, 27.3, 0.2, 5.4, 0.2, 4.98, 0.04, 75, 1, 1.46, 0.08, 13.8, 0.1},
    {3, 10.18, 0.09, 22.4, 0.2, 3.6, 0.1, 3.72, 0.04, 57.6, 0.3, 1.26, 0.03, 9.4, 0.1},
    {4, 9.15, 0.09, 15.4, 0.2, 2.25, 0.07, 2.42, 0.03, 41.9, 0.2, 0.41, 0.04, 5.80, 0.09},
    {5, 8.47, 0.03, 34.4, 0.1, 4.7, 0.1, 5.23, 0.02, 77.4, 0.5, 1.04, 0.04, 12.07, 0.06},
    {6, 2.82, 0.05, 42.4, 0.9, 1.92, 0.06, 3.72, 0.09, 27.5, 0.3, 1.82, 0.07, 4.9, 0.1},
    {7, 2.14, 0.02, 38.9, 0.3, 1.33, 0.04, 2.97, 0.02, 35.5, 0.2, 0.42, 0.06, 3.44, 0.04},
    {8, 1.70, 0.04, 44.5, 0.1, 1.21, 0.04, 3.03, 0.07, 23.2, 0.2, 0.88, 0.06, 3.1, 0.1},
    {9, 1.61, 0.02, 34.5, 0.5, 0.89, 0.03, 2.29, 0.04, 20.5, 0.5, 1.3, 0.1, 2.30, 0.05},
    {10, 1.18, 0.01, 35.6, 0.3, 0.67, 0.02, 2.01, 0.02, 22.4, 0.2, 0.65, 0.05, 1.73, 0.02},
}};

inline const TableRow& row(int id) { return kTable[static_cast<std::size_t>(id - 1)]; }

// Reference digamma in extended precision: recurrence to x >= 40 and ten
// terms of the asymptotic series.
inline long double digamma_ref(long double x) {
  long double acc = 0.0L;
  while (x < 40.0L) {
    acc -= 1.0L / x;
    x += 1.0L;
  }
  static constexpr long double b2k_over_2k[] = {
      1.0L / 12,        -1.0L / 120,        1.0L / 252,          -1.0L / 240,         1.0L / 132,
      -691.0L / 32760,  1.0L / 12,          -3617.0L / 8160,     43867.0L / 14364,    -174611.0L / 6600,
  };
  const long double inv2 = 1.0L / (x * x);
  long double pw = inv2, series = 0.0L;
  for (long double c : b2k_over_2k) {
    series += c * pw;
    pw *= inv2;
  }
  return acc + std::log(x) - 0.5L / x - series;
}

// Perpendicular weak-localization correction written out from the
// characteristic fields, in extended precision.
inline double wl_perp_ref(double B, double l_phi, double l_mfp) {
  using L = long double;
  const L e = 1.602176634e-19L, h = 6.62607015e-34L;
  const L hbar = h / (2.0L * std::numbers::pi_v<L>);
  const L b_phi = hbar / (4.0L * e * l_phi * l_phi);
  const L b_el = hbar / (2.0L * e * l_mfp * l_mfp);
  const L bracket = digamma_ref(0.5L + b_phi / B) - digamma_ref(0.5L + b_el / B) +
                    std::log(2.0L * (L(l_phi) / l_mfp) * (L(l_phi) / l_mfp));
  return static_cast<double>(e * e / h / std::numbers::pi_v<L> * bracket);
}

inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
  return v;
}

// Exact perpendicular-minus-in-plane curve for a table row at a given field set.
inline std::vector<double> wl_difference_curve(const std::vector<double>& B, double l_phi, double l_mfp,
                                               double gamma) {
  std::vector<double> y;
  for (double b : B) y.push_back(wl_perp(b, {l_phi, l_mfp}) - wl_inplane(b, {gamma}));
  return y;
}

// Zeeman correction curve sampled at field magnitudes for one temperature,
// optionally with additive Gaussian noise of absolute size `noise`.
inline AaCurve aa_curve(double T_bath, double T_eff, double F, const std::vector<double>& B, double noise,
                        std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  AaCurve c{T_bath, {}, T_bath};
  for (double b : B) {
    const double v = zeeman_aa(b, T_eff, {F, 2.0});
    c.points.push_back({b, v + noise * normal(rng)});
  }
  return c;
}

}  // namespace magtrans::testing
