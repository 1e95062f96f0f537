#pragma once

/// \file
/// Carrier density, mobility and the derived disorder and interaction
/// parameters of a single-carrier 2D layer, from a Hall-bar measurement.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "magtrans/physcore.hpp"
#include "magtrans/regression.hpp"

namespace magtrans {

struct Geometry {
  double length = 200e-6;  // m, between voltage probes
  double width = 20e-6;    // m
};

inline void validate(const Geometry& g) {
  if (!(detail::positive_finite(g.width) && detail::positive_finite(g.length) && g.length > g.width))
    throw DomainError("Hall bar geometry requires L > W > 0");
}

struct HallSweep {
  std::vector<double> B;     // T
  std::vector<double> R_xy;  // Ohm
  std::vector<double> R_xx;  // Ohm
  double T_bath = 0.0;       // K
  Geometry geometry;
};

/// B strictly monotone, equal lengths (R_xx may be left empty), valid geometry.
inline void validate(const HallSweep& s) {
  if (s.B.size() != s.R_xy.size() || (!s.R_xx.empty() && s.R_xx.size() != s.B.size()))
    throw InputError("Hall sweep: B, R_xy and R_xx differ in length");
  const bool up = std::adjacent_find(s.B.begin(), s.B.end(), std::greater_equal<>()) == s.B.end();
  const bool down = std::adjacent_find(s.B.begin(), s.B.end(), std::less_equal<>()) == s.B.end();
  if (!up && !down) throw InputError("Hall sweep: field values are not strictly monotone");
  validate(s.geometry);
}

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Default r_s constant g_v / a_B (1/m).
inline constexpr double kDefaultKappa = 3.37e9;

struct SamplePhysics {
  double n_2d = 0.0;      // 1/m^2
  double mu = 0.0;        // m^2/(V s)
  double sigma_xx = 0.0;  // S per square
  double l_mfp = 0.0;     // m
  double k_f = 0.0;       // 1/m
  double kf_l = 0.0;
  double r_s = 0.0;
  std::optional<double> delta;  // m
  std::optional<double> l_phi;  // m
};

/// Sheet density from the slope of R_xy(B). The intercept absorbs contact
/// misalignment; the slope must be positive (electrons, B along +z).
inline Estimate density_from_hall(const HallSweep& s) {
  if (s.B.size() < 3) throw InputError("density_from_hall: need at least three field points");
  const auto [lo, hi] = std::minmax_element(s.B.begin(), s.B.end());
  if (*hi - *lo < 0.5) throw InputError("density_from_hall: field span below 0.5 T");
  validate(s);
  const LineFit line = fit_line(s.B, s.R_xy);
  if (!(line.slope > 0.0))
    throw DomainError("density_from_hall: non-positive Hall slope (carrier sign mismatch)");
  const double n = 1.0 / (Constants::e * line.slope);
  return {n, n * line.slope_se / line.slope};
}

inline double sheet_conductivity(double R_xx, double L, double W) {
  detail::require(detail::positive_finite(R_xx) && detail::positive_finite(L) && detail::positive_finite(W),
                  "sheet_conductivity: inputs must be positive");
  return (1.0 / R_xx) * (L / W);
}

inline double mobility(double n_2d, double sigma_xx) {
  detail::require(detail::positive_finite(n_2d) && detail::positive_finite(sigma_xx),
                  "mobility: inputs must be positive");
  return sigma_xx / (n_2d * Constants::e);
}

/// k_F = sqrt(2 pi n): spin degenerate, one effective valley.
inline double fermi_wavevector(double n_2d) {
  detail::require(detail::positive_finite(n_2d), "fermi_wavevector: density must be positive");
  return std::sqrt(2.0 * std::numbers::pi * n_2d);
}

inline double mean_free_path(double n_2d, double mu) {
  detail::require(detail::positive_finite(n_2d) && detail::positive_finite(mu),
                  "mean_free_path: inputs must be positive");
  return Constants::hbar * fermi_wavevector(n_2d) * mu / Constants::e;
}

/// r_s = kappa / sqrt(pi n) with kappa = g_v / a_B.
inline double interaction_rs(double n_2d, double kappa = kDefaultKappa) {
  detail::require(detail::positive_finite(n_2d) && detail::positive_finite(kappa),
                  "interaction_rs: inputs must be positive");
  return kappa / std::sqrt(std::numbers::pi * n_2d);
}

/// All table quantities that follow from density and mobility.
inline SamplePhysics derive_sample_physics(double n_2d, double mu, double kappa = kDefaultKappa) {
  SamplePhysics s;
  s.n_2d = n_2d;
  s.mu = mu;
  s.sigma_xx = n_2d * Constants::e * mu;
  s.k_f = fermi_wavevector(n_2d);
  s.l_mfp = mean_free_path(n_2d, mu);
  s.kf_l = s.k_f * s.l_mfp;
  s.r_s = interaction_rs(n_2d, kappa);
  return s;
}

/// One-sigma relative uncertainties of the derived quantities, propagated
/// from uncorrelated relative errors on n_2d and sigma_xx.
struct DerivedUncertainty {
  double mu = 0.0;
  double l_mfp = 0.0;
  double k_f = 0.0;
  double kf_l = 0.0;
  double r_s = 0.0;
};

inline DerivedUncertainty propagate_relative(double rel_n, double rel_sigma) {
  DerivedUncertainty u;
  u.mu = std::hypot(rel_n, rel_sigma);
  u.k_f = 0.5 * rel_n;
  // l = hbar sqrt(2 pi) sigma / (e^2 sqrt(n)); k_F l = 2 pi hbar sigma / e^2
  u.l_mfp = std::hypot(0.5 * rel_n, rel_sigma);
  u.kf_l = rel_sigma;
  u.r_s = 0.5 * rel_n;
  return u;
}

}  // namespace magtrans
