#pragma once

/// \file
/// Forward models of the magnetoconductance corrections of a 2D layer:
/// perpendicular-field weak localization, the in-plane orbital correction of a
/// layer of finite thickness, and the Zeeman part of the electron-electron
/// interaction correction. All quantities are SI; conductances per square.

#include <cmath>
#include <numbers>

#include "magtrans/physcore.hpp"

namespace magtrans {

struct WlParams {
  double l_phi = 0.0;  // coherence length (m)
  double l_mfp = 0.0;  // mean free path (m)

  /// Weak localization requires l_phi > l_mfp. Not enforced.
  bool in_wl_regime() const { return l_phi > l_mfp; }
};

struct InPlaneParams {
  double gamma = 0.0;  // T^-2
};

struct AaParams {
  double F = 0.0;
  double g_factor = Constants::g_factor;
};

enum class Orientation { Perpendicular, InPlane };

inline Orientation orientation_from_angle(double theta_rad) {
  constexpr double tol = 1e-9;
  if (std::abs(theta_rad) < tol) return Orientation::Perpendicular;
  if (std::abs(theta_rad - std::numbers::pi / 2) < tol) return Orientation::InPlane;
  throw DomainError("only perpendicular (0) and in-plane (pi/2) fields are modeled");
}

inline Orientation orientation_from_degrees(double theta_deg) {
  constexpr double tol = 1e-6;
  if (std::abs(theta_deg) < tol) return Orientation::Perpendicular;
  if (std::abs(theta_deg - 90.0) < tol) return Orientation::InPlane;
  throw DomainError("only theta = 0 deg and theta = 90 deg are modeled");
}

inline double orientation_degrees(Orientation o) { return o == Orientation::Perpendicular ? 0.0 : 90.0; }

inline double phase_breaking_field(double l_phi) {
  detail::require(detail::positive_finite(l_phi), "phase_breaking_field: l_phi must be positive");
  return Constants::hbar / (4.0 * Constants::e * l_phi * l_phi);
}

inline double elastic_field(double l_mfp) {
  detail::require(detail::positive_finite(l_mfp), "elastic_field: l_mfp must be positive");
  return Constants::hbar / (2.0 * Constants::e * l_mfp * l_mfp);
}

/// Scale factor on the perpendicular weak-localization term. Only used to
/// generate counterfactual data; no analysis path accepts one.
struct DiagnosticPrefactor {
  double value = 1.0;
};

namespace detail {
// psi(1/2 + x) - ln x. Its large-x tail is small, so it gets its own series
// instead of the difference of two O(ln x) numbers.
inline double half_digamma_minus_log(double x) {
  double acc = 0.0;
  if (x < 10.0) {
    double y = x;
    while (y < 10.0) {
      acc -= 1.0 / (y + 0.5);
      y += 1.0;
    }
    acc += std::log(y / x);
    x = y;
  }
  // (1 - 2^(1-2k)) B_2k / (2k) for k = 1..10
  static constexpr double c[] = {1.0 / 24,          -7.0 / 960,           31.0 / 8064,         -127.0 / 30720,
                                 511.0 / 67584,     -1414477.0 / 67092480, 8191.0 / 98304,      -118518239.0 / 267386880,
                                 5749691557.0 / 1882718208, -91546277357.0 / 3460300800};
  const double inv2 = 1.0 / (x * x);
  double series = 0.0;
  for (int k = 9; k >= 0; --k) series = (series + c[k]) * inv2;
  return acc + series;
}

// psi(1/2 + B_phi/B) - psi(1/2 + B_l/B) + ln(2 l_phi^2 / l^2). The logarithm
// equals ln(B_l / B_phi), so it cancels against the log parts of the digammas.
inline double wl_perp_bracket(double B, const WlParams& p) {
  require(std::isfinite(B) && B >= 0.0, "wl_perp: field must be non-negative (pass |B|)");
  require(positive_finite(p.l_phi) && positive_finite(p.l_mfp), "wl_perp: lengths must be positive");
  if (B == 0.0) return 0.0;
  const double a = phase_breaking_field(p.l_phi) / B;
  const double b = elastic_field(p.l_mfp) / B;
  return half_digamma_minus_log(a) - half_digamma_minus_log(b);
}
}  // namespace detail

/// Weak-localization correction for a field perpendicular to the layer.
/// Returns the analytic limit 0 at B = 0.
inline double wl_perp(double B, const WlParams& p) {
  return Constants::G0 / std::numbers::pi * detail::wl_perp_bracket(B, p);
}

inline double wl_perp(double B, const WlParams& p, DiagnosticPrefactor prefactor) {
  return prefactor.value * wl_perp(B, p);
}

/// Orbital correction for a field in the plane of a layer of finite thickness.
inline double wl_inplane(double B, const InPlaneParams& p) {
  detail::require(std::isfinite(p.gamma) && p.gamma >= 0.0, "wl_inplane: gamma must be non-negative");
  return Constants::G0 / std::numbers::pi * std::log1p(p.gamma * B * B);
}

/// gamma = delta^2 sqrt(4 pi / n) (e l_phi / (hbar sqrt(l)))^2, in T^-2.
inline double gamma_param(double delta, double n_2d, double l_phi, double l_mfp) {
  detail::require(detail::positive_finite(delta) && detail::positive_finite(n_2d) &&
                      detail::positive_finite(l_phi) && detail::positive_finite(l_mfp),
                  "gamma_param: inputs must be positive");
  const double k = Constants::e / Constants::hbar * l_phi;
  return delta * delta * std::sqrt(4.0 * std::numbers::pi / n_2d) * k * k / l_mfp;
}

/// Layer thickness delta for which gamma_param returns `gamma`.
inline double thickness_from_gamma(double gamma, double n_2d, double l_phi, double l_mfp) {
  detail::require(std::isfinite(gamma) && gamma >= 0.0, "thickness_from_gamma: gamma must be non-negative");
  detail::require(detail::positive_finite(n_2d) && detail::positive_finite(l_phi) &&
                      detail::positive_finite(l_mfp),
                  "thickness_from_gamma: inputs must be positive");
  const double k = Constants::e / Constants::hbar * l_phi;
  return std::sqrt(gamma / (std::sqrt(4.0 * std::numbers::pi / n_2d) * k * k / l_mfp));
}

/// Reduced field h = g mu_B B / (k_B T).
inline double reduced_field(double B, double T, double g = Constants::g_factor) {
  detail::require(detail::positive_finite(T), "reduced_field: temperature must be positive");
  detail::require(std::isfinite(B) && B >= 0.0, "reduced_field: field must be non-negative");
  constexpr double mu_over_k = Constants::mu_B / Constants::k_B;
  return g * mu_over_k * (B / T);
}

/// Reduced field below which the quadratic branch of zeeman_aa is used.
/// At h = 1.3 sqrt(e) the curve a h^2 matches -ln(h / 1.3) in value and slope.
inline const double kZeemanCrossover = 1.3 * std::exp(0.5);

/// Zeeman correction as a function of the reduced field alone.
inline double zeeman_aa_reduced(double h, double F) {
  const double c = Constants::G0 / (2.0 * std::numbers::pi) * F;
  if (h >= kZeemanCrossover) return -c * std::log(h / 1.3);
  const double a = -c / (2.0 * kZeemanCrossover * kZeemanCrossover);
  return a * h * h;
}

/// Zeeman contribution to the interaction correction. Orientation independent.
inline double zeeman_aa(double B, double T, const AaParams& p) {
  detail::require(std::isfinite(p.F), "zeeman_aa: F must be finite");
  return zeeman_aa_reduced(reduced_field(B, T, p.g_factor), p.F);
}

/// Weak localization and Zeeman corrections add as parallel channels.
inline double total_delta_sigma(double B, Orientation orientation, double T, const WlParams& wl,
                                const InPlaneParams& ip, const AaParams& aa) {
  const double orbital = orientation == Orientation::Perpendicular ? wl_perp(B, wl) : wl_inplane(B, ip);
  return orbital + zeeman_aa(B, T, aa);
}

inline double total_delta_sigma(double B, double theta_rad, double T, const WlParams& wl,
                                const InPlaneParams& ip, const AaParams& aa) {
  return total_delta_sigma(B, orientation_from_angle(theta_rad), T, wl, ip, aa);
}

}  // namespace magtrans
