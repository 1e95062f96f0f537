#pragma once

/// \file
/// Inverse problems: the two-parameter weak-localization difference fit,
/// the coherence-length power law and the interaction slope.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "magtrans/levmar.hpp"
#include "magtrans/models.hpp"
#include "magtrans/regression.hpp"

namespace magtrans {

struct WlFitOptions {
  double gamma_init = 1e-4;    // T^-2
  double l_phi_max = 10e-6;    // m
  double gamma_max = 1.0;      // T^-2
  std::vector<double> sigma;   // optional per-point standard deviations
  LevmarOptions levmar;
};

struct WlDifferenceFit {
  /// The model exposes only the coherence length and gamma.
  static constexpr int kFreeParameters = 2;

  double l_phi = 0.0;      // m
  double gamma = 0.0;      // T^-2
  double delta = 0.0;      // m
  double l_phi_err = 0.0;
  double gamma_err = 0.0;
  double delta_err = 0.0;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();  // (l_phi, gamma)
  FitResult raw;
  bool converged = false;
};

/// wl_perp(B; l_phi, l) - wl_inplane(B; gamma), B >= 0.
inline double wl_difference_model(double B, double l_phi, double gamma, double l_mfp) {
  return wl_perp(B, WlParams{l_phi, l_mfp}) - wl_inplane(B, InPlaneParams{gamma});
}

namespace detail {

// Low-field expansion: Dsigma ~ (G0/pi) B^2 [1/(24 B_phi^2) - 1/(24 B_l^2) - gamma].
inline std::optional<double> l_phi_from_curvature(std::span<const double> B, std::span<const double> y,
                                                  double l_mfp, double gamma0) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < B.size(); ++i)
    if (B[i] > 0.0) idx.push_back(i);
  if (idx.empty()) return std::nullopt;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return B[a] < B[b]; });
  idx.resize(std::min<std::size_t>(idx.size(), 3));
  double num = 0.0, den = 0.0;
  for (auto i : idx) {
    const double b2 = B[i] * B[i];
    num += y[i] * b2;
    den += b2 * b2;
  }
  const double c2 = num / den * std::numbers::pi / Constants::G0;
  const double b_el = elastic_field(l_mfp);
  const double inv_bphi2 = 24.0 * (c2 + gamma0) + 1.0 / (b_el * b_el);
  if (!(inv_bphi2 > 0.0) || !std::isfinite(inv_bphi2)) return std::nullopt;
  const double b_phi = 1.0 / std::sqrt(inv_bphi2);
  return std::sqrt(Constants::hbar / (4.0 * Constants::e * b_phi));
}

}  // namespace detail

/// Fit the perpendicular-minus-in-plane magnetoconductance with the coherence
/// length and gamma free. The mean free path and density are fixed inputs;
/// there is no free prefactor. B values are field magnitudes.
inline WlDifferenceFit fit_wl_difference(std::span<const double> B, std::span<const double> dsigma, double l_mfp,
                                         double n_2d, const WlFitOptions& opt = {}) {
  if (B.size() != dsigma.size()) throw InputError("fit_wl_difference: B and dsigma differ in length");
  if (B.size() < WlDifferenceFit::kFreeParameters + 3)
    throw InputError("fit_wl_difference: need at least five field points");
  if (!opt.sigma.empty() && opt.sigma.size() != B.size())
    throw InputError("fit_wl_difference: sigma column length mismatch");
  detail::require(detail::positive_finite(l_mfp) && detail::positive_finite(n_2d),
                  "fit_wl_difference: l_mfp and n_2d must be positive");
  for (double b : B) detail::require(std::isfinite(b) && b >= 0.0, "fit_wl_difference: field magnitudes expected");

  const std::vector<double> b(B.begin(), B.end());
  const std::vector<double> y(dsigma.begin(), dsigma.end());
  std::vector<double> w(B.size(), 1.0 / Constants::G0);
  for (std::size_t i = 0; i < opt.sigma.size(); ++i) {
    detail::require(detail::positive_finite(opt.sigma[i]), "fit_wl_difference: sigma must be positive");
    w[i] = 1.0 / opt.sigma[i];
  }

  Residual residual;
  residual.evaluate = [&](const Vector& p) {
    Vector r(static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < b.size(); ++i)
      r[static_cast<Eigen::Index>(i)] = w[i] * (wl_difference_model(b[i], p[0], p[1], l_mfp) - y[i]);
    return r;
  };

  Bounds box{Vector(2), Vector(2)};
  box.lower << l_mfp, 0.0;
  box.upper << std::max(opt.l_phi_max, l_mfp), opt.gamma_max;
  auto clamp = [&](double v, int j) { return std::clamp(v, box.lower[j], box.upper[j]); };

  // Start from the low-field curvature; fall back to a log grid when the
  // curvature estimate is unusable or clearly worse.
  const double gamma0 = clamp(opt.gamma_init, 1);
  auto cost_at = [&](double lp) { return residual.evaluate((Vector(2) << lp, gamma0).finished()).squaredNorm(); };
  double best_lp = std::sqrt(box.lower[0] * box.upper[0]);
  double best_cost = cost_at(best_lp);
  if (auto lp = detail::l_phi_from_curvature(b, y, l_mfp, gamma0)) {
    const double c = cost_at(clamp(*lp, 0));
    if (std::isfinite(c)) {
      best_lp = clamp(*lp, 0);
      best_cost = c;
    }
  }
  constexpr int kGrid = 32;
  for (int i = 0; i <= kGrid; ++i) {
    const double lp = box.lower[0] * std::pow(box.upper[0] / box.lower[0], static_cast<double>(i) / kGrid);
    const double c = cost_at(lp);
    if (c < 0.5 * best_cost) {
      best_cost = c;
      best_lp = lp;
    }
  }

  WlDifferenceFit out;
  out.raw = levmar(residual, (Vector(2) << best_lp, gamma0).finished(), box, opt.levmar);
  out.converged = out.raw.converged;
  out.l_phi = out.raw.params[0];
  out.gamma = out.raw.params[1];
  out.covariance = out.raw.covariance;
  out.l_phi_err = std::sqrt(std::max(out.covariance(0, 0), 0.0));
  out.gamma_err = std::sqrt(std::max(out.covariance(1, 1), 0.0));
  out.delta = thickness_from_gamma(out.gamma, n_2d, out.l_phi, l_mfp);
  // delta ~ sqrt(gamma) / l_phi
  if (out.delta > 0.0) {
    const Eigen::Vector2d grad{-out.delta / out.l_phi, 0.5 * out.delta / out.gamma};
    out.delta_err = std::sqrt(std::max(grad.dot(out.covariance * grad), 0.0));
  } else {
    // gamma pinned at zero: linear propagation through sqrt breaks down, so
    // quote the thickness of a one-sigma gamma instead
    out.delta_err = thickness_from_gamma(out.gamma_err, n_2d, out.l_phi, l_mfp);
  }
  return out;
}

struct PowerLawFit {
  double exponent = 0.0;
  double amplitude = 0.0;  // l_phi at T = 1 K (m)
  double exponent_err = 0.0;
  double amplitude_err = 0.0;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();  // (exponent, ln amplitude)
  std::size_t n_points = 0;
};

/// l_phi = amplitude * T^exponent by linear regression in log-log space.
/// The caller restricts the points to T above the saturation temperature.
inline PowerLawFit fit_coherence_power_law(std::span<const double> T, std::span<const double> l_phi) {
  if (T.size() != l_phi.size()) throw InputError("fit_coherence_power_law: length mismatch");
  if (T.size() < 3) throw InputError("fit_coherence_power_law: need at least three temperatures");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < T.size(); ++i) {
    detail::require(detail::positive_finite(T[i]), "fit_coherence_power_law: temperatures must be positive");
    detail::require(detail::positive_finite(l_phi[i]), "fit_coherence_power_law: lengths must be positive");
    x.push_back(std::log(T[i]));
    y.push_back(std::log(l_phi[i]));
  }
  const LineFit line = fit_line(x, y);
  PowerLawFit f;
  f.n_points = T.size();
  f.exponent = line.slope;
  f.amplitude = std::exp(line.intercept);
  f.exponent_err = line.slope_se;
  f.amplitude_err = f.amplitude * line.intercept_se;
  f.covariance << line.slope_se * line.slope_se, line.cov_slope_intercept, line.cov_slope_intercept,
      line.intercept_se * line.intercept_se;
  return f;
}

/// Keep the points strictly above the saturation temperature.
inline void select_above(double T_c, std::vector<double>& T, std::vector<double>& l_phi) {
  std::size_t k = 0;
  for (std::size_t i = 0; i < T.size(); ++i) {
    if (T[i] > T_c) {
      T[k] = T[i];
      l_phi[k] = l_phi[i];
      ++k;
    }
  }
  T.resize(k);
  l_phi.resize(k);
}

inline constexpr double kDefaultHMin = 3.0;

struct AaSlopeFit {
  double F = 0.0;
  double F_err = 0.0;
  /// exp(-intercept / slope): the reference field of the logarithm, 1.3 for
  /// data that follow the model. NaN when the slope vanishes.
  double intercept_check = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();  // (slope, intercept)
  std::size_t n_points = 0;
};

/// Linear regression of the Zeeman correction against ln h for h >= h_min.
inline AaSlopeFit fit_aa_slope(std::span<const double> h, std::span<const double> dsigma,
                               double h_min = kDefaultHMin) {
  if (h.size() != dsigma.size()) throw InputError("fit_aa_slope: length mismatch");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (std::isfinite(h[i]) && h[i] >= h_min && h[i] > 0.0) {
      x.push_back(std::log(h[i]));
      y.push_back(dsigma[i]);
    }
  }
  if (x.size() < 3) throw InputError("fit_aa_slope: fewer than three points above h_min");
  const LineFit line = fit_line(x, y);
  const double c = Constants::G0 / (2.0 * std::numbers::pi);
  AaSlopeFit f;
  f.n_points = x.size();
  f.slope = line.slope;
  f.intercept = line.intercept;
  f.F = -line.slope / c;
  f.F_err = line.slope_se / c;
  f.intercept_check = line.slope != 0.0 ? std::exp(-line.intercept / line.slope)
                                        : std::numeric_limits<double>::quiet_NaN();
  f.covariance << line.slope_se * line.slope_se, line.cov_slope_intercept, line.cov_slope_intercept,
      line.intercept_se * line.intercept_se;
  return f;
}

}  // namespace magtrans
