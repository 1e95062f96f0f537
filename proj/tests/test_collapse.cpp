#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "support.hpp"

using namespace magtrans;
namespace mt = magtrans::testing;

namespace {

constexpr double G0 = Constants::G0;

std::vector<double> aa_fields() { return linspace(0.02, 2.0, 100); }

// Zeeman curves at the given bath temperatures with 1% multiplicative noise.
std::vector<AaCurve> noisy_curves(const std::vector<double>& T_bath, const SaturationLaw& law, double F,
                                  std::uint64_t seed, double rel_noise = 0.01) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<AaCurve> curves;
  for (double T : T_bath) {
    AaCurve c{T, {}, T};
    const double T_eff = law(T, 0.25);
    for (double b : aa_fields()) {
      const double v = zeeman_aa(b, T_eff, {F, 2.0});
      c.points.push_back({b, v * (1.0 + rel_noise * normal(rng))});
    }
    curves.push_back(std::move(c));
  }
  return curves;
}

std::vector<double> bath(const std::vector<AaCurve>& curves) {
  std::vector<double> t;
  for (const auto& c : curves) t.push_back(c.T_bath);
  return t;
}

const std::vector<double> kTemps{0.04, 0.08, 0.15, 0.3, 0.6, 1.0};

}  // namespace

TEST(IsolateAa, RemovesExactOrbitalPart) {
  const WlParams wl{35.5e-9, 2.97e-9};
  const InPlaneParams ip{1.3e-3};
  const AaParams aa{0.5, 2.0};
  const double T = 0.3;
  MagnetoCurve perp{T, Orientation::Perpendicular, aa_fields(), {}};
  MagnetoCurve inpl{T, Orientation::InPlane, aa_fields(), {}};
  for (double b : perp.B) perp.delta_sigma.push_back(total_delta_sigma(b, Orientation::Perpendicular, T, wl, ip, aa));
  for (double b : inpl.B) inpl.delta_sigma.push_back(total_delta_sigma(b, Orientation::InPlane, T, wl, ip, aa));
  const WlInterpolator interp({{T, wl.l_phi, ip.gamma}}, wl.l_mfp);
  const std::vector<MagnetoCurve> raw{perp, inpl};
  const auto iso = isolate_aa(raw, interp);
  ASSERT_EQ(iso.curves.size(), 1u);
  EXPECT_EQ(iso.curves[0].points.size(), 200u);
  for (const auto& p : iso.curves[0].points) EXPECT_NEAR(p.delta_sigma, zeeman_aa(p.B, T, aa), 1e-12 * G0);
}

TEST(IsolateAa, InPlaneWithoutThicknessIsIdentity) {
  MagnetoCurve inpl{0.5, Orientation::InPlane, {0.1, 0.5, 1.0}, {1e-7, -2e-7, 3e-7}};
  const WlInterpolator interp({{0.5, 40e-9, 0.0}}, 3e-9);
  const auto iso = isolate_aa(std::vector<MagnetoCurve>{inpl}, interp);
  EXPECT_EQ(iso.residues[0].delta_sigma, inpl.delta_sigma);
}

TEST(IsolateAa, RefusesUncoveredTemperatureUnlessExtrapolating) {
  MagnetoCurve c{0.05, Orientation::InPlane, {0.1, 0.5}, {0.0, 0.0}};
  const std::vector<WlAtTemperature> fits{{0.1, 40e-9, 1e-3}, {1.0, 20e-9, 1e-3}};
  EXPECT_THROW(isolate_aa(std::vector<MagnetoCurve>{c}, WlInterpolator(fits, 3e-9)), InputError);
  EXPECT_NO_THROW(isolate_aa(std::vector<MagnetoCurve>{c}, WlInterpolator(fits, 3e-9, true)));
  // log-log interpolation reproduces a power law between fitted points
  const WlInterpolator interp(fits, 3e-9);
  const double expo = std::log(20.0 / 40.0) / std::log(10.0);
  EXPECT_NEAR(interp.wl(0.3).l_phi, 40e-9 * std::pow(3.0, expo), 1e-18);
}

TEST(IsolateAa, PerpendicularAndInPlaneResiduesAgree) {
  // Isotropy of the Zeeman channel: once the true orbital parts are removed the
  // two orientations differ only by their noise. Pooled over seeds, the
  // normalized differences are unit normal.
  double chi2 = 0.0;
  std::size_t n = 0, beyond = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SynthConfig cfg;
    cfg.n_2d = 2.14e17;
    cfg.mu = 38.9e-4;
    cfg.delta = 0.42e-9;
    cfg.F = 0.5;
    cfg.l_phi_law = {35.5e-9 * std::pow(0.25, 0.31), -0.31};
    cfg.t_sat = 0.25;
    cfg.relative_sigma = 0.01;
    cfg.seed = seed;
    cfg.sweep_plan = paired_plan({0.1, 0.3, 1.0}, linspace(0.1, 2.0, 20));
    const auto sweeps = generate_dataset(cfg);
    const double squares = cfg.geometry.length / cfg.geometry.width;
    const double l_mfp = cfg.l_mfp();
    for (std::size_t k = 0; k < sweeps.size(); k += 2) {
      const auto& perp = sweeps[k];
      const auto& inpl = sweeps[k + 1];
      const double T_eff = effective_temperature(perp.T_bath, cfg.t_sat);
      const double lp = cfg.l_phi_law.at(T_eff);
      const double gamma = gamma_param(cfg.delta, cfg.n_2d, lp, l_mfp);
      for (std::size_t i = 0; i < perp.size(); ++i) {
        const double b = perp.B[i];
        const double sp = squares / perp.R_xx[i], si = squares / inpl.R_xx[i];
        const double rp = sp - cfg.sigma0() - wl_perp(b, {lp, l_mfp});
        const double ri = si - cfg.sigma0() - wl_inplane(b, {gamma});
        const double z = (rp - ri) / std::hypot(0.01 * sp, 0.01 * si);
        chi2 += z * z;
        if (std::abs(z) > 3.0) ++beyond;
        ++n;
      }
    }
  }
  // 3000 points: the mean of z^2 has standard deviation 0.026, and about 8
  // points are expected beyond 3 sigma.
  EXPECT_NEAR(chi2 / static_cast<double>(n), 1.0, 0.1);
  EXPECT_LE(beyond, 20u);
}

TEST(Dispersion, IdenticalCurvesGiveZero) {
  // Fields scaled with temperature put every curve on the same (ln h, dsigma) points.
  std::vector<AaCurve> curves;
  for (double T : {0.2, 0.4, 0.8}) {
    AaCurve c{T, {}, T};
    for (double b : linspace(0.02, 0.5, 30)) c.points.push_back({b * T / 0.2, zeeman_aa(b, 0.2, {0.5, 2.0})});
    curves.push_back(c);
  }
  EXPECT_EQ(dispersion(curves, bath(curves)), 0.0);
}

TEST(Dispersion, QuadraticInShift) {
  std::vector<AaCurve> curves;
  for (double T : {0.2, 0.4, 0.8}) {
    AaCurve c{T, {}, T};
    for (double b : linspace(0.02, 0.5, 30)) c.points.push_back({b * T / 0.2, zeeman_aa(b, 0.2, {0.5, 2.0})});
    curves.push_back(c);
  }
  auto shifted = [&](double s) {
    auto cs = curves;
    for (auto& p : cs[1].points) p.delta_sigma += s * G0;
    return dispersion(cs, bath(cs));
  };
  EXPECT_GT(shifted(0.1), 0.0);
  const double d1 = shifted(1e-4), d2 = shifted(2e-4), d4 = shifted(4e-4);
  EXPECT_GT(d1, 0.0);
  EXPECT_NEAR(d2 / d1, 4.0, 1e-6);
  EXPECT_NEAR(d4 / d1, 16.0, 1e-6);
}

TEST(Dispersion, PermutationInvariant) {
  auto curves = noisy_curves(kTemps, effective_temperature, 0.5, 3);
  std::vector<double> t;
  for (double T : kTemps) t.push_back(effective_temperature(T, 0.25) * 1.01);
  const double ref = dispersion(curves, t);
  std::vector<std::size_t> perm(curves.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(5);
  for (int k = 0; k < 10; ++k) {
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<AaCurve> pc;
    std::vector<double> pt;
    for (auto i : perm) {
      pc.push_back(curves[i]);
      pt.push_back(t[i]);
    }
    EXPECT_EQ(dispersion(pc, pt), ref);
  }
}

TEST(Dispersion, GaugeInvariance) {
  // Scaling every temperature and every field by the same factor leaves h alone.
  const auto curves = noisy_curves(kTemps, effective_temperature, 0.5, 9);
  std::vector<double> t;
  for (double T : kTemps) t.push_back(effective_temperature(T, 0.25));
  const double c = 1.7;
  auto scaled = curves;
  std::vector<double> ts;
  for (auto& cv : scaled) {
    cv.T_bath *= c;
    for (auto& p : cv.points) p.B *= c;
  }
  for (double v : t) ts.push_back(c * v);
  EXPECT_NEAR(dispersion(scaled, ts), dispersion(curves, t), 1e-9 * dispersion(curves, t));
}

TEST(Dispersion, NoOverlapIsAnError) {
  std::vector<AaCurve> curves;
  // h ranges [0.1, 0.2] and [10, 20] never meet
  curves.push_back({1.0, {{0.07, -1e-6}, {0.1, -2e-6}, {0.15, -3e-6}}, 1.0});
  curves.push_back({0.01, {{0.07, -1e-5}, {0.1, -2e-5}, {0.15, -3e-5}}, 0.01});
  EXPECT_THROW(dispersion(curves, bath(curves)), CollapseError);
  EXPECT_THROW(dispersion(std::vector<AaCurve>{curves[0]}, std::vector<double>{1.0}), CollapseError);
}

TEST(Dispersion, EveryCurveMustOverlap) {
  // two curves collapse well; a third moved far away would otherwise drop out
  // of the cost unnoticed
  auto curves = noisy_curves({0.3, 0.6, 1.0}, no_saturation, 0.5, 5);
  std::vector<double> t = bath(curves);
  EXPECT_NO_THROW(dispersion(curves, t));
  t[1] *= 1e6;
  EXPECT_THROW(dispersion(curves, t), CollapseError);
}

TEST(CollapseTeff, IdentityRecovery) {
  const auto curves = noisy_curves(kTemps, no_saturation, 0.5, 21);
  const auto r = collapse_teff(curves, hottest(curves));
  for (std::size_t i = 0; i < curves.size(); ++i)
    EXPECT_NEAR(r.t_eff[i] / curves[i].T_bath, 1.0, 0.01) << "T " << curves[i].T_bath;
  EXPECT_EQ(r.t_eff[hottest(curves)], 1.0);
}

TEST(CollapseTeff, SaturatingTemperatures) {
  const auto curves = noisy_curves(kTemps, effective_temperature, 0.5, 22);
  const auto r = collapse_teff(curves, hottest(curves));
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const double truth = effective_temperature(curves[i].T_bath, 0.25);
    EXPECT_NEAR(r.t_eff[i] / truth, 1.0, 0.05) << "T " << curves[i].T_bath;
    if (i != r.anchor) {
      EXPECT_GT(r.t_eff_err[i], 0.0);
      EXPECT_TRUE(std::isfinite(r.t_eff_err[i]));
    }
  }
  EXPECT_NEAR(r.aa.F / 0.5, 1.0, 0.02);
  EXPECT_GE(r.dispersion, 0.0);
  EXPECT_LE(r.dispersion, r.dispersion_bath);
  // effective temperatures fall with the bath temperature, down to saturation
  for (std::size_t i = 1; i < curves.size(); ++i) EXPECT_LE(r.t_eff[i - 1], r.t_eff[i] * 1.01);
}

TEST(CollapseTeff, RatiosIndependentOfAnchor) {
  const auto curves = noisy_curves(kTemps, effective_temperature, 0.5, 23);
  const auto a = collapse_teff(curves, 5);
  const auto b = collapse_teff(curves, 4);
  for (std::size_t i = 0; i < curves.size(); ++i)
    EXPECT_NEAR((a.t_eff[i] / a.t_eff[5]) / (b.t_eff[i] / b.t_eff[5]), 1.0, 0.02) << "T " << curves[i].T_bath;
}

TEST(CollapseTeff, Errors) {
  const auto curves = noisy_curves({0.1, 0.3}, no_saturation, 0.5, 1);
  EXPECT_THROW(collapse_teff(curves, 0), CollapseError);
  const auto three = noisy_curves({0.1, 0.3, 1.0}, no_saturation, 0.5, 1);
  EXPECT_THROW(collapse_teff(three, 3), InputError);
}
