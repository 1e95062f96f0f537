#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"

using namespace magtrans;
namespace mt = magtrans::testing;

namespace {
constexpr double G0 = Constants::G0;
constexpr double pi = std::numbers::pi;
}  // namespace

TEST(CharacteristicFields, TableValues) {
  EXPECT_NEAR(phase_breaking_field(22.4e-9), 0.328, 0.0005);
  EXPECT_NEAR(phase_breaking_field(86e-9), 2.22e-2, 0.00005);
  EXPECT_NEAR(elastic_field(2.01e-9), 81.5, 0.05);
  EXPECT_NEAR(elastic_field(11.7e-9), 2.40, 0.005);
}

TEST(CharacteristicFields, QuadraticScalingAndErrors) {
  EXPECT_NEAR(phase_breaking_field(2 * 35e-9), phase_breaking_field(35e-9) / 4, 1e-18);
  EXPECT_NEAR(elastic_field(2 * 3e-9), elastic_field(3e-9) / 4, 1e-15);
  EXPECT_THROW(phase_breaking_field(0.0), DomainError);
  EXPECT_THROW(elastic_field(-1e-9), DomainError);
}

TEST(WlPerp, ZeroFieldAndSaturationLimits) {
  const WlParams p{22.4e-9, 2.01e-9};
  EXPECT_EQ(wl_perp(0.0, p), 0.0);
  EXPECT_LT(std::abs(wl_perp(1e-6, p)), 1e-9 * G0);
  const double plateau = G0 / pi * std::log(2.0 * std::pow(p.l_phi / p.l_mfp, 2));
  // the gap closes as (G0/pi) psi'(1/2) (B_l - B_phi) / B
  double prev_gap = plateau;
  for (double B : mt::log_grid(1e2, 1e12, 41)) {
    const double gap = plateau - wl_perp(B, p);
    EXPECT_GT(gap, 0.0);
    EXPECT_LT(gap, prev_gap);
    prev_gap = gap;
  }
  const double B = 1e8;
  const double leading = G0 / pi * (pi * pi / 2) * (elastic_field(p.l_mfp) - phase_breaking_field(p.l_phi)) / B;
  EXPECT_NEAR((plateau - wl_perp(B, p)) / leading, 1.0, 1e-4);
  EXPECT_LT(plateau - wl_perp(1e12, p), 1e-9 * G0);
  EXPECT_THROW(wl_perp(-0.1, p), DomainError);
}

TEST(WlPerp, MatchesDirectEvaluation) {
  for (const auto& r : mt::kTable) {
    for (double B : {0.01, 0.3, 2.0}) {
      const double ref = mt::wl_perp_ref(B, r.l_phi(), r.l());
      EXPECT_NEAR(wl_perp(B, {r.l_phi(), r.l()}), ref, 1e-12 * std::abs(ref)) << "row " << r.id << " B " << B;
    }
  }
}

TEST(WlPerp, IncreasingAndSaturatingOnRandomDraws) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> lmfp(1e-9, 20e-9), ratio(1.5, 100.0);
  const auto grid = mt::log_grid(1e-4, 1e4, 200);
  for (int k = 0; k < 100; ++k) {
    const double l = lmfp(rng);
    const WlParams p{l * ratio(rng), l};
    const double plateau = G0 / pi * std::log(2.0 * std::pow(p.l_phi / p.l_mfp, 2));
    double prev = 0.0, prev_gap = std::abs(plateau);
    for (double B : grid) {
      const double v = wl_perp(B, p);
      EXPECT_GT(v, prev);
      EXPECT_LE(std::abs(plateau - v), prev_gap);
      prev = v;
      prev_gap = std::abs(plateau - v);
    }
  }
}

TEST(WlPerp, DiagnosticPrefactorScales) {
  const WlParams p{35.5e-9, 2.97e-9};
  EXPECT_DOUBLE_EQ(wl_perp(0.7, p, DiagnosticPrefactor{1.3}), 1.3 * wl_perp(0.7, p));
}

TEST(WlInPlane, Examples) {
  EXPECT_EQ(wl_inplane(0.0, {0.3}), 0.0);
  for (double B : {0.1, 1.0, 2.0}) EXPECT_EQ(wl_inplane(B, {0.0}), 0.0);
  EXPECT_NEAR(wl_inplane(2.0, {2.51e-3}), G0 / pi * std::log(1.01004), 1e-20);
  EXPECT_THROW(wl_inplane(1.0, {-1e-3}), DomainError);
}

TEST(Gamma, TableExampleAndScalings) {
  const double n = 1.18e17, lp = 22.4e-9, l = 2.01e-9;
  const double g = gamma_param(0.65e-9, n, lp, l);
  EXPECT_NEAR(g, 2.51e-3, 0.005e-3);
  EXPECT_NEAR(gamma_param(1.3e-9, n, lp, l), 4 * g, 1e-15);
  EXPECT_NEAR(gamma_param(0.65e-9, 4 * n, lp, l), g / 2, 1e-15);
  EXPECT_NEAR(thickness_from_gamma(g, n, lp, l), 0.65e-9, 1e-12 * 0.65e-9);
  EXPECT_EQ(thickness_from_gamma(0.0, n, lp, l), 0.0);
  EXPECT_THROW(gamma_param(0.0, n, lp, l), DomainError);
  EXPECT_THROW(thickness_from_gamma(-1.0, n, lp, l), DomainError);
}

TEST(Gamma, MutualInverseOnRandomDraws) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const double delta = 0.1e-9 + 20e-9 * u(rng);
    const double n = 1e16 * std::pow(100.0, u(rng));
    const double l = 1e-9 + 20e-9 * u(rng);
    const double lp = l * (1.0 + 50.0 * u(rng));
    const double back = thickness_from_gamma(gamma_param(delta, n, lp, l), n, lp, l);
    ASSERT_NEAR(back / delta, 1.0, 1e-12);
  }
}

TEST(Gamma, RowSevenThicknessRoundTrip) {
  const auto& r = mt::row(7);
  const double g = gamma_param(r.delta(), r.n(), r.l_phi(), r.l());
  const double d = thickness_from_gamma(g, r.n(), r.l_phi(), r.l());
  EXPECT_NEAR(d, 0.42e-9, 0.06e-9);
  EXPECT_NEAR(d / r.delta(), 1.0, 1e-12);
}

TEST(ReducedField, ExampleAndScaleInvariance) {
  EXPECT_NEAR(reduced_field(2.0, 0.6), 4.477, 2e-3);
  EXPECT_EQ(reduced_field(0.0, 0.6), 0.0);
  EXPECT_NEAR(reduced_field(2 * 1.3, 2 * 0.4), reduced_field(1.3, 0.4), 1e-14);
  EXPECT_THROW(reduced_field(1.0, 0.0), DomainError);
  EXPECT_THROW(reduced_field(1.0, -1.0), DomainError);
}

TEST(Zeeman, LogBranchValue) {
  const double expected = -G0 / (2 * pi) * std::log(10.0);
  EXPECT_NEAR(zeeman_aa_reduced(13.0, 1.0), expected, 1e-15 * G0);
  EXPECT_NEAR(expected / G0, -0.366468, 1e-6);
  // B chosen so that h = 13 at 0.5 K
  const double B = 13.0 * Constants::k_B * 0.5 / (2.0 * Constants::mu_B);
  EXPECT_NEAR(zeeman_aa(B, 0.5, {1.0, 2.0}), expected, 1e-12 * G0);
}

TEST(Zeeman, VanishingCases) {
  EXPECT_EQ(zeeman_aa(0.0, 0.3, {0.7, 2.0}), 0.0);
  for (double B : {0.01, 0.5, 2.0})
    for (double T : {0.04, 1.0}) EXPECT_EQ(zeeman_aa(B, T, {0.0, 2.0}), 0.0);
  EXPECT_THROW(zeeman_aa(1.0, 0.0, {0.5, 2.0}), DomainError);
}

TEST(Zeeman, SmoothAtCrossover) {
  const double hc = kZeemanCrossover;
  const double eps = 1e-6;
  const double below = zeeman_aa_reduced(hc * (1 - 1e-12), 1.0);
  const double above = zeeman_aa_reduced(hc, 1.0);
  EXPECT_NEAR(below, above, 1e-12 * G0);
  const double d_below = (zeeman_aa_reduced(hc - eps, 1.0) - zeeman_aa_reduced(hc - 2 * eps, 1.0)) / eps;
  const double d_above = (zeeman_aa_reduced(hc + 2 * eps, 1.0) - zeeman_aa_reduced(hc + eps, 1.0)) / eps;
  EXPECT_NEAR(d_below, d_above, 1e-5 * G0);
  EXPECT_LT(hc, 3.0);
}

TEST(Zeeman, ScaleInvarianceAndMonotonicity) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> b(0.0, 2.0), t(0.03, 4.0), c(0.1, 10.0);
  for (int k = 0; k < 10000; ++k) {
    const double B = b(rng), T = t(rng), s = c(rng);
    ASSERT_NEAR(zeeman_aa(B, T, {0.5, 2.0}), zeeman_aa(s * B, s * T, {0.5, 2.0}), 1e-12 * G0);
  }
  double prev = 0.0;
  for (double h : mt::log_grid(kZeemanCrossover, 1e3, 300)) {
    const double v = zeeman_aa_reduced(h, 0.5);
    if (h > kZeemanCrossover) {
      EXPECT_LT(v, prev);
    }
    prev = v;
  }
}

TEST(Total, TwoChannelsAndIsotropy) {
  const WlParams wl{35.5e-9, 2.97e-9};
  const InPlaneParams ip{1.3e-3};
  const AaParams aa{0.5, 2.0};
  EXPECT_EQ(total_delta_sigma(0.0, 0.0, 0.2, wl, ip, aa), 0.0);
  for (double B : {0.05, 0.5, 1.7}) {
    for (double T : {0.04, 0.3, 2.0}) {
      const double perp = total_delta_sigma(B, 0.0, T, wl, ip, aa);
      const double inpl = total_delta_sigma(B, pi / 2, T, wl, ip, aa);
      EXPECT_NEAR(perp - inpl, wl_perp(B, wl) - wl_inplane(B, ip), 1e-15 * G0);
      EXPECT_EQ(total_delta_sigma(B, pi / 2, T, wl, {0.0}, aa), zeeman_aa(B, T, aa));
    }
  }
  // the perpendicular-minus-in-plane difference ignores F and T
  const double ref = total_delta_sigma(1.0, Orientation::Perpendicular, 0.1, wl, ip, {0.0, 2.0}) -
                     total_delta_sigma(1.0, Orientation::InPlane, 0.1, wl, ip, {0.0, 2.0});
  const double other = total_delta_sigma(1.0, Orientation::Perpendicular, 1.5, wl, ip, {2.0, 2.0}) -
                       total_delta_sigma(1.0, Orientation::InPlane, 1.5, wl, ip, {2.0, 2.0});
  EXPECT_NEAR(ref, other, 1e-15 * G0);
}

TEST(Total, RejectsObliqueFields) {
  const WlParams wl{35.5e-9, 2.97e-9};
  EXPECT_THROW(total_delta_sigma(1.0, pi / 4, 0.3, wl, {0.0}, {0.5, 2.0}), DomainError);
  EXPECT_THROW(orientation_from_degrees(45.0), DomainError);
  EXPECT_EQ(orientation_from_degrees(90.0), Orientation::InPlane);
}
