#pragma once

/// \file
/// Synthetic field sweeps from ground-truth sample parameters, with
/// electron-temperature saturation and multiplicative resistance noise.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "magtrans/hall.hpp"
#include "magtrans/models.hpp"
#include "magtrans/sweep.hpp"

namespace magtrans {

/// T_eff = sqrt(T_bath^2 + t_sat^2).
inline double effective_temperature(double T_bath, double t_sat) {
  detail::require(detail::positive_finite(T_bath) && detail::positive_finite(t_sat),
                  "effective_temperature: inputs must be positive");
  return std::hypot(T_bath, t_sat);
}

/// Maps (T_bath, t_sat) to the electron temperature.
using SaturationLaw = std::function<double(double, double)>;

/// Electrons at the bath temperature; t_sat is ignored.
inline double no_saturation(double T_bath, double /*t_sat*/) {
  detail::require(detail::positive_finite(T_bath), "no_saturation: bath temperature must be positive");
  return T_bath;
}

struct CoherenceLaw {
  double amplitude = 0.0;  // m, at 1 K
  double exponent = 0.0;

  double at(double T) const { return amplitude * std::pow(T, exponent); }
};

struct SweepPlanEntry {
  double T_bath = 0.0;     // K
  double theta_deg = 0.0;  // 0 or 90
  std::vector<double> B;   // T
};

struct SynthConfig {
  std::string sample_id = "synth";
  double n_2d = 0.0;   // 1/m^2
  double mu = 0.0;     // m^2/(V s)
  double delta = 0.0;  // m
  double F = 0.0;
  double g_factor = Constants::g_factor;
  CoherenceLaw l_phi_law;
  double t_sat = 0.0;  // K
  SaturationLaw saturation = effective_temperature;
  double relative_sigma = 0.0;
  std::uint64_t seed = 0;
  std::vector<SweepPlanEntry> sweep_plan;
  Geometry geometry;
  double current = 1e-9;  // A, recorded only

  double sigma0() const { return n_2d * Constants::e * mu; }
  double l_mfp() const { return mean_free_path(n_2d, mu); }
};

inline constexpr double kMaxApparatusField = 2.0;   // T
inline constexpr double kMinBathTemperature = 0.03;  // K

inline void validate(const SynthConfig& c) {
  auto bad = [](const std::string& what) { throw InputError("synth config: " + what); };
  if (!valid_sample_id(c.sample_id)) bad("sample_id must be a plain name without commas, slashes or newlines");
  if (!detail::positive_finite(c.n_2d) || !detail::positive_finite(c.mu)) bad("n_2d and mu must be positive");
  if (!detail::positive_finite(c.delta)) bad("delta must be positive");
  if (!std::isfinite(c.F)) bad("F must be finite");
  if (!detail::positive_finite(c.l_phi_law.amplitude)) bad("coherence amplitude must be positive");
  if (!(c.l_phi_law.exponent < 0.0)) bad("coherence exponent must be negative");
  if (!(c.relative_sigma >= 0.0) || !std::isfinite(c.relative_sigma)) bad("relative_sigma must be >= 0");
  if (!c.saturation) bad("no saturation law");
  if (c.sweep_plan.empty()) bad("empty sweep plan");
  validate(c.geometry);
  for (const auto& e : c.sweep_plan) {
    if (!(e.T_bath >= kMinBathTemperature) || !std::isfinite(e.T_bath))
      bad("bath temperature below the 0.03 K base temperature");
    orientation_from_degrees(e.theta_deg);
    if (e.B.empty()) bad("empty field grid");
    for (double b : e.B)
      if (!std::isfinite(b) || std::abs(b) > kMaxApparatusField) bad("field outside the +-2 T magnet range");
  }
}

/// Noise-free sheet conductance of one plan entry at each field point.
inline std::vector<double> synth_sigma(const SynthConfig& cfg, const SweepPlanEntry& e) {
  const double T_eff = cfg.saturation(e.T_bath, cfg.t_sat);
  if (!detail::positive_finite(T_eff)) throw DomainError("synth: effective temperature is not positive");
  const double l_mfp = cfg.l_mfp();
  const double l_phi = cfg.l_phi_law.at(T_eff);
  const WlParams wl{l_phi, l_mfp};
  const InPlaneParams ip{gamma_param(cfg.delta, cfg.n_2d, l_phi, l_mfp)};
  const AaParams aa{cfg.F, cfg.g_factor};
  const Orientation o = orientation_from_degrees(e.theta_deg);
  std::vector<double> sigma(e.B.size());
  for (std::size_t i = 0; i < e.B.size(); ++i) {
    sigma[i] = cfg.sigma0() + total_delta_sigma(std::abs(e.B[i]), o, T_eff, wl, ip, aa);
    if (!(sigma[i] > 0.0)) throw DomainError("synth: non-positive conductance (unphysical configuration)");
  }
  return sigma;
}

/// One sweep of the plan. The generator is seeded by (cfg.seed, index), so
/// sweeps are reproducible independently of each other.
inline SweepRecord generate_sweep(const SynthConfig& cfg, std::size_t index) {
  if (index >= cfg.sweep_plan.size()) throw InputError("generate_sweep: plan index out of range");
  const auto& e = cfg.sweep_plan[index];
  const auto sigma = synth_sigma(cfg, e);

  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto noisy = [&](double v) { return cfg.relative_sigma > 0.0 ? v * (1.0 + cfg.relative_sigma * normal(rng)) : v; };

  const bool hall = orientation_from_degrees(e.theta_deg) == Orientation::Perpendicular;
  const double squares = cfg.geometry.length / cfg.geometry.width;
  SweepRecord s{cfg.sample_id, e.T_bath, e.theta_deg, e.B, {}, {}, cfg.current};
  for (std::size_t i = 0; i < e.B.size(); ++i) {
    s.R_xx.push_back(noisy(squares / sigma[i]));
    // An in-plane field produces no Hall voltage; that column stays empty.
    s.R_xy.push_back(hall ? noisy(e.B[i] / (cfg.n_2d * Constants::e)) : std::numeric_limits<double>::quiet_NaN());
  }
  return s;
}

inline std::vector<SweepRecord> generate_dataset(const SynthConfig& cfg) {
  validate(cfg);
  std::vector<SweepRecord> out;
  for (std::size_t i = 0; i < cfg.sweep_plan.size(); ++i) out.push_back(generate_sweep(cfg, i));
  return out;
}

/// n evenly spaced values from lo to hi inclusive.
inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n < 2) throw InputError("linspace: need at least two points");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  v.back() = hi;
  return v;
}

/// Perpendicular and in-plane sweeps over the same grid at every temperature.
inline std::vector<SweepPlanEntry> paired_plan(const std::vector<double>& temperatures, const std::vector<double>& B) {
  std::vector<SweepPlanEntry> plan;
  for (double T : temperatures) {
    plan.push_back({T, 0.0, B});
    plan.push_back({T, 90.0, B});
  }
  return plan;
}

}  // namespace magtrans
