#pragma once

/// \file
/// End-to-end analysis of one sample: Hall density and mobility, the
/// weak-localization difference fit at every paired temperature, the
/// coherence power law, isolation of the Zeeman channel and its
/// effective-temperature collapse. A stage that fails is recorded and the
/// stages depending on it are skipped.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "magtrans/collapse.hpp"
#include "magtrans/fit.hpp"
#include "magtrans/hall.hpp"
#include "magtrans/models.hpp"
#include "magtrans/sweep.hpp"
#include "magtrans/synth.hpp"

#ifndef MAGTRANS_VERSION
#define MAGTRANS_VERSION "0.1.0"
#endif

namespace magtrans {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = MAGTRANS_VERSION;

struct AnalysisConfig {
  double g_factor = Constants::g_factor;
  double T_c = 0.3;    // K, power law uses T > T_c
  double h_min = kDefaultHMin;
  double fit_min = 0.0;  // T, WL fit window on |B|
  double fit_max = 2.0;  // T
  double kappa = kDefaultKappa;  // 1/m
  std::optional<double> anchor_T;  // K; hottest curve when empty
  bool extrapolate = false;        // allow isolating AA outside the fitted T range
  Geometry geometry;
};

inline void validate(const AnalysisConfig& c) {
  auto bad = [](const std::string& what) { throw InputError("analysis config: " + what); };
  if (!detail::positive_finite(c.g_factor)) bad("g must be positive");
  if (!(c.T_c >= 0.0) || !std::isfinite(c.T_c)) bad("T_c must be non-negative");
  if (!detail::positive_finite(c.h_min)) bad("h_min must be positive");
  if (!(c.fit_min >= 0.0 && c.fit_max > c.fit_min) || !std::isfinite(c.fit_max))
    bad("fit window must satisfy 0 <= Bmin < Bmax");
  if (!detail::positive_finite(c.kappa)) bad("kappa must be positive");
  if (c.anchor_T && !detail::positive_finite(*c.anchor_T)) bad("anchor temperature must be positive");
  validate(c.geometry);
}

struct InputSource {
  std::string path;
  std::string hash;  // FNV-1a 64 of the file bytes
};

struct Dataset {
  std::string sample_id;
  std::vector<SweepRecord> sweeps;
  AnalysisConfig config;
  std::vector<InputSource> sources;
  std::vector<std::string> warnings;
};

enum class StageStatus { Ok, Skipped, Error, NotRequested };

inline const char* to_string(StageStatus s) {
  switch (s) {
    case StageStatus::Ok: return "ok";
    case StageStatus::Skipped: return "skipped";
    case StageStatus::Error: return "error";
    case StageStatus::NotRequested: return "not requested";
  }
  return "?";
}

struct StageState {
  StageStatus status = StageStatus::NotRequested;
  std::string message;
  bool ok() const { return status == StageStatus::Ok; }
};

/// Zero-field conductance of one sweep.
struct Baseline {
  double value = 0.0;  // S
  double error = 0.0;
  std::string method;  // "B=0 point" or "quadratic extrapolation"
};

struct SweepBaseline {
  double T_bath = 0.0;
  double theta_deg = 0.0;
  Baseline baseline;
};

struct HallStage {
  StageState state;
  double T_bath = 0.0;
  Estimate n_2d, mu, sigma_xx, l_mfp, k_f, kf_l, r_s;
};

struct WlRow {
  double T_bath = 0.0;
  WlDifferenceFit fit;
  std::vector<double> B, difference, model;
};

struct WlStage {
  StageState state;
  std::vector<WlRow> rows;  // ascending T
  Estimate delta;           // combined over temperatures
  Estimate l_phi_lowest;    // at the lowest fitted temperature
};

struct PowerLawStage {
  StageState state;
  PowerLawFit fit;
};

struct CollapseStage {
  StageState state;
  std::vector<AaCurve> curves;  // ascending T_bath, T_eff filled in
  std::size_t anchor = 0;
  CollapseResult result;
};

struct Report {
  std::string sample_id;
  HallStage hall;
  WlStage wl;
  PowerLawStage powerlaw;
  CollapseStage collapse;
  std::vector<SweepBaseline> baselines;
  AnalysisConfig config;
  std::vector<InputSource> sources;
  std::vector<std::string> warnings;

  bool has_error() const {
    return hall.state.status == StageStatus::Error || wl.state.status == StageStatus::Error ||
           powerlaw.state.status == StageStatus::Error || collapse.state.status == StageStatus::Error;
  }
};

/// How far run_analysis goes.
enum class StageLimit { Hall, Wl, Collapse, All };

namespace detail {

inline std::vector<double> sheet_sigma(const SweepRecord& s, const Geometry& g) {
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = sheet_conductivity(s.R_xx[i], g.length, g.width);
  return out;
}

// Intercept and its standard error of a least-squares quadratic in B.
inline std::pair<double, double> quadratic_intercept(const std::vector<double>& B, const std::vector<double>& y) {
  const auto m = static_cast<Eigen::Index>(B.size());
  Eigen::MatrixXd X(m, 3);
  Eigen::VectorXd Y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = B[static_cast<std::size_t>(i)];
    X(i, 2) = B[static_cast<std::size_t>(i)] * B[static_cast<std::size_t>(i)];
    Y[i] = y[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector3d c = X.colPivHouseholderQr().solve(Y);
  if (m <= 3) return {c[0], 0.0};
  const double s2 = (X * c - Y).squaredNorm() / static_cast<double>(m - 3);
  const Eigen::Matrix3d cov = (X.transpose() * X).inverse() * s2;
  return {c[0], std::sqrt(std::max(cov(0, 0), 0.0))};
}

// Indices of the k smallest |B|.
inline std::vector<std::size_t> lowest_field(const std::vector<double>& B, std::size_t k) {
  std::vector<std::size_t> idx(B.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return std::abs(B[a]) < std::abs(B[b]); });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

}  // namespace detail

/// sigma(B = 0): the measured point when the grid contains B = 0, otherwise
/// the exact quadratic through the three lowest-|B| points. The error is the
/// intercept error of a quadratic fit to the nine lowest-|B| points.
inline Baseline zero_field_baseline(const std::vector<double>& B, const std::vector<double>& sigma) {
  if (B.size() != sigma.size() || B.size() < 3) throw InputError("zero_field_baseline: need three or more points");
  Baseline out;
  auto pick = [&](std::size_t k) {
    std::vector<double> b, y;
    for (auto i : detail::lowest_field(B, k)) {
      b.push_back(B[i]);
      y.push_back(sigma[i]);
    }
    return std::pair{b, y};
  };
  const auto zero = std::find(B.begin(), B.end(), 0.0);
  if (zero != B.end()) {
    out.value = sigma[static_cast<std::size_t>(zero - B.begin())];
    out.method = "B=0 point";
  } else {
    const auto [b, y] = pick(3);
    if (std::abs(b[0] - b[1]) == 0.0 || std::abs(b[0] - b[2]) == 0.0 || std::abs(b[1] - b[2]) == 0.0)
      throw InputError("zero_field_baseline: repeated field values near B = 0");
    out.value = detail::quadratic_intercept(b, y).first;
    out.method = "quadratic extrapolation";
  }
  if (B.size() > 3) {
    const auto [b, y] = pick(9);
    out.error = detail::quadratic_intercept(b, y).second;
  }
  return out;
}

namespace detail {

inline bool same_temperature(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(a, b); }

// Field-folded curve: mean over points sharing |B|, sorted by |B|.
inline std::vector<std::pair<double, double>> fold(const std::vector<double>& B, const std::vector<double>& y) {
  std::map<double, std::pair<double, int>> acc;
  for (std::size_t i = 0; i < B.size(); ++i) {
    auto& a = acc[std::abs(B[i])];
    a.first += y[i];
    ++a.second;
  }
  std::vector<std::pair<double, double>> out;
  for (const auto& [b, a] : acc) out.emplace_back(b, a.first / a.second);
  return out;
}

inline std::optional<double> interpolate(const std::vector<std::pair<double, double>>& c, double x) {
  if (c.empty() || x < c.front().first || x > c.back().first) return std::nullopt;
  auto it = std::lower_bound(c.begin(), c.end(), x, [](const auto& p, double v) { return p.first < v; });
  if (it->first == x) return it->second;
  const auto& hi = *it;
  const auto& lo = *std::prev(it);
  return lo.second + (x - lo.first) / (hi.first - lo.first) * (hi.second - lo.second);
}

inline Estimate combine(const std::vector<Estimate>& v) {
  if (v.empty()) return {};
  const bool weighted = std::all_of(v.begin(), v.end(), [](const Estimate& e) { return e.std_error > 0.0; });
  if (weighted) {
    double sw = 0.0, swx = 0.0;
    for (const auto& e : v) {
      const double w = 1.0 / (e.std_error * e.std_error);
      sw += w;
      swx += w * e.value;
    }
    return {swx / sw, 1.0 / std::sqrt(sw)};
  }
  double mean = 0.0;
  for (const auto& e : v) mean += e.value;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (const auto& e : v) ss += (e.value - mean) * (e.value - mean);
  const double se = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size())) : 0.0;
  return {mean, se};
}

}  // namespace detail

inline Report run_analysis(const Dataset& ds, StageLimit limit = StageLimit::All) {
  Report rep;
  rep.sample_id = ds.sample_id;
  rep.config = ds.config;
  rep.sources = ds.sources;
  rep.warnings = ds.warnings;
  const AnalysisConfig& cfg = ds.config;
  validate(cfg);

  // Zero-field baselines and conductance changes for every sweep.
  struct Prepared {
    const SweepRecord* sweep;
    Orientation orientation;
    std::vector<double> sigma;
    Baseline baseline;
  };
  std::vector<Prepared> prepared;
  for (const auto& s : ds.sweeps) {
    Prepared p{&s, orientation_from_degrees(s.theta_deg), detail::sheet_sigma(s, cfg.geometry), {}};
    p.baseline = zero_field_baseline(s.B, p.sigma);
    rep.baselines.push_back({s.T_bath, s.theta_deg, p.baseline});
    prepared.push_back(std::move(p));
  }

  auto skip_rest = [&](StageState& st, const std::string& why) {
    st.status = StageStatus::Skipped;
    st.message = why;
  };

  // Hall: hottest perpendicular sweep that carries R_xy.
  const Prepared* hall_src = nullptr;
  for (const auto& p : prepared)
    if (p.orientation == Orientation::Perpendicular && p.sweep->has_hall() &&
        (!hall_src || p.sweep->T_bath > hall_src->sweep->T_bath))
      hall_src = &p;
  double n_2d = 0.0, l_mfp = 0.0;
  try {
    if (!hall_src) throw InputError("no perpendicular sweep with Hall data (R_xy)");
    HallSweep hs{hall_src->sweep->B, hall_src->sweep->R_xy, hall_src->sweep->R_xx, hall_src->sweep->T_bath,
                 cfg.geometry};
    const Estimate n = density_from_hall(hs);
    const Baseline& b = hall_src->baseline;
    const SamplePhysics phys = derive_sample_physics(n.value, mobility(n.value, b.value), cfg.kappa);
    const DerivedUncertainty u = propagate_relative(n.std_error / n.value, b.error / b.value);
    auto& h = rep.hall;
    h.T_bath = hs.T_bath;
    h.n_2d = n;
    h.sigma_xx = {b.value, b.error};
    h.mu = {phys.mu, phys.mu * u.mu};
    h.l_mfp = {phys.l_mfp, phys.l_mfp * u.l_mfp};
    h.k_f = {phys.k_f, phys.k_f * u.k_f};
    h.kf_l = {phys.kf_l, phys.kf_l * u.kf_l};
    h.r_s = {phys.r_s, phys.r_s * u.r_s};
    h.state.status = StageStatus::Ok;
    n_2d = phys.n_2d;
    l_mfp = phys.l_mfp;
  } catch (const std::exception& e) {
    rep.hall.state = {StageStatus::Error, e.what()};
  }

  if (limit == StageLimit::Hall) return rep;

  // Weak localization at every temperature with both orientations.
  if (!rep.hall.state.ok()) {
    skip_rest(rep.wl.state, "requires the hall stage");
  } else {
    std::vector<std::pair<const Prepared*, const Prepared*>> pairs;
    for (const auto& p : prepared) {
      if (p.orientation != Orientation::Perpendicular) continue;
      if (std::any_of(pairs.begin(), pairs.end(),
                      [&](auto& q) { return detail::same_temperature(q.first->sweep->T_bath, p.sweep->T_bath); }))
        continue;
      for (const auto& q : prepared)
        if (q.orientation == Orientation::InPlane && detail::same_temperature(q.sweep->T_bath, p.sweep->T_bath)) {
          pairs.emplace_back(&p, &q);
          break;
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](auto& a, auto& b) { return a.first->sweep->T_bath < b.first->sweep->T_bath; });
    if (pairs.empty()) {
      skip_rest(rep.wl.state, "no temperature with both perpendicular and in-plane sweeps");
    } else {
      try {
        std::vector<Estimate> deltas;
        for (const auto& [perp, inpl] : pairs) {
          std::vector<double> dperp(perp->sigma.size()), dinpl(inpl->sigma.size());
          for (std::size_t i = 0; i < dperp.size(); ++i) dperp[i] = perp->sigma[i] - perp->baseline.value;
          for (std::size_t i = 0; i < dinpl.size(); ++i) dinpl[i] = inpl->sigma[i] - inpl->baseline.value;
          const auto pf = detail::fold(perp->sweep->B, dperp);
          const auto ipf = detail::fold(inpl->sweep->B, dinpl);
          WlRow row;
          row.T_bath = perp->sweep->T_bath;
          for (const auto& [b, y] : pf) {
            if (b < cfg.fit_min || b > cfg.fit_max) continue;
            if (auto yi = detail::interpolate(ipf, b)) {
              row.B.push_back(b);
              row.difference.push_back(y - *yi);
            }
          }
          row.fit = fit_wl_difference(row.B, row.difference, l_mfp, n_2d);
          for (double b : row.B) row.model.push_back(wl_difference_model(b, row.fit.l_phi, row.fit.gamma, l_mfp));
          deltas.push_back({row.fit.delta, row.fit.delta_err});
          rep.wl.rows.push_back(std::move(row));
        }
        rep.wl.delta = detail::combine(deltas);
        rep.wl.l_phi_lowest = {rep.wl.rows.front().fit.l_phi, rep.wl.rows.front().fit.l_phi_err};
        rep.wl.state.status = StageStatus::Ok;
      } catch (const std::exception& e) {
        rep.wl.state = {StageStatus::Error, e.what()};
      }
    }
  }

  // Coherence power law above the saturation temperature.
  if (!rep.wl.state.ok()) {
    skip_rest(rep.powerlaw.state, "requires the wl stage");
  } else {
    std::vector<double> T, lp;
    for (const auto& r : rep.wl.rows) {
      T.push_back(r.T_bath);
      lp.push_back(r.fit.l_phi);
    }
    select_above(cfg.T_c, T, lp);
    if (T.size() < 3) {
      skip_rest(rep.powerlaw.state, "fewer than three fitted temperatures above T_c");
    } else {
      try {
        rep.powerlaw.fit = fit_coherence_power_law(T, lp);
        rep.powerlaw.state.status = StageStatus::Ok;
      } catch (const std::exception& e) {
        rep.powerlaw.state = {StageStatus::Error, e.what()};
      }
    }
  }

  if (limit == StageLimit::Wl) return rep;

  // Zeeman channel: subtract the fitted orbital terms, then collapse.
  if (!rep.wl.state.ok()) {
    skip_rest(rep.collapse.state, "requires the wl stage");
    return rep;
  }
  std::vector<WlAtTemperature> fits;
  for (const auto& r : rep.wl.rows) fits.push_back({r.T_bath, r.fit.l_phi, r.fit.gamma});
  std::vector<MagnetoCurve> raw;
  for (const auto& p : prepared) {
    const bool fitted = std::any_of(fits.begin(), fits.end(),
                                    [&](auto& f) { return detail::same_temperature(f.T, p.sweep->T_bath); });
    if (!fitted && !cfg.extrapolate) continue;
    MagnetoCurve c{p.sweep->T_bath, p.orientation, {}, {}};
    for (std::size_t i = 0; i < p.sigma.size(); ++i) {
      c.B.push_back(std::abs(p.sweep->B[i]));
      c.delta_sigma.push_back(p.sigma[i] - p.baseline.value);
    }
    raw.push_back(std::move(c));
  }
  try {
    const WlInterpolator interp(fits, l_mfp, cfg.extrapolate);
    IsolatedAa iso = isolate_aa(raw, interp);
    if (iso.curves.size() < 3) {
      skip_rest(rep.collapse.state, "fewer than three temperatures for the collapse");
      return rep;
    }
    std::size_t anchor = hottest(iso.curves);
    if (cfg.anchor_T) {
      auto it = std::find_if(iso.curves.begin(), iso.curves.end(),
                             [&](const AaCurve& c) { return std::abs(c.T_bath - *cfg.anchor_T) <= 1e-6 * c.T_bath; });
      if (it == iso.curves.end())
        throw InputError("anchor temperature " + std::to_string(*cfg.anchor_T) + " K matches no curve");
      anchor = static_cast<std::size_t>(it - iso.curves.begin());
    }
    CollapseOptions opt;
    opt.g_factor = cfg.g_factor;
    opt.h_min = cfg.h_min;
    auto& cs = rep.collapse;
    cs.result = collapse_teff(iso.curves, anchor, opt);
    cs.anchor = anchor;
    cs.curves = std::move(iso.curves);
    for (std::size_t i = 0; i < cs.curves.size(); ++i) cs.curves[i].T_eff = cs.result.t_eff[i];
    cs.state.status = StageStatus::Ok;
  } catch (const std::exception& e) {
    rep.collapse.state = {StageStatus::Error, e.what()};
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Configuration files

inline AnalysisConfig analysis_config_from_json(const Json& j, AnalysisConfig c = {}) {
  static const std::vector<std::string> known{"g", "T_c_K", "h_min", "fit_window_T", "kappa_per_nm",
                                              "anchor_K", "extrapolate", "geometry"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw InputError("analysis config: unknown key '" + key + "'");
  try {
    if (j.contains("g")) c.g_factor = j.at("g").get<double>();
    if (j.contains("T_c_K")) c.T_c = j.at("T_c_K").get<double>();
    if (j.contains("h_min")) c.h_min = j.at("h_min").get<double>();
    if (j.contains("fit_window_T")) {
      const auto& w = j.at("fit_window_T");
      if (!w.is_array() || w.size() != 2) throw InputError("analysis config: fit_window_T must be [Bmin, Bmax]");
      c.fit_min = w[0].get<double>();
      c.fit_max = w[1].get<double>();
    }
    if (j.contains("kappa_per_nm")) c.kappa = j.at("kappa_per_nm").get<double>() * 1e9;
    if (j.contains("anchor_K")) {
      if (j.at("anchor_K").is_null())
        c.anchor_T.reset();
      else
        c.anchor_T = j.at("anchor_K").get<double>();
    }
    if (j.contains("extrapolate")) c.extrapolate = j.at("extrapolate").get<bool>();
    if (j.contains("geometry")) {
      const auto& g = j.at("geometry");
      if (g.contains("L_m")) c.geometry.length = g.at("L_m").get<double>();
      if (g.contains("W_m")) c.geometry.width = g.at("W_m").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("analysis config: ") + e.what());
  }
  validate(c);
  return c;
}

inline Json to_json(const AnalysisConfig& c) {
  Json j;
  j["g"] = c.g_factor;
  j["T_c_K"] = c.T_c;
  j["h_min"] = c.h_min;
  j["fit_window_T"] = {c.fit_min, c.fit_max};
  j["kappa_per_nm"] = c.kappa * 1e-9;
  j["anchor_K"] = c.anchor_T ? Json(*c.anchor_T) : Json(nullptr);
  j["extrapolate"] = c.extrapolate;
  j["geometry"] = {{"L_m", c.geometry.length}, {"W_m", c.geometry.width}};
  return j;
}

/// Generator configuration. Field grids are either explicit lists or
/// {"min", "max", "points"}; "temperatures_K" with "B_T" expands to paired
/// perpendicular and in-plane sweeps.
inline SynthConfig synth_config_from_json(const Json& j) {
  SynthConfig c;
  auto grid = [](const Json& g) {
    if (g.is_array()) return g.get<std::vector<double>>();
    return linspace(g.at("min").get<double>(), g.at("max").get<double>(), g.at("points").get<std::size_t>());
  };
  try {
    c.sample_id = j.value("sample_id", c.sample_id);
    c.n_2d = j.at("n_2d_m2").get<double>();
    c.mu = j.at("mu_m2_per_Vs").get<double>();
    c.delta = j.at("delta_m").get<double>();
    c.F = j.at("F").get<double>();
    c.g_factor = j.value("g", c.g_factor);
    c.l_phi_law.amplitude = j.at("l_phi_law").at("amplitude_m").get<double>();
    c.l_phi_law.exponent = j.at("l_phi_law").at("exponent").get<double>();
    const std::string law = j.value("saturation", std::string("quadrature"));
    if (law == "quadrature") {
      c.saturation = effective_temperature;
      c.t_sat = j.at("t_sat_K").get<double>();
    } else if (law == "none") {
      c.saturation = no_saturation;
      c.t_sat = j.value("t_sat_K", 0.0);
    } else {
      throw InputError("synth config: unknown saturation law '" + law + "'");
    }
    if (j.contains("noise")) {
      c.relative_sigma = j.at("noise").value("relative_sigma", 0.0);
      c.seed = j.at("noise").value("seed", std::uint64_t{0});
    }
    if (j.contains("geometry")) {
      c.geometry.length = j.at("geometry").value("L_m", c.geometry.length);
      c.geometry.width = j.at("geometry").value("W_m", c.geometry.width);
    }
    c.current = j.value("current_A", c.current);
    if (j.contains("sweeps")) {
      for (const auto& s : j.at("sweeps"))
        c.sweep_plan.push_back({s.at("T_bath_K").get<double>(), s.at("theta_deg").get<double>(), grid(s.at("B_T"))});
    }
    if (j.contains("temperatures_K")) {
      auto extra = paired_plan(j.at("temperatures_K").get<std::vector<double>>(), grid(j.at("B_T")));
      c.sweep_plan.insert(c.sweep_plan.end(), extra.begin(), extra.end());
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("synth config: ") + e.what());
  }
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------
// Report emission

namespace detail {

// Six significant digits; non-finite values become null.
inline Json sig6(double v) {
  if (!std::isfinite(v)) return nullptr;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return std::strtod(buf, nullptr);
}

inline Json est(const Estimate& e) { return {{"value", sig6(e.value)}, {"error", sig6(e.std_error)}}; }
inline Json est(double v, double err) { return est(Estimate{v, err}); }

inline Json stage_header(const StageState& s) {
  Json j;
  j["status"] = to_string(s.status);
  if (!s.message.empty()) j[s.status == StageStatus::Error ? "error" : "reason"] = s.message;
  return j;
}

inline Json sig6_config(const Json& j) {
  if (j.is_number_float()) return sig6(j.get<double>());
  if (j.is_structured()) {
    Json out = j;
    for (auto it = out.begin(); it != out.end(); ++it) *it = sig6_config(*it);
    return out;
  }
  return j;
}

}  // namespace detail

inline Json report_to_json(const Report& r) {
  using detail::est;
  using detail::sig6;
  Json j;
  j["sample"] = r.sample_id;
  Json stages;

  {
    Json h = detail::stage_header(r.hall.state);
    if (r.hall.state.ok()) {
      h["T_bath_K"] = sig6(r.hall.T_bath);
      h["n_2d_m2"] = est(r.hall.n_2d);
      h["mu_m2_per_Vs"] = est(r.hall.mu);
      h["sigma_xx_S"] = est(r.hall.sigma_xx);
      h["l_mfp_m"] = est(r.hall.l_mfp);
      h["k_F_per_m"] = est(r.hall.k_f);
      h["kF_l"] = est(r.hall.kf_l);
      h["r_s"] = est(r.hall.r_s);
    }
    stages["hall"] = h;
  }
  {
    Json w = detail::stage_header(r.wl.state);
    if (r.wl.state.ok()) {
      w["delta_m"] = est(r.wl.delta);
      w["l_phi_lowest_T_m"] = est(r.wl.l_phi_lowest);
      Json rows = Json::array();
      for (const auto& row : r.wl.rows) {
        const auto& f = row.fit;
        rows.push_back({{"T_bath_K", sig6(row.T_bath)},
                        {"l_phi_m", est(f.l_phi, f.l_phi_err)},
                        {"gamma_per_T2", est(f.gamma, f.gamma_err)},
                        {"delta_m", est(f.delta, f.delta_err)},
                        {"points", row.B.size()},
                        {"converged", f.converged},
                        {"stop_reason", f.raw.stop_reason}});
      }
      w["temperatures"] = rows;
    }
    stages["wl"] = w;
  }
  {
    Json p = detail::stage_header(r.powerlaw.state);
    p["T_c_K"] = sig6(r.config.T_c);
    if (r.powerlaw.state.ok()) {
      p["exponent"] = est(r.powerlaw.fit.exponent, r.powerlaw.fit.exponent_err);
      p["amplitude_1K_m"] = est(r.powerlaw.fit.amplitude, r.powerlaw.fit.amplitude_err);
      p["points"] = r.powerlaw.fit.n_points;
    }
    stages["powerlaw"] = p;
  }
  {
    Json c = detail::stage_header(r.collapse.state);
    if (r.collapse.state.ok()) {
      const auto& res = r.collapse.result;
      c["anchor_T_K"] = sig6(r.collapse.curves[r.collapse.anchor].T_bath);
      c["F"] = est(res.aa.F, res.aa.F_err);
      c["reference_h"] = sig6(res.aa.intercept_check);
      c["dispersion_S2"] = sig6(res.dispersion);
      c["dispersion_at_bath_S2"] = sig6(res.dispersion_bath);
      Json rows = Json::array();
      for (std::size_t i = 0; i < r.collapse.curves.size(); ++i)
        rows.push_back({{"T_bath_K", sig6(r.collapse.curves[i].T_bath)},
                        {"T_eff_K", est(res.t_eff[i], res.t_eff_err[i])}});
      c["T_eff"] = rows;
    }
    stages["collapse"] = c;
  }
  j["stages"] = stages;

  Json prov;
  prov["tool"] = "magtrans";
  prov["version"] = kToolVersion;
  Json inputs = Json::array();
  for (const auto& s : r.sources) inputs.push_back({{"path", s.path}, {"fnv1a64", s.hash}});
  prov["inputs"] = inputs;
  prov["config"] = detail::sig6_config(to_json(r.config));
  Json base = Json::array();
  for (const auto& b : r.baselines)
    base.push_back({{"T_bath_K", sig6(b.T_bath)}, {"theta_deg", sig6(b.theta_deg)}, {"sigma0_method", b.baseline.method}});
  prov["baselines"] = base;
  prov["warnings"] = r.warnings;
  j["provenance"] = prov;
  return j;
}

/// Plot-data tables, one per plot, written under `dir`.
inline std::vector<std::filesystem::path> write_plot_files(const Report& r, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<fs::path> written;
  auto open = [&](const std::string& name, const std::string& what, const std::string& header) {
    const fs::path p = dir / name;
    auto out = std::make_unique<std::ofstream>(p, std::ios::binary);
    if (!*out) throw InputError("cannot write " + p.string());
    *out << kPlotMarker << ": " << what << '\n' << header << '\n';
    written.push_back(p);
    return out;
  };
  auto num = [](double v) {
    if (!std::isfinite(v)) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };

  {
    auto f = open("sigma_vs_T.csv", "zero-field sheet conductance vs bath temperature",
                  "T_bath_K,theta_deg,sigma_xx_S,sigma_xx_err_S,method");
    for (const auto& b : r.baselines)
      *f << num(b.T_bath) << ',' << num(b.theta_deg) << ',' << num(b.baseline.value) << ','
         << num(b.baseline.error) << ',' << b.baseline.method << '\n';
  }
  if (r.wl.state.ok()) {
    auto f = open("wl_difference.csv", "perpendicular minus in-plane magnetoconductance with fits",
                  "T_bath_K,B_T,difference_S,fit_S");
    for (const auto& row : r.wl.rows)
      for (std::size_t i = 0; i < row.B.size(); ++i)
        *f << num(row.T_bath) << ',' << num(row.B[i]) << ',' << num(row.difference[i]) << ',' << num(row.model[i])
           << '\n';
    auto g = open("lphi_vs_T.csv", "coherence length vs bath temperature",
                  "T_bath_K,l_phi_m,l_phi_err_m,power_law_m");
    for (const auto& row : r.wl.rows) {
      const double law = r.powerlaw.state.ok() ? r.powerlaw.fit.amplitude * std::pow(row.T_bath, r.powerlaw.fit.exponent)
                                               : std::numeric_limits<double>::quiet_NaN();
      *g << num(row.T_bath) << ',' << num(row.fit.l_phi) << ',' << num(row.fit.l_phi_err) << ',' << num(law) << '\n';
    }
  }
  if (r.collapse.state.ok()) {
    const double g_over = r.config.g_factor * Constants::mu_B / Constants::k_B;
    auto f = open("aa_collapse.csv", "Zeeman channel vs ln h at bath and effective temperatures",
                  "T_bath_K,T_eff_K,B_T,ln_h_bath,ln_h_eff,delta_sigma_S");
    for (const auto& c : r.collapse.curves)
      for (const auto& p : c.points) {
        if (!(p.B > 0.0)) continue;
        *f << num(c.T_bath) << ',' << num(c.T_eff) << ',' << num(p.B) << ',' << num(std::log(g_over * p.B / c.T_bath))
           << ',' << num(std::log(g_over * p.B / c.T_eff)) << ',' << num(p.delta_sigma) << '\n';
      }
    auto m = open("aa_master.csv", "binned master curve after collapse", "ln_h,delta_sigma_S,count");
    for (const auto& b : r.collapse.result.master_curve)
      *m << num(b.ln_h) << ',' << num(b.delta_sigma) << ',' << b.count << '\n';
  }
  return written;
}

/// Split parsed sweeps into one dataset per sample, in order of appearance.
inline std::vector<Dataset> group_by_sample(const std::vector<SweepRecord>& sweeps, const AnalysisConfig& cfg) {
  std::vector<Dataset> out;
  for (const auto& s : sweeps) {
    auto it = std::find_if(out.begin(), out.end(), [&](const Dataset& d) { return d.sample_id == s.sample_id; });
    if (it == out.end()) {
      out.push_back({s.sample_id, {}, cfg, {}, {}});
      it = std::prev(out.end());
    }
    it->sweeps.push_back(s);
  }
  return out;
}

}  // namespace magtrans
