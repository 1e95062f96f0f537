#pragma once

/// \file
/// Isolation of the Zeeman interaction channel and its collapse onto a single
/// curve of the reduced field h = g mu_B B / (k_B T_eff).
///
/// The collapse objective scores every curve against a master curve built
/// from all the other curves: their isotonic least-squares fit (pool
/// adjacent violators), interpolated linearly between block centres. It is
/// zero for identical curves and grows quadratically with a small
/// misalignment. Effective temperatures are found by coordinate
/// descent on ln T_eff (single curves and rigid blocks of curves) with one
/// curve held at its bath temperature.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "magtrans/fit.hpp"
#include "magtrans/models.hpp"

namespace magtrans {

class CollapseError : public InputError {
 public:
  using InputError::InputError;
};

struct AaPoint {
  double B = 0.0;            // T
  double delta_sigma = 0.0;  // S
};

struct AaCurve {
  double T_bath = 0.0;  // K
  std::vector<AaPoint> points;
  double T_eff = 0.0;  // K, filled by collapse_teff
};

struct MagnetoCurve {
  double T_bath = 0.0;
  Orientation orientation = Orientation::Perpendicular;
  std::vector<double> B;            // field magnitudes (T)
  std::vector<double> delta_sigma;  // sigma(B) - sigma(0) (S)
};

struct WlAtTemperature {
  double T = 0.0;
  double l_phi = 0.0;
  double gamma = 0.0;
};

/// Weak-localization parameters between fitted temperatures: l_phi log-log,
/// gamma linear in ln T.
class WlInterpolator {
 public:
  WlInterpolator(std::vector<WlAtTemperature> fits, double l_mfp, bool extrapolate = false)
      : fits_(std::move(fits)), l_mfp_(l_mfp), extrapolate_(extrapolate) {
    if (fits_.empty()) throw InputError("WlInterpolator: no fitted temperatures");
    std::sort(fits_.begin(), fits_.end(), [](const auto& a, const auto& b) { return a.T < b.T; });
    for (const auto& f : fits_)
      detail::require(detail::positive_finite(f.T) && detail::positive_finite(f.l_phi) && f.gamma >= 0.0,
                      "WlInterpolator: invalid fit entry");
    detail::require(detail::positive_finite(l_mfp), "WlInterpolator: l_mfp must be positive");
  }

  WlParams wl(double T) const { return {std::exp(interp(T, [](const auto& f) { return std::log(f.l_phi); })), l_mfp_}; }
  InPlaneParams in_plane(double T) const { return {std::max(0.0, interp(T, [](const auto& f) { return f.gamma; }))}; }

 private:
  template <class Get>
  double interp(double T, Get get) const {
    detail::require(detail::positive_finite(T), "WlInterpolator: temperature must be positive");
    const double tol = 1e-9;
    const double lo = fits_.front().T, hi = fits_.back().T;
    if (!extrapolate_ && (T < lo * (1 - tol) || T > hi * (1 + tol)))
      throw InputError("no weak-localization fit covers T = " + std::to_string(T) + " K");
    if (fits_.size() == 1) return get(fits_.front());
    std::size_t k = 1;
    while (k + 1 < fits_.size() && fits_[k].T < T) ++k;
    const auto& a = fits_[k - 1];
    const auto& b = fits_[k];
    const double t = (std::log(T) - std::log(a.T)) / (std::log(b.T) - std::log(a.T));
    return get(a) + t * (get(b) - get(a));
  }

  std::vector<WlAtTemperature> fits_;
  double l_mfp_;
  bool extrapolate_;
};

struct IsolatedAa {
  std::vector<AaCurve> curves;         // both orientations merged per temperature
  std::vector<MagnetoCurve> residues;  // per orientation, same order as input
};

/// Subtract the fitted orbital channel from every raw curve.
inline IsolatedAa isolate_aa(std::span<const MagnetoCurve> raw, const WlInterpolator& wl) {
  IsolatedAa out;
  for (const auto& c : raw) {
    if (c.B.size() != c.delta_sigma.size()) throw InputError("isolate_aa: B and delta_sigma differ in length");
    MagnetoCurve res = c;
    const WlParams p = wl.wl(c.T_bath);
    const InPlaneParams ip = wl.in_plane(c.T_bath);
    for (std::size_t i = 0; i < c.B.size(); ++i) {
      const double b = std::abs(c.B[i]);
      const double orbital = c.orientation == Orientation::Perpendicular ? wl_perp(b, p) : wl_inplane(b, ip);
      res.B[i] = b;
      res.delta_sigma[i] = c.delta_sigma[i] - orbital;
    }
    out.residues.push_back(std::move(res));
  }
  for (const auto& r : out.residues) {
    auto it = std::find_if(out.curves.begin(), out.curves.end(), [&](const AaCurve& a) {
      return std::abs(a.T_bath - r.T_bath) <= 1e-9 * r.T_bath;
    });
    if (it == out.curves.end()) {
      out.curves.push_back(AaCurve{r.T_bath, {}, r.T_bath});
      it = std::prev(out.curves.end());
    }
    for (std::size_t i = 0; i < r.B.size(); ++i) it->points.push_back({r.B[i], r.delta_sigma[i]});
  }
  for (auto& c : out.curves)
    std::stable_sort(c.points.begin(), c.points.end(), [](const AaPoint& a, const AaPoint& b) {
      return a.B < b.B || (a.B == b.B && a.delta_sigma < b.delta_sigma);
    });
  std::sort(out.curves.begin(), out.curves.end(), [](const AaCurve& a, const AaCurve& b) { return a.T_bath < b.T_bath; });
  return out;
}

struct CollapseOptions {
  std::size_t bins = 40;
  double g_factor = Constants::g_factor;
  double h_min = kDefaultHMin;
  int restarts = 2;
  double window = std::log(4.0);  // half-width of each line search in ln T_eff
  int grid = 16;                  // bracketing grid per line search
  double tolerance = 1e-7;        // in ln T_eff
  int max_sweeps = 100;
};

struct MasterBin {
  double ln_h = 0.0;
  double delta_sigma = 0.0;
  std::size_t count = 0;
};

struct CollapseResult {
  std::vector<double> t_eff;  // K, same order as input curves
  /// One-sigma errors from the curvature of the cost along each curve's own
  /// coordinate, others held fixed; zero for the anchor.
  std::vector<double> t_eff_err;
  std::size_t anchor = 0;
  double dispersion = 0.0;
  double dispersion_bath = 0.0;  // with T_eff = T_bath; +inf if that has no overlap
  std::vector<MasterBin> master_curve;
  AaSlopeFit aa;
  int sweeps = 0;
};

namespace detail {

struct XY {
  double x;
  double y;
};

// Sum of squared residuals of the isotonic (non-increasing if `decreasing`)
// least-squares fit to y, for points already sorted by x.
inline double pav_sse(const std::vector<XY>& pts, bool decreasing) {
  struct Block {
    double sum;
    double sumsq;
    double n;
  };
  std::vector<Block> st;
  st.reserve(pts.size());
  for (const auto& p : pts) {
    const double y = decreasing ? -p.y : p.y;
    st.push_back({y, y * y, 1.0});
    while (st.size() > 1) {
      const Block& b = st.back();
      const Block& a = st[st.size() - 2];
      if (a.sum / a.n <= b.sum / b.n) break;
      Block merged{a.sum + b.sum, a.sumsq + b.sumsq, a.n + b.n};
      st.pop_back();
      st.back() = merged;
    }
  }
  double sse = 0.0;
  for (const auto& b : st) sse += std::max(0.0, b.sumsq - b.sum * b.sum / b.n);
  return sse;
}

// Isotonic least-squares fit as knots (block mid-abscissa, block mean) for
// points sorted by x.
inline std::vector<XY> pav_knots(const std::vector<XY>& pts, bool decreasing) {
  struct Block {
    double sum;
    double n;
    double x0;
    double x1;
  };
  std::vector<Block> st;
  st.reserve(pts.size());
  for (const auto& p : pts) {
    st.push_back({decreasing ? -p.y : p.y, 1.0, p.x, p.x});
    while (st.size() > 1) {
      const Block& b = st.back();
      const Block& a = st[st.size() - 2];
      if (a.sum / a.n <= b.sum / b.n) break;
      Block merged{a.sum + b.sum, a.n + b.n, a.x0, b.x1};
      st.pop_back();
      st.back() = merged;
    }
  }
  // Blocks sharing a centre (repeated abscissae) become one weighted knot.
  std::vector<XY> knots;
  std::vector<double> weight;
  knots.reserve(st.size());
  for (const auto& b : st) {
    const XY k{0.5 * (b.x0 + b.x1), (decreasing ? -b.sum : b.sum) / b.n};
    if (!knots.empty() && knots.back().x == k.x) {
      knots.back().y = (knots.back().y * weight.back() + k.y * b.n) / (weight.back() + b.n);
      weight.back() += b.n;
    } else {
      knots.push_back(k);
      weight.push_back(b.n);
    }
  }
  return knots;
}

// Piecewise-linear value of the knots at x, which must lie inside their span.
inline double knot_value(const std::vector<XY>& knots, double x) {
  auto it = std::lower_bound(knots.begin(), knots.end(), x, [](const XY& k, double v) { return k.x < v; });
  if (it->x == x) return it->y;
  const XY& hi = *it;
  const XY& lo = *std::prev(it);
  return lo.y + (x - lo.x) / (hi.x - lo.x) * (hi.y - lo.y);
}

inline bool xy_less(const XY& a, const XY& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); }

inline std::vector<std::vector<XY>> reduced_points(std::span<const AaCurve> curves, std::span<const double> t_eff,
                                                   double g) {
  std::vector<std::vector<XY>> out(curves.size());
  for (std::size_t i = 0; i < curves.size(); ++i) {
    require(positive_finite(t_eff[i]), "collapse: effective temperatures must be positive");
    for (const auto& p : curves[i].points)
      if (p.B > 0.0) out[i].push_back({std::log(reduced_field(p.B, t_eff[i], g)), p.delta_sigma});
    if (!std::is_sorted(out[i].begin(), out[i].end(), xy_less)) std::sort(out[i].begin(), out[i].end(), xy_less);
  }
  return out;
}

}  // namespace detail

/// Collapse cost of the curves at the candidate effective temperatures.
///
/// Only points inside the ln h range of at least one other curve take part.
/// Throws CollapseError when some curve has points in fewer than three of the
/// `bins` bins spanning that support that also hold points of another curve.
inline double dispersion(std::span<const AaCurve> curves, std::span<const double> t_eff,
                         const CollapseOptions& opt = {}) {
  if (curves.size() < 2) throw CollapseError("dispersion: need at least two curves");
  if (t_eff.size() != curves.size()) throw InputError("dispersion: one effective temperature per curve");
  const auto pts = detail::reduced_points(curves, t_eff, opt.g_factor);

  const std::size_t nc = pts.size();
  std::vector<double> mins(nc), maxs(nc);
  for (std::size_t i = 0; i < nc; ++i) {
    const auto& c = pts[i];
    if (c.size() < 2) throw CollapseError("dispersion: curve with fewer than two points at B > 0");
    const auto [mn, mx] = std::minmax_element(c.begin(), c.end(), [](auto a, auto b) { return a.x < b.x; });
    mins[i] = mn->x;
    maxs[i] = mx->x;
  }

  // All points sorted by (x, y). Each curve is already sorted, so a chain of
  // merges is enough.
  struct Tagged {
    detail::XY p;
    std::size_t owner;
  };
  auto tagged_less = [](const Tagged& a, const Tagged& b) { return detail::xy_less(a.p, b.p); };
  std::vector<Tagged> merged;
  for (std::size_t i = 0; i < nc; ++i) {
    const auto mid = merged.size();
    for (const auto& p : pts[i]) merged.push_back({p, i});
    std::inplace_merge(merged.begin(), merged.begin() + static_cast<std::ptrdiff_t>(mid), merged.end(), tagged_less);
  }

  std::vector<detail::XY> all;
  std::vector<std::size_t> owner;
  for (const auto& t : merged) {
    bool covered = false;
    for (std::size_t j = 0; j < nc && !covered; ++j) covered = j != t.owner && t.p.x >= mins[j] && t.p.x <= maxs[j];
    if (covered) {
      all.push_back(t.p);
      owner.push_back(t.owner);
    }
  }
  if (all.empty()) throw CollapseError("dispersion: curves do not overlap in ln h");

  const double lo = all.front().x, hi = all.back().x;
  const std::size_t nb = opt.bins;
  std::vector<std::vector<bool>> seen(nb, std::vector<bool>(nc, false));
  const double width = hi > lo ? (hi - lo) / static_cast<double>(nb) : 1.0;
  for (std::size_t k = 0; k < all.size(); ++k)
    seen[std::min(nb - 1, static_cast<std::size_t>((all[k].x - lo) / width))][owner[k]] = true;
  // A curve that shares too little support with the others is unconstrained,
  // and dropping it would always lower the cost.
  for (std::size_t i = 0; i < nc; ++i) {
    const auto shared = std::count_if(seen.begin(), seen.end(), [i](const auto& s) {
      return s[i] && std::count(s.begin(), s.end(), true) >= 2;
    });
    if (shared < 3) throw CollapseError("dispersion: a curve shares fewer than three ln h bins with the others");
  }

  // Direction of the master curve: whichever monotone fit explains all
  // overlapping points better.
  const bool decreasing = detail::pav_sse(all, true) <= detail::pav_sse(all, false);

  // Each curve is scored against the monotone master curve of the others.
  // Per-curve sums are added in sorted order so that the result does not
  // depend on the order of the curves, down to rounding.
  std::vector<double> curve_sse(nc, 0.0);
  std::size_t used = 0;
  std::vector<detail::XY> others;
  for (std::size_t i = 0; i < nc; ++i) {
    others.clear();
    for (const auto& t : merged)
      if (t.owner != i) others.push_back(t.p);
    const auto knots = detail::pav_knots(others, decreasing);
    for (const auto& p : pts[i]) {
      if (p.x < knots.front().x || p.x > knots.back().x) continue;
      const double d = p.y - detail::knot_value(knots, p.x);
      curve_sse[i] += d * d;
      ++used;
    }
  }
  if (used == 0) throw CollapseError("dispersion: curves do not overlap in ln h");
  std::sort(curve_sse.begin(), curve_sse.end());
  return std::accumulate(curve_sse.begin(), curve_sse.end(), 0.0) / static_cast<double>(used);
}

/// Binned (ln h, delta_sigma) means of all points at the given temperatures,
/// over the union of the curves' supports.
inline std::vector<MasterBin> master_curve(std::span<const AaCurve> curves, std::span<const double> t_eff,
                                           const CollapseOptions& opt = {}) {
  const auto pts = detail::reduced_points(curves, t_eff, opt.g_factor);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& c : pts)
    for (const auto& p : c) {
      lo = std::min(lo, p.x);
      hi = std::max(hi, p.x);
    }
  std::vector<MasterBin> bins(opt.bins);
  if (!(hi > lo)) return {};
  const double width = (hi - lo) / static_cast<double>(opt.bins);
  for (const auto& c : pts)
    for (const auto& p : c) {
      const auto b = std::min(opt.bins - 1, static_cast<std::size_t>((p.x - lo) / width));
      bins[b].ln_h += p.x;
      bins[b].delta_sigma += p.y;
      ++bins[b].count;
    }
  std::vector<MasterBin> out;
  for (auto& b : bins) {
    if (b.count == 0) continue;
    b.ln_h /= static_cast<double>(b.count);
    b.delta_sigma /= static_cast<double>(b.count);
    out.push_back(b);
  }
  return out;
}

/// Effective temperatures that collapse the curves, with curve `anchor` held
/// at its bath temperature, and the interaction parameter F of the collapsed
/// master curve.
inline CollapseResult collapse_teff(std::span<const AaCurve> curves, std::size_t anchor,
                                    const CollapseOptions& opt = {}) {
  if (curves.size() < 3) throw CollapseError("collapse_teff: need at least three temperatures");
  if (anchor >= curves.size()) throw InputError("collapse_teff: anchor index out of range");
  for (const auto& c : curves)
    detail::require(detail::positive_finite(c.T_bath), "collapse_teff: bath temperatures must be positive");

  const std::size_t n = curves.size();
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = std::log(curves[i].T_bath);

  auto objective = [&](const std::vector<double>& lu) {
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(lu[i]);
    try {
      return dispersion(curves, t, opt);
    } catch (const CollapseError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  CollapseResult out;
  out.anchor = anchor;
  double best = objective(u);
  out.dispersion_bath = best;

  // Search directions: each single curve, and each block of curves lying at or
  // beyond a given curve as seen from the anchor along the temperature axis.
  // Block moves shift a group rigidly against the rest, which single
  // coordinates only achieve by slow zig-zagging.
  std::vector<std::size_t> by_temp(n);
  std::iota(by_temp.begin(), by_temp.end(), std::size_t{0});
  std::stable_sort(by_temp.begin(), by_temp.end(), [&](auto a, auto b) { return u[a] < u[b]; });
  const auto anchor_pos = static_cast<std::size_t>(std::find(by_temp.begin(), by_temp.end(), anchor) - by_temp.begin());
  std::vector<std::vector<std::size_t>> directions;
  for (std::size_t pos = 0; pos < n; ++pos) {
    if (pos == anchor_pos) continue;
    directions.push_back({by_temp[pos]});
    std::vector<std::size_t> block;
    if (pos < anchor_pos)
      for (std::size_t q = 0; q <= pos; ++q) block.push_back(by_temp[q]);
    else
      for (std::size_t q = pos; q < n; ++q) block.push_back(by_temp[q]);
    if (block.size() > 1) directions.push_back(std::move(block));
  }
  std::stable_sort(directions.begin(), directions.end(), [&](const auto& a, const auto& b) {
    return std::abs(u[a.front()] - u[anchor]) < std::abs(u[b.front()] - u[anchor]);
  });

  constexpr double kInvPhi = 0.6180339887498949;
  auto line_search = [&](const std::vector<std::size_t>& dir, double window) {
    std::vector<double> trial = u;
    auto f = [&](double shift) {
      for (auto i : dir) trial[i] = u[i] + shift;
      return objective(trial);
    };
    const int G = std::max(2, opt.grid);
    const double step = 2.0 * window / G;
    double best_s = 0.0, best_f = best;
    int best_k = G / 2;
    for (int k = 0; k <= G; ++k) {
      const double sh = -window + step * k;
      if (k == G / 2 && G % 2 == 0) continue;
      const double fv = f(sh);
      if (fv < best_f) {
        best_f = fv;
        best_s = sh;
        best_k = k;
      }
    }
    // Golden-section refinement inside the neighbouring grid cells.
    double a = -window + step * std::max(0, best_k - 1);
    double b = -window + step * std::min(G, best_k + 1);
    double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > opt.tolerance) {
      if (fc <= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - kInvPhi * (b - a);
        fc = f(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + kInvPhi * (b - a);
        fd = f(d);
      }
    }
    for (auto [sh, fv] : {std::pair{c, fc}, std::pair{d, fd}})
      if (fv < best_f) {
        best_f = fv;
        best_s = sh;
      }
    if (best_f < best) {
      for (auto i : dir) u[i] += best_s;
      best = best_f;
      return std::abs(best_s);
    }
    return 0.0;
  };

  // Later sweeps search a window around each direction's previous move;
  // every restart begins again from the full window.
  constexpr double kMinWindow = 0.01;
  for (int restart = 0; restart <= opt.restarts; ++restart) {
    std::vector<double> window(directions.size(), opt.window);
    bool any_move = false;
    for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
      ++out.sweeps;
      double max_move = 0.0;
      for (std::size_t d = 0; d < directions.size(); ++d) {
        const double move = line_search(directions[d], window[d]);
        max_move = std::max(max_move, move);
        window[d] = std::clamp(8.0 * move, kMinWindow, opt.window);
      }
      if (max_move > 0.0) any_move = true;
      if (max_move < opt.tolerance * 10) break;
    }
    if (!any_move && restart > 0) break;
  }

  if (!std::isfinite(best)) throw CollapseError("collapse_teff: no overlapping configuration found");

  out.t_eff.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.t_eff[i] = std::exp(u[i]);
  out.dispersion = best;

  std::size_t n_points = 0;
  for (const auto& c : curves)
    n_points += static_cast<std::size_t>(std::count_if(c.points.begin(), c.points.end(), [](const AaPoint& p) { return p.B > 0.0; }));
  out.t_eff_err.assign(n, 0.0);
  constexpr double kCurvatureStep = 0.02;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == anchor) continue;
    std::vector<double> up = u, dn = u;
    up[i] += kCurvatureStep;
    dn[i] -= kCurvatureStep;
    const double curv = (objective(up) - 2.0 * best + objective(dn)) / (kCurvatureStep * kCurvatureStep);
    // var(ln T) = s^2 / (curvature of SSE / 2), SSE ~ N * dispersion, s^2 ~ dispersion.
    if (curv > 0.0 && std::isfinite(curv))
      out.t_eff_err[i] = out.t_eff[i] * std::sqrt(2.0 * best / (static_cast<double>(n_points) * curv));
    else
      out.t_eff_err[i] = std::numeric_limits<double>::infinity();
  }

  out.master_curve = master_curve(curves, out.t_eff, opt);

  std::vector<double> h, y;
  for (const auto& b : out.master_curve) {
    h.push_back(std::exp(b.ln_h));
    y.push_back(b.delta_sigma);
  }
  out.aa = fit_aa_slope(h, y, opt.h_min);
  return out;
}

/// Index of the curve with the highest bath temperature.
inline std::size_t hottest(std::span<const AaCurve> curves) {
  if (curves.empty()) throw InputError("hottest: no curves");
  return static_cast<std::size_t>(std::distance(
      curves.begin(), std::max_element(curves.begin(), curves.end(),
                                       [](const AaCurve& a, const AaCurve& b) { return a.T_bath < b.T_bath; })));
}

}  // namespace magtrans
