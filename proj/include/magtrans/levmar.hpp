#pragma once

/// \file
/// Box-constrained Levenberg-Marquardt least squares.
///
/// Damping follows Nielsen's update rule with Marquardt (diagonal) scaling.
/// Variables sitting on a bound whose descent direction points outward are
/// frozen for the step; every trial point is projected onto the box.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "magtrans/physcore.hpp"

namespace magtrans {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Residual {
  std::function<Vector(const Vector&)> evaluate;
  /// Optional analytic Jacobian (m x n). Central differences when empty.
  std::function<Matrix(const Vector&)> jacobian;
};

struct Bounds {
  Vector lower;
  Vector upper;

  static Bounds unbounded(Eigen::Index n) {
    const double inf = std::numeric_limits<double>::infinity();
    return {Vector::Constant(n, -inf), Vector::Constant(n, inf)};
  }
};

struct LevmarOptions {
  int max_iterations = 200;
  double gradient_tol = 1e-10;  // max_i |g_i| / (|J_i| |r|)
  double step_tol = 1e-12;      // relative parameter change
  double initial_damping = 1e-8;  // relative to diag(J^T J)
  double fd_relative_step = 1e-6;
};

struct FitResult {
  Vector params;
  Matrix covariance;
  double residual_norm = 0.0;
  double gradient_norm = 0.0;  // scaled, see LevmarOptions::gradient_tol
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<bool> bounds_active;
  std::string stop_reason;
};

class NonFiniteResidualError : public std::runtime_error {
 public:
  NonFiniteResidualError(const std::string& what, FitResult last)
      : std::runtime_error(what), last_valid(std::move(last)) {}
  FitResult last_valid;
};

namespace detail {

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline Matrix central_jacobian(const Residual& r, const Vector& p, const Vector& r0, const Bounds& box,
                               const Vector& scale, double rel_step, int& evaluations) {
  const Eigen::Index n = p.size();
  Matrix J(r0.size(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double h = rel_step * std::max(std::abs(p[j]), scale[j]);
    Vector lo = p, hi = p;
    hi[j] = std::min(p[j] + h, box.upper[j]);
    lo[j] = std::max(p[j] - h, box.lower[j]);
    const Vector fhi = hi[j] == p[j] ? r0 : r.evaluate(hi);
    const Vector flo = lo[j] == p[j] ? r0 : r.evaluate(lo);
    evaluations += 2;
    J.col(j) = (fhi - flo) / (hi[j] - lo[j]);
  }
  return J;
}

/// Pseudo-inverse of a symmetric PSD matrix, Jacobi-scaled so that columns
/// of very different magnitude do not fall below the eigenvalue cutoff.
inline Matrix psd_pinv(const Matrix& A) {
  const Vector d = A.diagonal().cwiseMax(0.0).cwiseSqrt();
  Vector dinv = Vector::Zero(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d[i] > 0.0) dinv[i] = 1.0 / d[i];
  const Matrix S = dinv.asDiagonal() * A * dinv.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(S);
  const Vector& w = eig.eigenvalues();
  const double cutoff = std::max(w.cwiseAbs().maxCoeff(), 0.0) * 1e-14 * static_cast<double>(A.rows());
  Vector inv = Vector::Zero(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (w[i] > cutoff) inv[i] = 1.0 / w[i];
  const Matrix Sp = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  Matrix P = dinv.asDiagonal() * Sp * dinv.asDiagonal();
  return 0.5 * (P + P.transpose());
}

}  // namespace detail

/// Minimize 0.5 |r(p)|^2 over the box. Deterministic for identical inputs.
inline FitResult levmar(const Residual& residual, Vector init, const Bounds& box, const LevmarOptions& opt = {}) {
  const Eigen::Index n = init.size();
  if (box.lower.size() != n || box.upper.size() != n) throw InputError("levmar: bounds dimension mismatch");
  if (((init.array() < box.lower.array()) || (init.array() > box.upper.array())).any())
    throw InputError("levmar: initial point outside bounds");

  FitResult res;
  res.params = init;
  res.bounds_active.assign(static_cast<std::size_t>(n), false);

  // Finite-difference step floor: parameter magnitude at start, else bound width.
  Vector scale(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double width = box.upper[j] - box.lower[j];
    double s = std::abs(init[j]);
    if (s == 0.0) s = std::isfinite(width) ? 1e-6 * width : 1.0;
    scale[j] = s;
  }

  Vector p = init;
  Vector r = residual.evaluate(p);
  res.evaluations = 1;
  if (!detail::all_finite(r)) throw NonFiniteResidualError("levmar: residual not finite at initial point", res);
  if (r.size() < n) throw InputError("levmar: fewer residuals than parameters");
  const Eigen::Index m = r.size();
  double cost = 0.5 * r.squaredNorm();
  const double r0_norm = r.norm();

  auto snapshot = [&](const Matrix& J) {
    res.params = p;
    res.residual_norm = std::sqrt(2.0 * cost);
    const Matrix JtJ = J.transpose() * J;
    const double s2 = m > n ? 2.0 * cost / static_cast<double>(m - n) : 1.0;
    res.covariance = detail::psd_pinv(JtJ) * s2;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double tol = 1e-12 * std::max(std::abs(p[j]), scale[j]);
      res.bounds_active[static_cast<std::size_t>(j)] =
          std::abs(p[j] - box.lower[j]) <= tol || std::abs(p[j] - box.upper[j]) <= tol;
    }
  };

  auto jac = [&](const Vector& at, const Vector& r_at) {
    if (residual.jacobian) {
      ++res.evaluations;
      return residual.jacobian(at);
    }
    return detail::central_jacobian(residual, at, r_at, box, scale, opt.fd_relative_step, res.evaluations);
  };

  Matrix J = jac(p, r);
  double damping = -1.0;
  double nu = 2.0;
  int steps = 0;
  int pass = 1;

  for (; pass <= opt.max_iterations; ++pass) {
    const Vector g = J.transpose() * r;

    // Freeze variables pinned at a bound with the descent direction pointing out.
    std::vector<Eigen::Index> free;
    Vector g_proj = g;
    for (Eigen::Index j = 0; j < n; ++j) {
      const bool at_lo = p[j] <= box.lower[j] && g[j] > 0.0;
      const bool at_hi = p[j] >= box.upper[j] && g[j] < 0.0;
      if (at_lo || at_hi)
        g_proj[j] = 0.0;
      else
        free.push_back(j);
    }

    const double r_norm = std::sqrt(2.0 * cost);
    double gmax = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double cn = J.col(j).norm();
      if (cn > 0.0 && r_norm > 0.0) gmax = std::max(gmax, std::abs(g_proj[j]) / (cn * r_norm));
    }
    res.gradient_norm = gmax;
    if (r_norm <= 1e-14 * r0_norm || r_norm == 0.0) {
      res.converged = true;
      res.stop_reason = "exact fit";
      break;
    }
    if (gmax < opt.gradient_tol) {
      res.converged = true;
      res.stop_reason = "gradient";
      break;
    }
    if (free.empty()) {
      res.converged = true;
      res.stop_reason = "all parameters on active bounds";
      break;
    }

    const auto k = static_cast<Eigen::Index>(free.size());
    Matrix A(k, k);
    Vector b(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      b[a] = -g[free[a]];
      for (Eigen::Index c = 0; c < k; ++c) A(a, c) = J.col(free[a]).dot(J.col(free[c]));
    }
    const Vector diag = A.diagonal().cwiseMax(1e-300);
    if (damping < 0.0) damping = opt.initial_damping;

    bool accepted = false;
    bool stalled = false;

    while (!accepted) {
      // Solve in Jacobi-scaled variables: (S + damping I) z = D^-1 b, step = D^-1 z.
      const Vector dinv = diag.cwiseSqrt().cwiseInverse();
      Matrix Ad = dinv.asDiagonal() * A * dinv.asDiagonal();
      Ad.diagonal().array() += damping;
      const Vector step_free = dinv.cwiseProduct(Ad.ldlt().solve(dinv.cwiseProduct(b)));
      Vector trial = p;
      for (Eigen::Index a = 0; a < k; ++a) trial[free[a]] += step_free[a];
      trial = trial.cwiseMax(box.lower).cwiseMin(box.upper);
      const Vector step = trial - p;

      double rel_step = 0.0;
      for (Eigen::Index j = 0; j < n; ++j)
        rel_step = std::max(rel_step, std::abs(step[j]) / std::max(std::abs(p[j]), scale[j]));
      if (rel_step < opt.step_tol) {
        stalled = true;
        break;
      }

      const Vector r_trial = residual.evaluate(trial);
      ++res.evaluations;
      if (!detail::all_finite(r_trial)) {
        snapshot(J);
        res.converged = false;
        res.stop_reason = "non-finite residual";
        throw NonFiniteResidualError("levmar: residual became non-finite during iteration", res);
      }
      const double cost_trial = 0.5 * r_trial.squaredNorm();
      const Vector Js = J * step;
      const double predicted = -(g.dot(step) + 0.5 * Js.squaredNorm());
      const double actual = cost - cost_trial;

      if (actual > 0.0) {
        const double rho = predicted > 0.0 ? actual / predicted : 0.0;
        damping *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        nu = 2.0;
        p = trial;
        r = r_trial;
        cost = cost_trial;
        accepted = true;
        ++steps;
        J = jac(p, r);
      } else {
        damping *= nu;
        nu *= 2.0;
        if (!std::isfinite(damping) || damping > 1e300) {
          stalled = true;
          break;
        }
      }
    }
    if (stalled) {
      res.converged = true;
      res.stop_reason = "step";
      break;
    }
  }
  res.iterations = steps;
  if (pass > opt.max_iterations) {
    res.converged = false;
    res.stop_reason = "iteration limit";
  }
  snapshot(J);
  return res;
}

}  // namespace magtrans
