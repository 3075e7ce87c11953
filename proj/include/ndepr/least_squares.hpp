#pragma once

// Box-bounded Levenberg-Marquardt for small dense problems.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ndepr/error.hpp"

namespace ndepr {

/// Residual callback. Fills r (size m) and, when jac is non-null, the
/// row-major m x n Jacobian dr_i/dp_j.
using ResidualFn = std::function<void(const std::vector<double>& p, std::vector<double>& r, std::vector<double>* jac)>;

struct LsqProblem {
  std::size_t n_params = 0;
  std::size_t n_residuals = 0;
  ResidualFn eval;
  std::vector<double> lower;  // empty or size n
  std::vector<double> upper;
};

struct LsqOptions {
  double lambda0 = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 10.0;
  int max_iter = 500;
  double ftol = 1e-10;  // relative cost change on an accepted step
  double gtol = 1e-8;   // scaled gradient
};

struct LsqResult {
  std::vector<double> params;
  std::vector<double> residuals;
  std::vector<double> covariance;  // n x n row-major; empty when unavailable
  std::vector<double> cost_history;  // sum of squares after each accepted step, starting point first
  double cost = 0.0;
  bool converged = false;
  int n_iter = 0;
  std::string message;
};

namespace detail {

/// In-place Cholesky of a symmetric positive definite n x n matrix. Returns
/// false when a pivot falls below rel_tol times the largest diagonal entry.
inline bool cholesky(std::vector<double>& a, std::size_t n, double rel_tol) {
  double dmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) dmax = std::max(dmax, std::abs(a[i * n + i]));
  if (!(dmax > 0.0)) return false;
  for (std::size_t j = 0; j < n; ++j) {
    double s = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) s -= a[j * n + k] * a[j * n + k];
    if (!(s > rel_tol * dmax)) return false;
    const double l = std::sqrt(s);
    a[j * n + j] = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double t = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) t -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = t / l;
    }
    for (std::size_t i = 0; i < j; ++i) a[i * n + j] = 0.0;
  }
  return true;
}

inline std::vector<double> cholesky_solve(const std::vector<double>& l, std::size_t n, std::vector<double> b) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) b[i] -= l[i * n + k] * b[k];
    b[i] /= l[i * n + i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t k = ii + 1; k < n; ++k) b[ii] -= l[k * n + ii] * b[k];
    b[ii] /= l[ii * n + ii];
  }
  return b;
}

inline double sum_sq(const std::vector<double>& r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return s;
}

}  // namespace detail

/// Unscaled covariance estimate s^2 (J^T J)^-1 with s^2 = cost / (m - n).
/// Returns nullopt when J^T J is numerically singular.
inline std::optional<std::vector<double>> lsq_covariance(const std::vector<double>& jac, std::size_t m, std::size_t n,
                                                         double cost) {
  std::vector<double> jtj(n * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) jtj[a * n + b] += jac[i * n + a] * jac[i * n + b];
  if (!detail::cholesky(jtj, n, 1e-14)) return std::nullopt;
  const double s2 = m > n ? cost / static_cast<double>(m - n) : 0.0;
  std::vector<double> cov(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> e(n, 0.0);
    e[j] = 1.0;
    const auto col = detail::cholesky_solve(jtj, n, e);
    for (std::size_t i = 0; i < n; ++i) cov[i * n + j] = s2 * col[i];
  }
  return cov;
}

/// Levenberg-Marquardt with Marquardt diagonal scaling. Trial points are
/// clamped into the box; rejected steps raise lambda, accepted ones lower it.
inline LsqResult levenberg_marquardt(const LsqProblem& prob, std::vector<double> p0, const LsqOptions& opt = {}) {
  const std::size_t n = prob.n_params, m = prob.n_residuals;
  if (n == 0 || p0.size() != n) throw InvalidInput("levenberg_marquardt: parameter count mismatch");
  if (m < n) throw InvalidInput("levenberg_marquardt: fewer residuals than parameters");
  if (!prob.eval) throw InvalidInput("levenberg_marquardt: no residual function");
  auto lo = prob.lower.empty() ? std::vector<double>(n, -std::numeric_limits<double>::infinity()) : prob.lower;
  auto hi = prob.upper.empty() ? std::vector<double>(n, std::numeric_limits<double>::infinity()) : prob.upper;
  if (lo.size() != n || hi.size() != n) throw InvalidInput("levenberg_marquardt: bounds size mismatch");
  auto clamp = [&](std::vector<double>& p) {
    for (std::size_t j = 0; j < n; ++j) p[j] = std::clamp(p[j], lo[j], hi[j]);
  };
  clamp(p0);

  LsqResult res;
  std::vector<double> r(m), jac(m * n), r_trial(m);
  prob.eval(p0, r, &jac);
  double cost = detail::sum_sq(r);
  if (!std::isfinite(cost)) throw NumericError("levenberg_marquardt: non-finite residuals at the starting point");
  res.cost_history.push_back(cost);
  double lambda = opt.lambda0;
  std::vector<double> p = p0;

  for (int it = 0; it < opt.max_iter; ++it) {
    res.n_iter = it + 1;
    std::vector<double> jtj(n * n, 0.0), g(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t a = 0; a < n; ++a) {
        const double ja = jac[i * n + a];
        g[a] += ja * r[i];
        for (std::size_t b = 0; b <= a; ++b) jtj[a * n + b] += ja * jac[i * n + b];
      }
    }
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < a; ++b) jtj[b * n + a] = jtj[a * n + b];

    // Cosine between the residual vector and each Jacobian column.
    double gscaled = 0.0;
    const double rnorm = std::sqrt(cost);
    for (std::size_t a = 0; a < n; ++a) {
      const double cn = std::sqrt(jtj[a * n + a]);
      if (cn > 0.0 && rnorm > 0.0) gscaled = std::max(gscaled, std::abs(g[a]) / (cn * rnorm));
    }
    if (cost == 0.0 || gscaled < opt.gtol) {
      res.converged = true;
      res.message = cost == 0.0 ? "zero residual" : "gradient below tolerance";
      break;
    }

    bool accepted = false;
    while (!accepted) {
      std::vector<double> a = jtj;
      for (std::size_t j = 0; j < n; ++j) a[j * n + j] += lambda * std::max(jtj[j * n + j], 1e-300);
      std::vector<double> neg_g(n);
      for (std::size_t j = 0; j < n; ++j) neg_g[j] = -g[j];
      std::vector<double> trial = p;
      bool solved = detail::cholesky(a, n, 0.0);
      if (solved) {
        const auto step = detail::cholesky_solve(a, n, neg_g);
        for (std::size_t j = 0; j < n; ++j) trial[j] += step[j];
        clamp(trial);
        prob.eval(trial, r_trial, nullptr);
      }
      const double c_trial = solved ? detail::sum_sq(r_trial) : std::numeric_limits<double>::infinity();
      if (std::isfinite(c_trial) && c_trial < cost) {
        const double rel = (cost - c_trial) / cost;
        p = trial;
        cost = c_trial;
        prob.eval(p, r, &jac);
        res.cost_history.push_back(cost);
        lambda = std::max(lambda / opt.lambda_down, 1e-15);
        accepted = true;
        if (rel < opt.ftol) {
          res.converged = true;
          res.message = "relative cost change below tolerance";
        }
      } else {
        lambda *= opt.lambda_up;
        if (lambda > 1e16) {
          // No descent possible at machine precision: p is a stationary point.
          res.converged = true;
          res.message = "no further decrease possible";
          break;
        }
      }
    }
    if (res.converged) break;
  }
  if (!res.converged) res.message = "maximum iterations reached";

  res.params = p;
  res.residuals = r;
  res.cost = cost;
  if (auto cov = lsq_covariance(jac, m, n, cost)) {
    res.covariance = std::move(*cov);
  } else {
    res.converged = false;
    res.message += "; normal matrix singular, parameters not identifiable";
  }
  return res;
}

}  // namespace ndepr
