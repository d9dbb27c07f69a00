#ifndef BAL_POSTERIOR_HPP
#define BAL_POSTERIOR_HPP

// Posterior statistics of the response CDF, CCDF and PDF implied by a GP
// surrogate, estimated by averaging over a fixed pool of input samples.
//
// For a pool point with posterior mean m and std-dev s, z = (y - m) / s:
//   CDF summand        Phi(z)
//   CCDF summand       Phi(-z)
//   PDF summand        phi(z) / s
//   std-dev bound      sqrt(Phi(z) Phi(-z))
// The std-dev bound comes from bounding the indicator covariance by the
// product of pointwise std-devs, and is shared by the CDF and the CCDF.
//
// Zero-std convention: when s <= zero_sigma_tol the indicator is treated as
// deterministic, Phi(z) := step(y - m) with value 1/2 at y == m, and the PDF
// summand is 0.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "bal/errors.hpp"
#include "bal/gp.hpp"
#include "bal/stats.hpp"

namespace bal {

struct PosteriorField {
  Vector M;
  Vector Xi;
  double zero_sigma_tol = 0.0;

  Eigen::Index size() const noexcept { return M.size(); }
};

/// Posterior mean/std of the surrogate at each pool row.
inline PosteriorField evaluate_field(const GPModel& model, const Matrix& pool) {
  auto pred = model.predict(pool);
  PosteriorField f;
  f.M = std::move(pred.mean);
  f.Xi = std::move(pred.std);
  f.zero_sigma_tol = 1e-12 * model.hyper().sigma0;
  return f;
}

struct CurveGrid {
  Vector y;
  double y_min = 0.0;
  double y_max = 0.0;

  static CurveGrid uniform(double y_min, double y_max, int h) {
    if (h < 1) throw std::invalid_argument("CurveGrid: need h >= 1");
    if (!(y_max > y_min)) throw DegenerateGridError("CurveGrid: y_max must exceed y_min");
    CurveGrid g;
    g.y_min = y_min;
    g.y_max = y_max;
    g.y.resize(h + 1);
    const double dy = (y_max - y_min) / h;
    for (int t = 0; t <= h; ++t) g.y(t) = y_min + t * dy;
    g.y(h) = y_max;
    return g;
  }
  int intervals() const noexcept { return static_cast<int>(y.size()) - 1; }
};

namespace detail {

// k-th order statistic (1-based) of v.
inline double order_statistic(std::vector<double> v, std::size_t k) {
  k = std::clamp<std::size_t>(k, 1, v.size());
  auto it = v.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(v.begin(), it, v.end());
  return *it;
}

// Empirical quantile as the ceil(q N)-th order statistic.
inline std::size_t quantile_rank(double q, std::size_t n) {
  const double r = std::ceil(q * static_cast<double>(n) - 1e-9);
  return static_cast<std::size_t>(std::max(1.0, r));
}

struct Summands {
  double cdf;
  double ccdf;
  double pdf;
};

inline Summands summands(double y, double m, double s, double tol) noexcept {
  if (s <= tol) {
    if (y > m) return {1.0, 0.0, 0.0};
    if (y < m) return {0.0, 1.0, 0.0};
    return {0.5, 0.5, 0.0};
  }
  const double z = (y - m) / s;
  return {std_normal_cdf(z), std_normal_cdf(-z), std_normal_pdf(z) / s};
}

}  // namespace detail

/// y_min: p-quantile of M - lambda*Xi; y_max: (1-p)-quantile of M + lambda*Xi.
inline CurveGrid calibrate_grid(const PosteriorField& f, double p, double lambda, int h) {
  if (!(p > 0.0 && p < 0.5)) throw std::invalid_argument("calibrate_grid: need 0 < p < 0.5");
  if (!(lambda >= 0.0)) throw std::invalid_argument("calibrate_grid: need lambda >= 0");
  if (h < 2) throw std::invalid_argument("calibrate_grid: need h >= 2");
  const auto n = static_cast<std::size_t>(f.size());
  if (n == 0) throw std::invalid_argument("calibrate_grid: empty field");
  std::vector<double> lo(n), hi(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    lo[j] = f.M(jj) - lambda * f.Xi(jj);
    hi[j] = f.M(jj) + lambda * f.Xi(jj);
  }
  const double y_min = detail::order_statistic(std::move(lo), detail::quantile_rank(p, n));
  const double y_max = detail::order_statistic(std::move(hi), detail::quantile_rank(1.0 - p, n));
  const double scale = std::max({1.0, std::abs(y_min), std::abs(y_max)});
  if (!(y_max - y_min > 1e-12 * scale)) {
    throw DegenerateGridError("calibrate_grid: response range collapsed to a point (y = " +
                              std::to_string(y_min) + "); the surrogate is constant");
  }
  return CurveGrid::uniform(y_min, y_max, h);
}

inline double mean_cdf(const PosteriorField& f, double y) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < f.size(); ++j) acc += detail::summands(y, f.M(j), f.Xi(j), f.zero_sigma_tol).cdf;
  return acc / static_cast<double>(f.size());
}

inline double mean_ccdf(const PosteriorField& f, double y) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < f.size(); ++j) acc += detail::summands(y, f.M(j), f.Xi(j), f.zero_sigma_tol).ccdf;
  return acc / static_cast<double>(f.size());
}

inline double mean_pdf(const PosteriorField& f, double y) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < f.size(); ++j) acc += detail::summands(y, f.M(j), f.Xi(j), f.zero_sigma_tol).pdf;
  return acc / static_cast<double>(f.size());
}

inline double sigma_bar(const PosteriorField& f, double y) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < f.size(); ++j) {
    const auto s = detail::summands(y, f.M(j), f.Xi(j), f.zero_sigma_tol);
    acc += std::sqrt(s.cdf * s.ccdf);
  }
  return acc / static_cast<double>(f.size());
}

struct EstimatorVariances {
  double var_mean_cdf = 0.0;
  double var_sigma_bar = 0.0;
};

/// Sampling variance of the pool averages for mean_cdf and sigma_bar:
/// sum_j (term_j - mean)^2 / (N (N - 1)).
inline EstimatorVariances estimator_variances(const PosteriorField& f, double y) {
  const auto n = f.size();
  if (n < 2) throw std::invalid_argument("estimator_variances: need N >= 2");
  std::vector<double> c(static_cast<std::size_t>(n)), s(static_cast<std::size_t>(n));
  double mc = 0.0, ms = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto t = detail::summands(y, f.M(j), f.Xi(j), f.zero_sigma_tol);
    c[static_cast<std::size_t>(j)] = t.cdf;
    s[static_cast<std::size_t>(j)] = std::sqrt(t.cdf * t.ccdf);
    mc += t.cdf;
    ms += s[static_cast<std::size_t>(j)];
  }
  const double nd = static_cast<double>(n);
  mc /= nd;
  ms /= nd;
  double vc = 0.0, vs = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) {
    vc += (c[j] - mc) * (c[j] - mc);
    vs += (s[j] - ms) * (s[j] - ms);
  }
  return {vc / (nd * (nd - 1.0)), vs / (nd * (nd - 1.0))};
}

struct CovBounds {
  Vector cov_cdf;
  Vector cov_ccdf;
};

/// sigma_bar / mean, elementwise. Means below 1e-12 give a CoV of 0: such grid
/// points lie outside the calibrated probability band.
inline CovBounds cov_bounds(const Vector& mean_cdf_v, const Vector& mean_ccdf_v,
                            const Vector& sigma_bar_v, double min_mean = 1e-12) {
  CovBounds b;
  b.cov_cdf.resize(mean_cdf_v.size());
  b.cov_ccdf.resize(mean_ccdf_v.size());
  for (Eigen::Index t = 0; t < mean_cdf_v.size(); ++t) {
    b.cov_cdf(t) = mean_cdf_v(t) < min_mean ? 0.0 : sigma_bar_v(t) / mean_cdf_v(t);
    b.cov_ccdf(t) = mean_ccdf_v(t) < min_mean ? 0.0 : sigma_bar_v(t) / mean_ccdf_v(t);
  }
  return b;
}

struct CurveEstimate {
  CurveGrid grid;
  Vector mean_cdf;
  Vector mean_ccdf;
  Vector mean_pdf;
  Vector sigma_bar;
  Vector cov_cdf;
  Vector cov_ccdf;
  Vector var_mean_cdf;
  Vector var_sigma_bar;

  /// H(y_t) = max(cov_cdf, cov_ccdf).
  Vector h_values() const { return cov_cdf.cwiseMax(cov_ccdf); }
};

/// All curve statistics on a grid in one pass over the pool per grid point.
inline CurveEstimate estimate_curves(const PosteriorField& f, const CurveGrid& grid) {
  const auto T = grid.y.size();
  const auto n = f.size();
  if (n < 2) throw std::invalid_argument("estimate_curves: need N >= 2");
  CurveEstimate e;
  e.grid = grid;
  e.mean_cdf.resize(T);
  e.mean_ccdf.resize(T);
  e.mean_pdf.resize(T);
  e.sigma_bar.resize(T);
  e.var_mean_cdf.resize(T);
  e.var_sigma_bar.resize(T);
  const double nd = static_cast<double>(n);
  std::vector<double> c(static_cast<std::size_t>(n)), s(static_cast<std::size_t>(n));
  for (Eigen::Index t = 0; t < T; ++t) {
    const double y = grid.y(t);
    double sc = 0.0, scc = 0.0, sp = 0.0, ss = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto v = detail::summands(y, f.M(j), f.Xi(j), f.zero_sigma_tol);
      const double sb = std::sqrt(v.cdf * v.ccdf);
      c[static_cast<std::size_t>(j)] = v.cdf;
      s[static_cast<std::size_t>(j)] = sb;
      sc += v.cdf;
      scc += v.ccdf;
      sp += v.pdf;
      ss += sb;
    }
    const double mc = sc / nd, ms = ss / nd;
    double vc = 0.0, vs = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      vc += (c[j] - mc) * (c[j] - mc);
      vs += (s[j] - ms) * (s[j] - ms);
    }
    e.mean_cdf(t) = mc;
    e.mean_ccdf(t) = scc / nd;
    e.mean_pdf(t) = sp / nd;
    e.sigma_bar(t) = ms;
    e.var_mean_cdf(t) = vc / (nd * (nd - 1.0));
    e.var_sigma_bar(t) = vs / (nd * (nd - 1.0));
  }
  auto cov = cov_bounds(e.mean_cdf, e.mean_ccdf, e.sigma_bar);
  e.cov_cdf = std::move(cov.cov_cdf);
  e.cov_ccdf = std::move(cov.cov_ccdf);
  return e;
}

/// Exact posterior covariance of the indicators 1{g(x) <= y} and 1{g(x') <= y}:
/// Phi2(a, b; rho) - Phi(a) Phi(b). Verification scale only.
inline double indicator_cov(const GPModel& model, const Vector& x, const Vector& xp, double y) {
  Matrix pts(2, x.size());
  pts.row(0) = x.transpose();
  pts.row(1) = xp.transpose();
  const auto pred = model.predict(pts);
  const Matrix k = model.posterior_covariance(pts, pts);
  const double tol = 1e-12 * model.hyper().sigma0;
  const double s1 = pred.std(0), s2 = pred.std(1);
  if (s1 <= tol || s2 <= tol) return 0.0;
  const double a = (y - pred.mean(0)) / s1;
  const double b = (y - pred.mean(1)) / s2;
  const double rho = std::clamp(k(0, 1) / (s1 * s2), -1.0, 1.0);
  return bivariate_normal_cdf(a, b, rho) - std_normal_cdf(a) * std_normal_cdf(b);
}

/// Exact posterior variance of the CDF at y over a small pool, as the double
/// average of indicator_cov. O(N^2) bivariate-normal evaluations.
inline double exact_cdf_variance(const GPModel& model, const Matrix& pool, double y) {
  const auto n = pool.rows();
  const auto pred = model.predict(pool);
  const Matrix k = model.posterior_covariance(pool, pool);
  const double tol = 1e-12 * model.hyper().sigma0;
  Vector a(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    a(j) = pred.std(j) <= tol ? std::numeric_limits<double>::quiet_NaN() : (y - pred.mean(j)) / pred.std(j);
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::isnan(a(i))) continue;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::isnan(a(j))) continue;
      const double rho = i == j ? 1.0 : std::clamp(k(i, j) / (pred.std(i) * pred.std(j)), -1.0, 1.0);
      acc += bivariate_normal_cdf(a(i), a(j), rho) - std_normal_cdf(a(i)) * std_normal_cdf(a(j));
    }
  }
  return acc / (static_cast<double>(n) * static_cast<double>(n));
}

}  // namespace bal

#endif  // BAL_POSTERIOR_HPP
