#ifndef BAL_DETAIL_BFGS_HPP
#define BAL_DETAIL_BFGS_HPP

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>

namespace bal::detail {

struct BfgsOptions {
  int max_iterations = 200;
  double grad_tol = 1e-5;
  double f_tol = 1e-9;
  double max_step = 2.0;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  double projected_grad_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool ok = false;
};

// Objective returns f and writes the gradient; a non-finite f marks an
// infeasible point and makes the line search back off.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// Box-constrained quasi-Newton minimization by projection onto [lo, hi].
inline BfgsResult minimize_bfgs_box(const Objective& fn, Eigen::VectorXd x0,
                                    const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                    const BfgsOptions& opt = {}) {
  const auto n = x0.size();
  auto project = [&](Eigen::VectorXd v) { return v.cwiseMax(lo).cwiseMin(hi).eval(); };
  auto pg_norm = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
    return (project(x - g) - x).lpNorm<Eigen::Infinity>();
  };

  BfgsResult res;
  Eigen::VectorXd x = project(std::move(x0));
  Eigen::VectorXd g(n);
  double f = fn(x, g);
  if (!std::isfinite(f)) {
    res.x = x;
    return res;
  }
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd g_new(n);

  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    if (pg_norm(x, g) <= opt.grad_tol) break;

    Eigen::VectorXd p = -H * g;
    // Variables pinned at a bound with the gradient pushing outward stay put.
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((x(i) <= lo(i) && g(i) > 0.0) || (x(i) >= hi(i) && g(i) < 0.0)) p(i) = 0.0;
    }
    if (g.dot(p) >= 0.0) {
      H.setIdentity();
      p = -g;
    }
    const double pn = p.lpNorm<Eigen::Infinity>();
    if (pn > opt.max_step) p *= opt.max_step / pn;

    double t = 1.0;
    Eigen::VectorXd x_new;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = project(x + t * p);
      f_new = fn(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * g.dot(x_new - x)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    const double df = f - f_new;
    x = x_new;
    g = g_new;
    f = f_new;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) +
          rho * s * s.transpose();
    }
    if (df <= opt.f_tol * (1.0 + std::abs(f))) {
      ++it;
      break;
    }
  }
  res.x = x;
  res.f = f;
  res.projected_grad_norm = pg_norm(x, g);
  res.iterations = it;
  res.ok = true;
  return res;
}

}  // namespace bal::detail

#endif  // BAL_DETAIL_BFGS_HPP
