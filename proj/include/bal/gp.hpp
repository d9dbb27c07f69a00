#ifndef BAL_GP_HPP
#define BAL_GP_HPP

// Noise-free Gaussian-process regression with a constant prior mean and an
// anisotropic Gaussian (squared-exponential) kernel
//
//   k(x, x') = sigma0^2 exp(-1/2 sum_r (x_r - x'_r)^2 / l_r^2).
//
// A GPModel holds its hyperparameters in the units of the data it was built
// from. fit() optimizes in a standardized space and converts back, so the
// stored model never needs to know about the scaling.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>

#include "bal/detail/bfgs.hpp"
#include "bal/errors.hpp"
#include "bal/lowdisc.hpp"

namespace bal {

struct Hyperparams {
  double beta = 0.0;
  double sigma0 = 1.0;
  Vector lengthscales;
};

/// Diagonal jitter, relative to sigma0^2. Starts small and escalates on
/// factorization failure.
struct JitterPolicy {
  double start = 1e-10;
  double max = 1e-4;
  double factor = 10.0;
};

inline double kernel(const Vector& x, const Vector& xp, const Hyperparams& h) {
  const double r2 = ((x - xp).array() / h.lengthscales.array()).square().sum();
  return h.sigma0 * h.sigma0 * std::exp(-0.5 * r2);
}

/// Kernel matrix between the rows of A and the rows of B.
inline Matrix cross_kernel(const Matrix& A, const Matrix& B, const Hyperparams& h) {
  const Eigen::ArrayXd inv_l = h.lengthscales.array().inverse();
  const Matrix As = A.array().rowwise() * inv_l.transpose();
  const Matrix Bs = B.array().rowwise() * inv_l.transpose();
  Matrix D = -2.0 * As * Bs.transpose();
  D.colwise() += As.rowwise().squaredNorm();
  D.rowwise() += Bs.rowwise().squaredNorm().transpose();
  const double s2 = h.sigma0 * h.sigma0;
  return (s2 * (-0.5 * D.array().max(0.0)).exp()).matrix();
}

namespace detail {

struct Factor {
  Eigen::LLT<Matrix> llt;
  double jitter = 0.0;  // absolute value added to the diagonal
};

// Cholesky of K + jitter*I, escalating jitter until the factor is usable.
inline std::optional<Factor> factorize(const Matrix& K, double sigma0_sq, const JitterPolicy& jp) {
  const auto n = K.rows();
  for (double rel = jp.start; rel <= jp.max * (1.0 + 1e-9); rel *= jp.factor) {
    Factor f;
    f.jitter = rel * sigma0_sq;
    Matrix Kj = K;
    Kj.diagonal().array() += f.jitter;
    f.llt.compute(Kj);
    if (f.llt.info() != Eigen::Success) continue;
    const auto diag = f.llt.matrixLLT().diagonal();
    if (n > 0 && (diag.minCoeff() <= 0.0 || !diag.allFinite())) continue;
    return f;
  }
  return std::nullopt;
}

inline void require_distinct_rows(const Matrix& X, double tol = 1e-12) {
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < X.rows(); ++j) {
      if ((X.row(i) - X.row(j)).lpNorm<Eigen::Infinity>() <= tol) {
        throw std::invalid_argument("GP design has duplicate rows " + std::to_string(i) +
                                    " and " + std::to_string(j));
      }
    }
  }
}

inline double log_det_from_llt(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace detail

/// -1/2 [(Y-beta)^T K^-1 (Y-beta) + log|K| + n log 2 pi], K including jitter.
inline double log_marginal_likelihood(const Hyperparams& h, const Matrix& X, const Vector& Y,
                                      const JitterPolicy& jp = {}) {
  if (X.rows() < 1 || X.rows() != Y.size()) {
    throw std::invalid_argument("log_marginal_likelihood: need n >= 1 matching rows");
  }
  const Matrix K = cross_kernel(X, X, h);
  auto f = detail::factorize(K, h.sigma0 * h.sigma0, jp);
  if (!f) throw FitError("log_marginal_likelihood: kernel matrix not positive definite");
  const Vector r = Y.array() - h.beta;
  const Vector a = f->llt.solve(r);
  const double n = static_cast<double>(Y.size());
  return -0.5 * (r.dot(a) + detail::log_det_from_llt(f->llt) + n * std::log(2.0 * std::numbers::pi));
}

/// LML with beta profiled out by generalized least squares, as a function of
/// theta = (log sigma0, log l_1, ..., log l_d). Returns -inf when the kernel
/// cannot be factorized. grad (optional) receives d LML / d theta.
inline double profiled_log_marginal_likelihood(const Vector& theta, const Matrix& X,
                                               const Vector& Y, Vector* grad = nullptr,
                                               double* beta_out = nullptr,
                                               const JitterPolicy& jp = {}) {
  const auto n = X.rows();
  const auto d = X.cols();
  Hyperparams h;
  h.sigma0 = std::exp(theta(0));
  h.lengthscales = theta.tail(d).array().exp();
  const double s2 = h.sigma0 * h.sigma0;
  const Matrix K = cross_kernel(X, X, h);
  auto f = detail::factorize(K, s2, jp);
  if (!f) return -std::numeric_limits<double>::infinity();

  const Vector ones = Vector::Ones(n);
  const Vector kinv_one = f->llt.solve(ones);
  const Vector kinv_y = f->llt.solve(Y);
  const double beta = ones.dot(kinv_y) / ones.dot(kinv_one);
  const Vector r = Y.array() - beta;
  const Vector alpha = kinv_y - beta * kinv_one;
  const double quad = r.dot(alpha);
  const double lml = -0.5 * (quad + detail::log_det_from_llt(f->llt) +
                             static_cast<double>(n) * std::log(2.0 * std::numbers::pi));
  if (beta_out) *beta_out = beta;

  if (grad) {
    grad->resize(d + 1);
    // dLML/dtheta = 1/2 tr((alpha alpha^T - K^-1) dK/dtheta); beta drops out
    // because the profiled beta is stationary.
    const Matrix Kinv = f->llt.solve(Matrix::Identity(n, n));
    const Matrix W = alpha * alpha.transpose() - Kinv;
    (*grad)(0) = quad - static_cast<double>(n);
    for (Eigen::Index r_dim = 0; r_dim < d; ++r_dim) {
      const double l2 = h.lengthscales(r_dim) * h.lengthscales(r_dim);
      double acc = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
          const double diff = X(i, r_dim) - X(j, r_dim);
          acc += W(i, j) * K(i, j) * diff * diff;
        }
      }
      (*grad)(r_dim + 1) = 0.5 * acc / l2;
    }
  }
  return lml;
}

struct Prediction {
  Vector mean;
  Vector std;
};

struct FitInfo {
  double log_marginal_likelihood = std::numeric_limits<double>::quiet_NaN();
  double projected_grad_norm = std::numeric_limits<double>::quiet_NaN();
  int successful_starts = 0;
  int iterations = 0;
};

/// A conditioned GP. Immutable once built; predict is safe to call
/// concurrently.
class GPModel {
 public:
  static GPModel build(Matrix X, Vector Y, Hyperparams h, const JitterPolicy& jp = {}) {
    if (X.rows() < 1 || X.rows() != Y.size()) {
      throw std::invalid_argument("GPModel::build: need n >= 1 rows matching Y");
    }
    if (h.lengthscales.size() != X.cols()) {
      throw std::invalid_argument("GPModel::build: lengthscale count != input dimension");
    }
    if (!(h.sigma0 > 0.0) || !(h.lengthscales.array() > 0.0).all()) {
      throw std::invalid_argument("GPModel::build: sigma0 and lengthscales must be > 0");
    }
    detail::require_distinct_rows(X);
    GPModel m;
    const Matrix K = cross_kernel(X, X, h);
    auto f = detail::factorize(K, h.sigma0 * h.sigma0, jp);
    if (!f) {
      throw FitError("GPModel::build: factorization failed up to jitter " +
                     std::to_string(jp.max) + " * sigma0^2 (n = " + std::to_string(X.rows()) + ")");
    }
    m.jitter_ = f->jitter;
    m.chol_ = f->llt.matrixL();
    m.alpha_ = f->llt.solve((Y.array() - h.beta).matrix());
    m.X_ = std::move(X);
    m.Y_ = std::move(Y);
    m.hyper_ = std::move(h);
    return m;
  }

  const Hyperparams& hyper() const noexcept { return hyper_; }
  const Matrix& X() const noexcept { return X_; }
  const Vector& Y() const noexcept { return Y_; }
  const Matrix& chol() const noexcept { return chol_; }
  const Vector& alpha() const noexcept { return alpha_; }
  double jitter() const noexcept { return jitter_; }
  Eigen::Index size() const noexcept { return X_.rows(); }
  Eigen::Index dimension() const noexcept { return X_.cols(); }
  const FitInfo& fit_info() const noexcept { return info_; }
  void set_fit_info(const FitInfo& info) { info_ = info; }

  /// Posterior mean and standard deviation at the rows of Xq.
  Prediction predict(const Matrix& Xq, Eigen::Index chunk = 2048) const {
    Prediction p;
    p.mean.resize(Xq.rows());
    p.std.resize(Xq.rows());
    const double s2 = hyper_.sigma0 * hyper_.sigma0;
    for (Eigen::Index start = 0; start < Xq.rows(); start += chunk) {
      const Eigen::Index m = std::min(chunk, Xq.rows() - start);
      const Matrix Kq = cross_kernel(Xq.middleRows(start, m), X_, hyper_);
      p.mean.segment(start, m) = (Kq * alpha_).array() + hyper_.beta;
      Matrix V = Kq.transpose();
      chol_.triangularView<Eigen::Lower>().solveInPlace(V);
      p.std.segment(start, m) =
          (s2 - V.colwise().squaredNorm().transpose().array()).max(0.0).sqrt().matrix();
    }
    return p;
  }

  /// Posterior covariance k_n(a_i, b_j) between the rows of A and B.
  Matrix posterior_covariance(const Matrix& A, const Matrix& B) const {
    Matrix Va = cross_kernel(A, X_, hyper_).transpose();
    Matrix Vb = cross_kernel(B, X_, hyper_).transpose();
    chol_.triangularView<Eigen::Lower>().solveInPlace(Va);
    chol_.triangularView<Eigen::Lower>().solveInPlace(Vb);
    return cross_kernel(A, B, hyper_) - Va.transpose() * Vb;
  }

  double log_marginal_likelihood() const {
    const Vector r = Y_.array() - hyper_.beta;
    const double logdet = 2.0 * chol_.diagonal().array().log().sum();
    return -0.5 * (r.dot(alpha_) + logdet +
                   static_cast<double>(size()) * std::log(2.0 * std::numbers::pi));
  }

 private:
  GPModel() = default;
  Hyperparams hyper_;
  Matrix X_;
  Vector Y_;
  Matrix chol_;
  Vector alpha_;
  double jitter_ = 0.0;
  FitInfo info_;
};

struct FitConfig {
  int restarts = 5;
  std::uint64_t seed = 0;
  bool standardize = true;
  JitterPolicy jitter;
  detail::BfgsOptions optimizer;
  // Skip optimization and condition on these hyperparameters (data units).
  std::optional<Hyperparams> fixed;
  // Replaces the first start (data units), e.g. the previous iteration's optimum.
  std::optional<Hyperparams> warm_start;
  // Box for the optimizer, in standardized units.
  double log_sigma0_min = std::log(1e-3);
  double log_sigma0_max = std::log(1e3);
  double log_lengthscale_min = std::log(1e-2);
  double log_lengthscale_max = std::log(1e2);
};

/// Maximum-likelihood fit: multi-start projected BFGS on log sigma0 and log
/// lengthscales with beta profiled out. The best start is kept.
inline GPModel fit(const Matrix& X, const Vector& Y, const FitConfig& cfg = {}) {
  const auto n = X.rows();
  const auto d = X.cols();
  if (n < 2 || n != Y.size()) throw std::invalid_argument("fit: need n >= 2 rows matching Y");
  detail::require_distinct_rows(X);

  if (cfg.fixed) return GPModel::build(X, Y, *cfg.fixed, cfg.jitter);

  Eigen::RowVectorXd x_shift = Eigen::RowVectorXd::Zero(d);
  Eigen::RowVectorXd x_scale = Eigen::RowVectorXd::Ones(d);
  double y_shift = 0.0, y_scale = 1.0;
  if (cfg.standardize) {
    x_shift = X.colwise().mean();
    for (Eigen::Index j = 0; j < d; ++j) {
      const double sd = std::sqrt((X.col(j).array() - x_shift(j)).square().sum() / (n - 1));
      if (sd > 0.0) x_scale(j) = sd;
    }
    y_shift = Y.mean();
    const double sd = std::sqrt((Y.array() - y_shift).square().sum() / (n - 1));
    // A constant response gets a negligible scale, so the fitted amplitude
    // collapses with the data spread instead of defaulting to unit size.
    y_scale = sd > 1e-14 * std::max(1.0, std::abs(y_shift)) ? sd : 1e-12 * std::max(1.0, std::abs(y_shift));
  }
  const Matrix Xs = (X.rowwise() - x_shift).array().rowwise() / x_scale.array();
  const Vector Ys = (Y.array() - y_shift) / y_scale;

  Vector lo(d + 1), hi(d + 1);
  lo(0) = cfg.log_sigma0_min;
  hi(0) = cfg.log_sigma0_max;
  lo.tail(d).setConstant(cfg.log_lengthscale_min);
  hi.tail(d).setConstant(cfg.log_lengthscale_max);

  const Eigen::RowVectorXd range = (Xs.colwise().maxCoeff() - Xs.colwise().minCoeff()).cwiseMax(1e-3);

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(std::log(0.1), std::log(10.0));

  detail::Objective obj = [&](const Vector& theta, Vector& g) {
    const double v = profiled_log_marginal_likelihood(theta, Xs, Ys, &g, nullptr, cfg.jitter);
    if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
    g = -g;
    return -v;
  };

  detail::BfgsResult best;
  FitInfo info;
  const int starts = std::max(1, cfg.restarts);
  for (int s = 0; s < starts; ++s) {
    Vector theta0(d + 1);
    if (s == 0 && cfg.warm_start) {
      theta0(0) = std::log(cfg.warm_start->sigma0 / y_scale);
      theta0.tail(d) = (cfg.warm_start->lengthscales.array() / x_scale.transpose().array()).log();
    } else if (s == 0) {
      theta0(0) = 0.0;
      theta0.tail(d) = range.transpose().array().log();
    } else {
      theta0(0) = 0.0;
      for (Eigen::Index r = 0; r < d; ++r) theta0(r + 1) = std::log(range(r)) + unif(rng);
    }
    auto res = detail::minimize_bfgs_box(obj, theta0, lo, hi, cfg.optimizer);
    if (!res.ok) continue;
    ++info.successful_starts;
    info.iterations += res.iterations;
    if (res.f < best.f) best = std::move(res);
  }
  if (info.successful_starts == 0) {
    throw FitError("fit: no restart produced a factorizable kernel matrix (n = " +
                   std::to_string(n) + ", d = " + std::to_string(d) + ")");
  }

  double beta_s = 0.0;
  profiled_log_marginal_likelihood(best.x, Xs, Ys, nullptr, &beta_s, cfg.jitter);
  Hyperparams h;
  h.sigma0 = std::exp(best.x(0)) * y_scale;
  h.lengthscales = best.x.tail(d).array().exp() * x_scale.transpose().array();
  h.beta = y_shift + y_scale * beta_s;

  GPModel model = GPModel::build(X, Y, std::move(h), cfg.jitter);
  info.log_marginal_likelihood = model.log_marginal_likelihood();
  info.projected_grad_norm = best.projected_grad_norm;
  model.set_fit_info(info);
  return model;
}

}  // namespace bal

#endif  // BAL_GP_HPP
