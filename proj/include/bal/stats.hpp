#ifndef BAL_STATS_HPP
#define BAL_STATS_HPP

// Normal special functions and the independent marginal family used for the
// random inputs (normal, lognormal, uniform).

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bal {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
inline constexpr double kSqrt2 = std::numbers::sqrt2;

inline double std_normal_pdf(double z) noexcept {
  return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

// erfc keeps full relative precision in the lower tail, which is where the
// CoV bounds are evaluated.
inline double std_normal_cdf(double z) noexcept {
  if (std::isnan(z)) return z;
  return 0.5 * std::erfc(-z / kSqrt2);
}

/// Quantile of the standard normal. Wichura's AS241 (PPND16) followed by one
/// Halley step against std_normal_cdf.
inline double std_normal_inverse_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("std_normal_inverse_cdf: p must lie in (0,1), got " +
                            std::to_string(p));
  }
  const double q = p - 0.5;
  double z;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    z = q *
        (((((((2509.0809287301226727 * r + 33430.575583588128105) * r +
              67265.770927008700853) * r + 45921.953931549871457) * r +
            13731.693765509461125) * r + 1971.5909503065514427) * r +
          133.14166789178437745) * r + 3.387132872796366608) /
        (((((((5226.495278852545925 * r + 28729.085735721942674) * r +
              39307.89580009271061) * r + 21213.794301586595867) * r +
            5394.1960214247511077) * r + 687.1870074920579083) * r +
          42.313330701600911252) * r + 1.0);
  } else {
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    if (r <= 5.0) {
      r -= 1.6;
      z = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r +
                0.24178072517745061177) * r + 1.27045825245236838258) * r +
              3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r +
                0.0151986665636164571966) * r + 0.14810397642748007459) * r +
              0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
    } else {
      r -= 5.0;
      z = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                0.0012426609473880784386) * r + 0.026532189526576123093) * r +
              0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r +
                1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r +
              0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
    }
    if (q < 0.0) z = -z;
  }
  // Halley refinement; the residual is taken on the smaller tail to keep
  // relative precision.
  const double err = z < 0.0 ? std_normal_cdf(z) - p : (1.0 - p) - std_normal_cdf(-z);
  const double u = err / std_normal_pdf(z);
  if (std::isfinite(u)) z -= u / (1.0 + 0.5 * z * u);
  return z;
}

namespace detail {

// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration on P_n.
template <int N>
struct GaussLegendre {
  std::array<double, N> x{};
  std::array<double, N> w{};
  GaussLegendre() {
    for (int i = 0; i < N; ++i) {
      double t = std::cos(std::numbers::pi * (i + 0.75) / (N + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = t;
        for (int k = 2; k <= N; ++k) {
          const double pk = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = pk;
        }
        dp = N * (t * p1 - p0) / (t * t - 1.0);
        const double dt = p1 / dp;
        t -= dt;
        if (std::abs(dt) < 1e-16) break;
      }
      x[i] = t;
      w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
  }
};

template <int N>
const GaussLegendre<N>& gauss_legendre() {
  static const GaussLegendre<N> rule;
  return rule;
}

// Upper orthant probability P(X > h, Y > k) for a standard bivariate normal
// with correlation r (Drezner-Wesolowsky with Genz's refinements).
template <int N>
double bvn_upper_impl(double h, double k, double r) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const auto& gl = gauss_legendre<N>();
  double hk = h * k;
  double bvn = 0.0;
  if (std::abs(r) < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(r);
    for (int i = 0; i < N; ++i) {
      const double sn = std::sin(asr * (gl.x[i] + 1.0) / 2.0);
      bvn += gl.w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
    }
    return bvn * asr / (2.0 * two_pi) + std_normal_cdf(-h) * std_normal_cdf(-k);
  }
  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (std::abs(r) < 1.0) {
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 16.0;
    bvn = a * std::exp(-(bs / as + hk) / 2.0) *
          (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
    if (hk > -160.0) {
      const double b = std::sqrt(bs);
      bvn -= std::exp(-hk / 2.0) * std::sqrt(two_pi) * std_normal_cdf(-b / a) * b *
             (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    for (int i = 0; i < N; ++i) {
      const double xs = (a * (gl.x[i] + 1.0)) * (a * (gl.x[i] + 1.0));
      const double rs = std::sqrt(1.0 - xs);
      const double asr = -(bs / xs + hk) / 2.0;
      if (asr > -100.0) {
        bvn += a * gl.w[i] * std::exp(asr) *
               (std::exp(-hk * xs / (2.0 * (1.0 + rs) * (1.0 + rs))) / rs -
                (1.0 + c * xs * (1.0 + d * xs)));
      }
    }
    bvn = -bvn / two_pi;
  }
  if (r > 0.0) return bvn + std_normal_cdf(-std::max(h, k));
  return -bvn + std::max(0.0, std_normal_cdf(-h) - std_normal_cdf(-k));
}

}  // namespace detail

/// P(Z1 <= a, Z2 <= b) for a standard bivariate normal with correlation rho.
/// Infinite thresholds are accepted.
inline double bivariate_normal_cdf(double a, double b, double rho) {
  if (!(rho >= -1.0 && rho <= 1.0)) {
    throw std::domain_error("bivariate_normal_cdf: |rho| must be <= 1");
  }
  if (a == -INFINITY || b == -INFINITY) return 0.0;
  if (a == INFINITY) return std_normal_cdf(b);
  if (b == INFINITY) return std_normal_cdf(a);
  if (rho == 1.0) return std_normal_cdf(std::min(a, b));
  if (rho == -1.0) return std::max(0.0, std_normal_cdf(a) - std_normal_cdf(-b));
  double v;
  const double ar = std::abs(rho);
  if (ar < 0.3) {
    v = detail::bvn_upper_impl<6>(-a, -b, rho);
  } else if (ar < 0.75) {
    v = detail::bvn_upper_impl<12>(-a, -b, rho);
  } else {
    v = detail::bvn_upper_impl<20>(-a, -b, rho);
  }
  return std::clamp(v, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Marginal input distributions

enum class MarginalKind { Normal, Lognormal, Uniform };

inline std::string_view to_string(MarginalKind k) {
  switch (k) {
    case MarginalKind::Normal: return "normal";
    case MarginalKind::Lognormal: return "lognormal";
    case MarginalKind::Uniform: return "uniform";
  }
  return "?";
}

/// One independent input variable.
///   Normal    (mean, std-dev)
///   Lognormal (mean, coefficient of variation)
///   Uniform   (lower, upper)
class Marginal {
 public:
  static Marginal normal(double mean, double sd) { return {MarginalKind::Normal, mean, sd}; }
  static Marginal lognormal(double mean, double cov) {
    return {MarginalKind::Lognormal, mean, cov};
  }
  static Marginal uniform(double lo, double hi) { return {MarginalKind::Uniform, lo, hi}; }

  Marginal(MarginalKind kind, double param1, double param2)
      : kind_(kind), p1_(param1), p2_(param2) {
    switch (kind_) {
      case MarginalKind::Normal:
        if (!(p2_ > 0.0)) throw std::invalid_argument("normal marginal: std-dev must be > 0");
        break;
      case MarginalKind::Lognormal:
        if (!(p1_ > 0.0)) throw std::invalid_argument("lognormal marginal: mean must be > 0");
        if (!(p2_ > 0.0)) throw std::invalid_argument("lognormal marginal: CoV must be > 0");
        log_sigma_ = std::sqrt(std::log1p(p2_ * p2_));
        log_mu_ = std::log(p1_) - 0.5 * log_sigma_ * log_sigma_;
        break;
      case MarginalKind::Uniform:
        if (!(p1_ < p2_)) throw std::invalid_argument("uniform marginal: need lower < upper");
        break;
    }
  }

  MarginalKind kind() const noexcept { return kind_; }
  double param1() const noexcept { return p1_; }
  double param2() const noexcept { return p2_; }
  // Log-space parameters (lognormal only).
  double log_mu() const noexcept { return log_mu_; }
  double log_sigma() const noexcept { return log_sigma_; }

  double cdf(double x) const noexcept {
    switch (kind_) {
      case MarginalKind::Normal: return std_normal_cdf((x - p1_) / p2_);
      case MarginalKind::Lognormal:
        if (x <= 0.0) return 0.0;
        return std_normal_cdf((std::log(x) - log_mu_) / log_sigma_);
      case MarginalKind::Uniform:
        if (x <= p1_) return 0.0;
        if (x >= p2_) return 1.0;
        return (x - p1_) / (p2_ - p1_);
    }
    return 0.0;
  }

  double pdf(double x) const noexcept {
    switch (kind_) {
      case MarginalKind::Normal: return std_normal_pdf((x - p1_) / p2_) / p2_;
      case MarginalKind::Lognormal:
        if (x <= 0.0) return 0.0;
        return std_normal_pdf((std::log(x) - log_mu_) / log_sigma_) / (x * log_sigma_);
      case MarginalKind::Uniform:
        return (x < p1_ || x > p2_) ? 0.0 : 1.0 / (p2_ - p1_);
    }
    return 0.0;
  }

  double inverse_cdf(double u) const {
    if (!(u > 0.0 && u < 1.0)) {
      throw std::domain_error("marginal inverse_cdf: probability must lie in (0,1)");
    }
    switch (kind_) {
      case MarginalKind::Normal: return p1_ + p2_ * std_normal_inverse_cdf(u);
      case MarginalKind::Lognormal:
        return std::exp(log_mu_ + log_sigma_ * std_normal_inverse_cdf(u));
      case MarginalKind::Uniform: return p1_ + u * (p2_ - p1_);
    }
    return 0.0;
  }

  friend bool operator==(const Marginal&, const Marginal&) = default;

 private:
  MarginalKind kind_;
  double p1_;
  double p2_;
  double log_mu_ = 0.0;
  double log_sigma_ = 0.0;
};

}  // namespace bal

#endif  // BAL_STATS_HPP
