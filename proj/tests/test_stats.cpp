#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "bal/lowdisc.hpp"
#include "bal/stats.hpp"

using namespace bal;

namespace {

// Oracles built from the C library's erfc and adaptive Gauss-Kronrod
// quadrature, independent of the library's own evaluation paths.
double phi_ref(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double cdf_ref(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double quad(const std::function<double(double)>& f, double a, double b) {
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-13);
}

// Phi2(a, b; rho) = int_{-inf}^{a} phi(x) Phi((b - rho x) / sqrt(1 - rho^2)) dx.
double bvn_ref(double a, double b, double rho) {
  const double s = std::sqrt(1.0 - rho * rho);
  return quad([&](double x) { return phi_ref(x) * cdf_ref((b - rho * x) / s); }, -40.0, a);
}

}  // namespace

TEST(StdNormal, CdfKnownValues) {
  EXPECT_EQ(std_normal_cdf(0.0), 0.5);
  const double oracle = quad(phi_ref, -40.0, 1.96);
  EXPECT_NEAR(oracle, 0.975002, 5e-7);
  EXPECT_NEAR(std_normal_cdf(1.96), oracle, 1e-13);
}

TEST(StdNormal, CdfMatchesQuadratureIntoTails) {
  for (double z = -8.0; z <= 8.0; z += 0.37) {
    const double oracle = z < 0 ? quad(phi_ref, -60.0, z) : 1.0 - quad(phi_ref, z, 60.0);
    EXPECT_NEAR(std_normal_cdf(z), oracle, 1e-13 + 1e-10 * oracle) << z;
  }
}

TEST(StdNormal, CdfSymmetryAndMonotonicity) {
  double prev = 0.0;
  for (double z = -8.0; z <= 8.0; z += 0.01) {
    EXPECT_NEAR(std_normal_cdf(z) + std_normal_cdf(-z), 1.0, 1e-14);
    const double v = std_normal_cdf(z);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(StdNormal, Pdf) {
  EXPECT_NEAR(std_normal_pdf(0.0), 0.3989422804014327, 1e-16);
  const long double exact = std::exp(-0.5L) / std::sqrt(2.0L * std::numbers::pi_v<long double>);
  EXPECT_NEAR(std_normal_pdf(1.0), static_cast<double>(exact), 1e-16);
  EXPECT_NEAR(std_normal_pdf(1.0), 0.241970725, 1e-9);
  for (double z : {0.3, 1.7, 4.2, 9.0}) EXPECT_EQ(std_normal_pdf(z), std_normal_pdf(-z));
}

TEST(StdNormal, InverseCdf) {
  EXPECT_EQ(std_normal_inverse_cdf(0.5), 0.0);
  // Bisection oracle on the erfc-based CDF.
  auto bisect = [](double p) {
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (cdf_ref(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  EXPECT_NEAR(bisect(1e-5), -4.26489, 1e-5);
  for (double p : {1e-300, 1e-15, 1e-8, 1e-5, 0.01, 0.2, 0.5, 0.7, 0.975002, 0.999}) {
    EXPECT_NEAR(std_normal_inverse_cdf(p), bisect(p), 1e-9 * std::max(1.0, std::abs(bisect(p)))) << p;
  }
  for (double p : {std::ldexp(1.0, -40), 0.001, 0.3, 0.49}) {
    EXPECT_NEAR(std_normal_inverse_cdf(p), -std_normal_inverse_cdf(1.0 - p), 1e-9);
  }
  EXPECT_THROW(std_normal_inverse_cdf(0.0), std::domain_error);
  EXPECT_THROW(std_normal_inverse_cdf(1.0), std::domain_error);
  EXPECT_THROW(std_normal_inverse_cdf(-0.1), std::domain_error);
}

TEST(BivariateNormal, SpecialCases) {
  for (double a : {-2.0, -0.3, 0.0, 1.1}) {
    for (double b : {-1.5, 0.4, 2.2}) {
      EXPECT_NEAR(bivariate_normal_cdf(a, b, 0.0), std_normal_cdf(a) * std_normal_cdf(b), 1e-14);
    }
    EXPECT_NEAR(bivariate_normal_cdf(a, a, 1.0), std_normal_cdf(a), 1e-14);
    EXPECT_NEAR(bivariate_normal_cdf(a, std::numeric_limits<double>::infinity(), 0.6), std_normal_cdf(a), 1e-14);
  }
  EXPECT_NEAR(bivariate_normal_cdf(0, 0, 0.5), 0.25 + std::asin(0.5) / (2.0 * std::numbers::pi), 1e-14);
  EXPECT_NEAR(bivariate_normal_cdf(0, 0, 0.5), 1.0 / 3.0, 1e-14);
  EXPECT_THROW(bivariate_normal_cdf(0, 0, 1.5), std::domain_error);
}

TEST(BivariateNormal, MatchesQuadratureOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ab(-4.0, 4.0), r(-0.999, 0.999);
  for (int k = 0; k < 300; ++k) {
    const double a = ab(rng), b = ab(rng), rho = r(rng);
    EXPECT_NEAR(bivariate_normal_cdf(a, b, rho), bvn_ref(a, b, rho), 1e-10) << a << ' ' << b << ' ' << rho;
  }
}

TEST(BivariateNormal, SymmetricAndMonotone) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ab(-3.0, 3.0), r(-0.95, 0.95);
  for (int k = 0; k < 200; ++k) {
    const double a = ab(rng), b = ab(rng), rho = r(rng);
    const double v = bivariate_normal_cdf(a, b, rho);
    EXPECT_NEAR(v, bivariate_normal_cdf(b, a, rho), 1e-15);
    EXPECT_GE(bivariate_normal_cdf(a + 0.1, b, rho), v - 1e-15);
    EXPECT_GE(bivariate_normal_cdf(a, b + 0.1, rho), v - 1e-15);
    EXPECT_GE(bivariate_normal_cdf(a, b, std::min(0.999, rho + 0.04)), v - 1e-15);
  }
}

TEST(Marginal, Examples) {
  EXPECT_EQ(Marginal::uniform(-std::numbers::pi, std::numbers::pi).cdf(0.0), 0.5);
  EXPECT_NEAR(Marginal::normal(1.0, 0.05).inverse_cdf(0.5), 1.0, 1e-15);
  const auto ln = Marginal::lognormal(100.0, 0.15);
  EXPECT_NEAR(ln.inverse_cdf(0.5), 100.0 / std::sqrt(1.0 + 0.15 * 0.15), 1e-9);
  EXPECT_NEAR(ln.inverse_cdf(0.5), 98.89363, 1e-5);

  // Empirical median from an independent lognormal generator.
  std::mt19937_64 rng(5);
  std::lognormal_distribution<double> dist(ln.log_mu(), ln.log_sigma());
  std::vector<double> s(400001);
  for (auto& v : s) v = dist(rng);
  std::nth_element(s.begin(), s.begin() + 200000, s.end());
  EXPECT_NEAR(s[200000], 98.89363, 0.1);
}

TEST(Marginal, RejectsBadParameters) {
  EXPECT_THROW(Marginal::normal(0, 0), std::invalid_argument);
  EXPECT_THROW(Marginal::lognormal(1, -0.1), std::invalid_argument);
  EXPECT_THROW(Marginal::lognormal(-1, 0.1), std::invalid_argument);
  EXPECT_THROW(Marginal::uniform(1, 1), std::invalid_argument);
}

TEST(Marginal, DensityIntegratesToOneAndInverseRoundTrips) {
  const std::vector<Marginal> ms = {Marginal::normal(1.0, 0.05), Marginal::normal(-3, 2),
                                    Marginal::lognormal(100, 0.15), Marginal::lognormal(2, 0.8),
                                    Marginal::uniform(-std::numbers::pi, std::numbers::pi)};
  for (const auto& m : ms) {
    const double lo = m.kind() == MarginalKind::Uniform ? m.param1() : m.inverse_cdf(1e-13);
    const double hi = m.kind() == MarginalKind::Uniform ? m.param2() : m.inverse_cdf(1.0 - 1e-13);
    const int n = 200000;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double x = lo + (hi - lo) * i / n;
      acc += (i == 0 || i == n ? 0.5 : 1.0) * m.pdf(x);
    }
    acc *= (hi - lo) / n;
    EXPECT_NEAR(acc, 1.0, 1e-6) << to_string(m.kind());

    for (double u = 1e-5; u < 1.0 - 1e-5; u += 0.0137) {
      const double x = m.inverse_cdf(u);
      EXPECT_NEAR(m.cdf(x), u, 1e-9);
      EXPECT_NEAR(m.inverse_cdf(m.cdf(x)), x, 1e-9 * std::max(1.0, std::abs(x)));
    }
  }
}

TEST(Marginal, LognormalMeanFromSobolPoints) {
  const auto m = Marginal::lognormal(100.0, 0.15);
  EXPECT_NEAR(m.log_sigma() * m.log_sigma(), std::log(1.0 + 0.15 * 0.15), 1e-15);
  EXPECT_NEAR(m.log_mu(), std::log(100.0) - 0.5 * std::log(1.0 + 0.15 * 0.15), 1e-14);
  const Matrix u = generate_unit_points({SequenceKind::Sobol, 1, 1000000, {}});
  const std::vector<Marginal> ms = {m};
  const Matrix x = map_to_distribution(u, ms);
  EXPECT_NEAR(x.col(0).mean() / 100.0, 1.0, 2e-3);
}
