#ifndef BAL_PROBLEMS_HPP
#define BAL_PROBLEMS_HPP

// Benchmark problems behind a common simulator interface, their reference
// solutions, and an adapter for simulators running as external processes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bal/errors.hpp"
#include "bal/lowdisc.hpp"
#include "bal/stats.hpp"

namespace bal {

using Simulator = std::function<double(std::span<const double>)>;

struct CurvePoint {
  double cdf;
  double ccdf;
  double pdf;
};

struct ProblemSpec {
  std::string name;
  std::vector<Marginal> marginals;
  Simulator simulator;
  // Closed-form response distribution, when known.
  std::function<CurvePoint(double)> reference;

  int dimension() const noexcept { return static_cast<int>(marginals.size()); }
};

// ---------------------------------------------------------------------------
// Closed-form examples

inline double toy_min(std::span<const double> x) { return std::min(x[0] - x[1], x[0] + x[1]); }

/// Y = min(X1 - X2, X1 + X2) with X1, X2 iid N(0,1): Y is the minimum of two
/// independent N(0,2) variables.
inline CurvePoint toy_min_reference(double y) {
  const double z = y / kSqrt2;
  const double phi = std_normal_cdf(z);
  const double phic = std_normal_cdf(-z);
  return {phi * (2.0 - phi), phic * phic, kSqrt2 * std_normal_pdf(z) * phic};
}

inline double ishigami(std::span<const double> x, double a = 7.0, double b = 0.1) {
  const double s1 = std::sin(x[0]);
  const double s2 = std::sin(x[1]);
  return s1 + a * s2 * s2 + b * std::pow(x[2], 4) * s1;
}

/// Undamped nonlinear oscillator under a rectangular pulse.
/// x = (m, k1, k2, r, F1, t1).
inline double oscillator(std::span<const double> x) {
  const double m = x[0], k = x[1] + x[2], r = x[3], f1 = x[4], t1 = x[5];
  if (!(m > 0.0) || !(k > 0.0)) {
    throw SimulatorError("oscillator: mass and stiffness sum must be positive",
                         std::vector<double>(x.begin(), x.end()));
  }
  const double w0 = std::sqrt(k / m);
  return 3.0 * r - std::abs(2.0 * f1 / k * std::sin(w0 * t1 / 2.0));
}

inline ProblemSpec toy_min_problem() {
  return {"toy_min", {Marginal::normal(0, 1), Marginal::normal(0, 1)}, toy_min, toy_min_reference};
}

inline ProblemSpec ishigami_problem() {
  constexpr double pi = std::numbers::pi;
  return {"ishigami",
          {Marginal::uniform(-pi, pi), Marginal::uniform(-pi, pi), Marginal::uniform(-pi, pi)},
          [](std::span<const double> x) { return ishigami(x); },
          {}};
}

inline ProblemSpec oscillator_problem() {
  return {"oscillator",
          {Marginal::normal(1.0, 0.05), Marginal::normal(1.0, 0.10), Marginal::normal(0.2, 0.01),
           Marginal::normal(0.5, 0.05), Marginal::normal(1.0, 0.20), Marginal::normal(1.0, 0.20)},
          oscillator,
          {}};
}

inline std::vector<std::string> problem_names() { return {"toy_min", "ishigami", "oscillator"}; }

inline std::optional<ProblemSpec> find_problem(std::string_view name) {
  if (name == "toy_min") return toy_min_problem();
  if (name == "ishigami") return ishigami_problem();
  if (name == "oscillator") return oscillator_problem();
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Monte Carlo reference

/// Sorted response sample with empirical CDF/CCDF and a histogram density.
class EmpiricalDistribution {
 public:
  explicit EmpiricalDistribution(std::vector<double> samples) : y_(std::move(samples)) {
    if (y_.empty()) throw std::invalid_argument("EmpiricalDistribution: no samples");
    std::sort(y_.begin(), y_.end());
  }

  std::size_t size() const noexcept { return y_.size(); }
  const std::vector<double>& sorted() const noexcept { return y_; }

  double cdf(double y) const {
    return static_cast<double>(std::upper_bound(y_.begin(), y_.end(), y) - y_.begin()) /
           static_cast<double>(y_.size());
  }
  double ccdf(double y) const { return 1.0 - cdf(y); }

  /// Fraction of samples in (y - width/2, y + width/2], divided by width.
  double histogram_pdf(double y, double width) const {
    const auto lo = std::upper_bound(y_.begin(), y_.end(), y - 0.5 * width);
    const auto hi = std::upper_bound(y_.begin(), y_.end(), y + 0.5 * width);
    return static_cast<double>(hi - lo) / (static_cast<double>(y_.size()) * width);
  }

  /// Binomial standard error of the empirical CDF at y.
  double cdf_stderr(double y) const {
    const double p = cdf(y);
    return std::sqrt(p * (1.0 - p) / static_cast<double>(y_.size()));
  }

 private:
  std::vector<double> y_;
};

/// Plain Monte Carlo sample of the response with a seeded pseudo-random
/// generator (inverse-transform sampling of each marginal).
inline EmpiricalDistribution mcs_reference(const ProblemSpec& problem, std::size_t n_samples,
                                           std::uint64_t seed) {
  if (n_samples == 0) throw std::invalid_argument("mcs_reference: n_samples must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto d = static_cast<std::size_t>(problem.dimension());
  std::vector<double> x(d), out;
  out.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double u = unif(rng);
      while (u <= 0.0) u = unif(rng);
      x[j] = problem.marginals[j].inverse_cdf(u);
    }
    out.push_back(problem.simulator(x));
  }
  return EmpiricalDistribution(std::move(out));
}

struct EmpiricalCurves {
  Vector y;
  Vector cdf;
  Vector ccdf;
  Vector pdf;
  Vector cdf_stderr;
};

/// Empirical curves on a uniform grid; the histogram bin width is the grid
/// spacing.
inline EmpiricalCurves empirical_curves(const EmpiricalDistribution& ed, const Vector& y) {
  EmpiricalCurves c;
  c.y = y;
  const auto T = y.size();
  c.cdf.resize(T);
  c.ccdf.resize(T);
  c.pdf.resize(T);
  c.cdf_stderr.resize(T);
  const double width = T > 1 ? (y(T - 1) - y(0)) / static_cast<double>(T - 1) : 1.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    c.cdf(t) = ed.cdf(y(t));
    c.ccdf(t) = 1.0 - c.cdf(t);
    c.pdf(t) = ed.histogram_pdf(y(t), width);
    c.cdf_stderr(t) = ed.cdf_stderr(y(t));
  }
  return c;
}

}  // namespace bal

#endif  // BAL_PROBLEMS_HPP
