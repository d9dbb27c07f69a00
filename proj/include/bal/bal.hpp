#ifndef BAL_BAL_HPP
#define BAL_BAL_HPP

// Bayesian active learning of a response distribution.
//
//   1. Fixed Sobol pool of N samples from f_X.
//   2. Initial Hammersley design of n0 points in the box Lambda1 (marginal
//      quantiles rho1, 1 - rho1), evaluated through the simulator.
//   3. Fit the GP surrogate.
//   4. Posterior field on the pool, calibrated y-grid, CDF/CCDF means and
//      CoV upper bounds.
//   5. Stop once max_y H(y) < epsilon on `consecutive_required` successive fits.
//   6. Otherwise take y* = argmax H, maximize the learning function over
//      Lambda2 (quantiles rho2), evaluate the simulator there, go to 3.
//   7. Return the final curves, PDF included.

#include <Eigen/Dense>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bal/errors.hpp"
#include "bal/ga.hpp"
#include "bal/gp.hpp"
#include "bal/lowdisc.hpp"
#include "bal/posterior.hpp"
#include "bal/problems.hpp"
#include "bal/stats.hpp"

namespace bal {

struct ALConfig {
  std::int64_t N = 500000;
  int n0 = 10;
  double rho1 = 1e-5;
  double rho2 = 1e-8;
  int h = 100;
  double p = 5e-5;
  double lambda = 2.0;
  double epsilon = 0.20;
  int consecutive_required = 2;
  int max_iterations = 500;
  std::uint64_t seed = 0;
  // Owen-scramble the integration pool with a seed derived from `seed`.
  bool scramble = false;
  int gp_restarts = 5;
  GAConfig ga;

  void validate() const {
    auto bad = [](const std::string& m) { throw std::invalid_argument("ALConfig: " + m); };
    if (N < 2) bad("N must be >= 2");
    if (n0 < 1) bad("n0 must be >= 1");
    if (!(rho2 > 0.0 && rho2 <= rho1 && rho1 < 0.5)) bad("need 0 < rho2 <= rho1 < 0.5");
    if (h < 2) bad("h must be >= 2");
    if (!(p > 0.0 && p < 0.5)) bad("need 0 < p < 0.5");
    if (!(lambda >= 0.0)) bad("lambda must be >= 0");
    if (!(epsilon > 0.0)) bad("epsilon must be > 0");
    if (consecutive_required < 1) bad("consecutive_required must be >= 1");
    if (max_iterations < 0) bad("max_iterations must be >= 0");
    if (gp_restarts < 1) bad("gp_restarts must be >= 1");
    if (ga.population != 0 && ga.population < 10) bad("ga.population must be >= 10 (or 0 for auto)");
    if (ga.generations < 10) bad("ga.generations must be >= 10");
    if (!(ga.crossover_rate >= 0.0 && ga.crossover_rate <= 1.0)) bad("ga.crossover_rate must be in [0,1]");
    if (!(ga.mutation_rate >= 0.0 && ga.mutation_rate <= 1.0)) bad("ga.mutation_rate must be in [0,1]");
    if (ga.elitism < 0) bad("ga.elitism must be >= 0");
    if (ga.restarts < 1) bad("ga.restarts must be >= 1");
  }
};

struct Box {
  Vector lower;
  Vector upper;

  bool contains(const Vector& x) const {
    return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
  }
};

/// Per-dimension [F^-1(rho), F^-1(1 - rho)].
inline Box truncation_box(std::span<const Marginal> marginals, double rho) {
  if (!(rho > 0.0 && rho <= 0.5)) throw std::invalid_argument("truncation_box: need 0 < rho <= 0.5");
  Box b{Vector(marginals.size()), Vector(marginals.size())};
  for (std::size_t r = 0; r < marginals.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    b.lower(i) = marginals[r].inverse_cdf(rho);
    b.upper(i) = marginals[r].inverse_cdf(1.0 - rho);
  }
  return b;
}

inline double joint_pdf(std::span<const Marginal> marginals, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  double p = 1.0;
  for (std::size_t r = 0; r < marginals.size(); ++r) p *= marginals[r].pdf(x(static_cast<Eigen::Index>(r)));
  return p;
}

struct Dataset {
  Matrix X;
  Vector Y;
};

/// Evaluates a simulator on matrix rows; errors carry the offending input.
inline Vector evaluate_rows(const Simulator& sim, const Matrix& X) {
  Vector y(X.rows());
  std::vector<double> row(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) row[static_cast<std::size_t>(j)] = X(i, j);
    try {
      y(i) = sim(row);
    } catch (const SimulatorError&) {
      throw;
    } catch (const std::exception& e) {
      throw SimulatorError(std::string("simulator failed: ") + e.what(), row);
    }
    if (!std::isfinite(y(i))) throw SimulatorError("simulator returned a non-finite value", row);
  }
  return y;
}

/// n0 Hammersley points mapped into Lambda1, evaluated through the simulator.
inline Dataset initial_design(std::span<const Marginal> marginals, const ALConfig& cfg,
                              const Simulator& sim) {
  if (cfg.n0 < 2) warn("initial design with n0 = " + std::to_string(cfg.n0) + " cannot support a GP fit");
  const auto box = truncation_box(marginals, cfg.rho1);
  const Matrix unit = generate_unit_points(
      {SequenceKind::Hammersley, static_cast<int>(marginals.size()), cfg.n0, {}});
  Dataset ds;
  ds.X = map_to_box(unit, box.lower, box.upper);
  ds.Y = evaluate_rows(sim, ds.X);
  return ds;
}

struct CriticalLevel {
  double y_star = 0.0;
  double max_H = 0.0;
  Eigen::Index index = 0;
};

/// Grid point maximizing H = max(cov_cdf, cov_ccdf); ties go to the smallest y.
inline CriticalLevel critical_y(const CurveEstimate& curves) {
  CriticalLevel c;
  c.max_H = -INFINITY;
  for (Eigen::Index t = 0; t < curves.grid.y.size(); ++t) {
    const double h = std::max(curves.cov_cdf(t), curves.cov_ccdf(t));
    if (h > c.max_H) {
      c.max_H = h;
      c.index = t;
    }
  }
  c.y_star = curves.grid.y(c.index);
  return c;
}

/// sqrt(Phi(z) Phi(-z)) f_X(x), z = (y* - m(x)) / s(x), at each row of Xq.
inline Vector learning_function(const GPModel& model, const Matrix& Xq, double y_star,
                                std::span<const Marginal> marginals) {
  const auto pred = model.predict(Xq);
  const double tol = 1e-12 * model.hyper().sigma0;
  Vector L(Xq.rows());
  for (Eigen::Index i = 0; i < Xq.rows(); ++i) {
    const auto s = detail::summands(y_star, pred.mean(i), pred.std(i), tol);
    L(i) = std::sqrt(s.cdf * s.ccdf) * joint_pdf(marginals, Xq.row(i));
  }
  return L;
}

inline double learning_function(const GPModel& model, const Vector& x, double y_star,
                                std::span<const Marginal> marginals) {
  return learning_function(model, Matrix(x.transpose()), y_star, marginals)(0);
}

/// Next design point: GA maximizer of the learning function over `box`. A
/// point coinciding with an existing design row is nudged by 1e-6 lengthscales.
inline Vector acquire(const GPModel& model, double y_star, std::span<const Marginal> marginals,
                      const Box& box, const GAConfig& ga, std::uint64_t seed) {
  auto fitness = [&](const Matrix& P) { return learning_function(model, P, y_star, marginals); };
  const auto res = maximize_ga(fitness, box.lower, box.upper, ga, seed);
  Vector x = res.x;

  const Eigen::ArrayXd l = model.hyper().lengthscales.array();
  for (Eigen::Index i = 0; i < model.size(); ++i) {
    const double dist = ((x.array() - model.X().row(i).transpose().array()) / l).abs().maxCoeff();
    if (dist <= 1e-10) {
      warn("acquired point coincides with design row " + std::to_string(i) + "; perturbing");
      for (Eigen::Index r = 0; r < x.size(); ++r) {
        const double step = 1e-6 * l(r);
        x(r) = x(r) + step <= box.upper(r) ? x(r) + step : x(r) - step;
      }
      break;
    }
  }
  return x;
}

enum class RunStatus { Converged, MaxIterations, FitFailed, DegenerateGrid, SimulatorFailed };

inline std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Converged: return "converged";
    case RunStatus::MaxIterations: return "max_iterations";
    case RunStatus::FitFailed: return "fit_failed";
    case RunStatus::DegenerateGrid: return "degenerate_grid";
    case RunStatus::SimulatorFailed: return "simulator_failed";
  }
  return "?";
}

struct IterationRecord {
  int n = 0;  // design size when the surrogate was fitted
  double y_star = 0.0;
  double max_H = 0.0;
  double max_sigma_bar = 0.0;
  std::optional<Vector> acquired_x;
  double acquired_y = NAN;
  double wall_time_ms = 0.0;
};

struct RunTrace {
  std::vector<IterationRecord> iterations;
  CurveEstimate final_curves;
  Dataset design;
  Box acquisition_box;
  Hyperparams final_hyper;
  int total_calls = 0;
  bool converged = false;
  RunStatus status = RunStatus::MaxIterations;
  std::string message;

  int acquisitions() const {
    int k = 0;
    for (const auto& it : iterations) k += it.acquired_x.has_value();
    return k;
  }
};

namespace detail {

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t k) {
  std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ull * (stream + 1)) ^ (0xD1B54A32D192ED03ull * (k + 1));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Integration pool: N Sobol points pushed through the marginals.
inline Matrix make_pool(std::span<const Marginal> marginals, std::int64_t N, bool scramble,
                        std::uint64_t seed) {
  SequenceSpec spec{SequenceKind::Sobol, static_cast<int>(marginals.size()), N, {}};
  if (scramble) spec.scramble_seed = detail::derive_seed(seed, 0, 0);
  return map_to_distribution(generate_unit_points(spec), marginals);
}

/// Runs the full active-learning loop. Failures after the initial design are
/// reported through RunTrace::status with the partial trace preserved.
inline RunTrace run(const ProblemSpec& problem, const ALConfig& cfg, const Matrix* pool_override = nullptr) {
  cfg.validate();
  if (problem.dimension() < 1 || !problem.simulator) {
    throw std::invalid_argument("run: problem needs marginals and a simulator");
  }
  const std::span<const Marginal> marginals(problem.marginals);

  std::atomic<int> calls{0};
  Simulator counted = [&](std::span<const double> x) {
    ++calls;
    return problem.simulator(x);
  };

  RunTrace trace;
  const Matrix pool = pool_override ? *pool_override : make_pool(marginals, cfg.N, cfg.scramble, cfg.seed);
  trace.acquisition_box = truncation_box(marginals, cfg.rho2);
  if (cfg.p * static_cast<double>(pool.rows()) < 1.0) {
    warn("p * N < 1: the grid ends are single pool extremes and the stopping threshold may be unreachable");
  }
  try {
    trace.design = initial_design(marginals, cfg, counted);
  } catch (const SimulatorError& e) {
    trace.status = RunStatus::SimulatorFailed;
    trace.message = e.what();
    trace.total_calls = calls.load();
    return trace;
  }

  FitConfig fit_cfg;
  fit_cfg.restarts = cfg.gp_restarts;
  std::optional<Hyperparams> previous;
  int consecutive = 0;
  int acquisitions = 0;

  for (int iter = 0;; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    IterationRecord rec;
    rec.n = static_cast<int>(trace.design.X.rows());
    try {
      fit_cfg.seed = detail::derive_seed(cfg.seed, 1, static_cast<std::uint64_t>(iter));
      fit_cfg.warm_start = previous;
      const GPModel model = fit(trace.design.X, trace.design.Y, fit_cfg);
      previous = model.hyper();
      trace.final_hyper = model.hyper();

      const PosteriorField field = evaluate_field(model, pool);
      const CurveGrid grid = calibrate_grid(field, cfg.p, cfg.lambda, cfg.h);
      trace.final_curves = estimate_curves(field, grid);
      const auto crit = critical_y(trace.final_curves);
      rec.y_star = crit.y_star;
      rec.max_H = crit.max_H;
      rec.max_sigma_bar = trace.final_curves.sigma_bar.maxCoeff();

      consecutive = crit.max_H < cfg.epsilon ? consecutive + 1 : 0;
      if (consecutive >= cfg.consecutive_required) {
        trace.converged = true;
        trace.status = RunStatus::Converged;
      } else if (acquisitions >= cfg.max_iterations) {
        trace.status = RunStatus::MaxIterations;
      } else {
        const Vector x = acquire(model, crit.y_star, marginals, trace.acquisition_box, cfg.ga,
                                 detail::derive_seed(cfg.seed, 2, static_cast<std::uint64_t>(iter)));
        const Vector y = evaluate_rows(counted, Matrix(x.transpose()));
        rec.acquired_x = x;
        rec.acquired_y = y(0);
        const auto n = trace.design.X.rows();
        trace.design.X.conservativeResize(n + 1, Eigen::NoChange);
        trace.design.X.row(n) = x.transpose();
        trace.design.Y.conservativeResize(n + 1);
        trace.design.Y(n) = y(0);
        ++acquisitions;
      }
    } catch (const FitError& e) {
      trace.status = RunStatus::FitFailed;
      trace.message = e.what();
    } catch (const DegenerateGridError& e) {
      trace.status = RunStatus::DegenerateGrid;
      trace.message = e.what();
    } catch (const SimulatorError& e) {
      trace.status = RunStatus::SimulatorFailed;
      trace.message = e.what();
    } catch (const std::invalid_argument& e) {
      trace.status = RunStatus::FitFailed;
      trace.message = e.what();
    }
    rec.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    trace.iterations.push_back(std::move(rec));
    if (!trace.iterations.back().acquired_x) break;
  }
  trace.total_calls = calls.load();
  return trace;
}

}  // namespace bal

#endif  // BAL_BAL_HPP
