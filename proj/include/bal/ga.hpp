#ifndef BAL_GA_HPP
#define BAL_GA_HPP

// Real-coded genetic algorithm for maximizing a batch-evaluated fitness over a
// box. Tournament selection, simulated binary crossover, Gaussian mutation,
// elitism, independent restarts. Every restart is seeded with the best points
// of a Sobol screening of the box, so the result is never worse than the
// screening winner.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "bal/lowdisc.hpp"

namespace bal {

struct GAConfig {
  int population = 0;  // 0: 50*d capped at 500
  int generations = 100;
  double crossover_rate = 0.9;
  double mutation_rate = 0.0;  // 0: 1/d
  int elitism = 2;
  int restarts = 3;
  int tournament = 3;
  double sbx_eta = 15.0;
  double mutation_scale = 0.1;  // Gaussian std-dev as a fraction of box width
  int screening_points = 1024;

  int population_for(int d) const { return population > 0 ? population : std::min(50 * d, 500); }
  double mutation_rate_for(int d) const { return mutation_rate > 0.0 ? mutation_rate : 1.0 / d; }
};

using BatchFitness = std::function<Vector(const Matrix&)>;

struct GAResult {
  Vector x;
  double value = -INFINITY;
  Vector screening_x;
  double screening_value = -INFINITY;
  std::int64_t evaluations = 0;
};

inline GAResult maximize_ga(const BatchFitness& fitness, const Vector& lower, const Vector& upper,
                            const GAConfig& cfg, std::uint64_t seed) {
  const auto d = static_cast<int>(lower.size());
  if (d < 1 || upper.size() != d) throw std::invalid_argument("maximize_ga: bad bounds");
  const int pop = cfg.population_for(d);
  if (pop < 4) throw std::invalid_argument("maximize_ga: population too small");
  const double pm = cfg.mutation_rate_for(d);
  const Vector width = upper - lower;

  GAResult res;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);

  auto consider = [&](const Matrix& P, const Vector& f) {
    Eigen::Index i;
    const double best = f.maxCoeff(&i);
    if (best > res.value || res.x.size() == 0) {
      res.value = best;
      res.x = P.row(i).transpose();
    }
  };

  // Screening.
  Matrix screen;
  Vector screen_f;
  std::vector<Eigen::Index> screen_order;
  if (cfg.screening_points > 0) {
    screen = map_to_box(generate_unit_points({SequenceKind::Sobol, d, cfg.screening_points, {}}),
                        lower, upper);
    screen_f = fitness(screen);
    res.evaluations += screen.rows();
    consider(screen, screen_f);
    res.screening_value = res.value;
    res.screening_x = res.x;
    screen_order.resize(static_cast<std::size_t>(screen.rows()));
    std::iota(screen_order.begin(), screen_order.end(), 0);
    std::stable_sort(screen_order.begin(), screen_order.end(),
                     [&](auto a, auto b) { return screen_f(a) > screen_f(b); });
  }

  const int n_seeded = std::min<int>(static_cast<int>(screen_order.size()), std::max(2, pop / 5));

  for (int restart = 0; restart < std::max(1, cfg.restarts); ++restart) {
    Matrix P(pop, d);
    for (int i = 0; i < pop; ++i) {
      if (i < n_seeded) {
        P.row(i) = screen.row(screen_order[static_cast<std::size_t>(i)]);
      } else {
        for (int j = 0; j < d; ++j) P(i, j) = lower(j) + u01(rng) * width(j);
      }
    }
    Vector f = fitness(P);
    res.evaluations += pop;
    consider(P, f);

    std::uniform_int_distribution<int> pick(0, pop - 1);
    auto tournament = [&]() {
      int best = pick(rng);
      for (int k = 1; k < cfg.tournament; ++k) {
        const int c = pick(rng);
        if (f(c) > f(best)) best = c;
      }
      return best;
    };

    for (int gen = 0; gen < cfg.generations; ++gen) {
      std::vector<int> order(static_cast<std::size_t>(pop));
      std::iota(order.begin(), order.end(), 0);
      std::partial_sort(order.begin(), order.begin() + std::min(cfg.elitism, pop), order.end(),
                        [&](int a, int b) { return f(a) > f(b); });
      Matrix Q(pop, d);
      int k = 0;
      for (; k < std::min(cfg.elitism, pop); ++k) Q.row(k) = P.row(order[static_cast<std::size_t>(k)]);
      while (k < pop) {
        Vector c1 = P.row(tournament()).transpose();
        Vector c2 = P.row(tournament()).transpose();
        if (u01(rng) < cfg.crossover_rate) {
          for (int j = 0; j < d; ++j) {
            if (u01(rng) > 0.5) continue;
            const double u = u01(rng);
            const double beta = u <= 0.5 ? std::pow(2.0 * u, 1.0 / (cfg.sbx_eta + 1.0))
                                         : std::pow(1.0 / (2.0 * (1.0 - u)), 1.0 / (cfg.sbx_eta + 1.0));
            const double a = c1(j), b = c2(j);
            c1(j) = 0.5 * ((1.0 + beta) * a + (1.0 - beta) * b);
            c2(j) = 0.5 * ((1.0 - beta) * a + (1.0 + beta) * b);
          }
        }
        for (Vector* c : {&c1, &c2}) {
          for (int j = 0; j < d; ++j) {
            if (u01(rng) < pm) (*c)(j) += cfg.mutation_scale * width(j) * n01(rng);
            (*c)(j) = std::clamp((*c)(j), lower(j), upper(j));
          }
          if (k < pop) Q.row(k++) = c->transpose();
        }
      }
      P = std::move(Q);
      f = fitness(P);
      res.evaluations += pop;
      consider(P, f);
    }
  }
  return res;
}

}  // namespace bal

#endif  // BAL_GA_HPP
