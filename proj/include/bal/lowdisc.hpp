#ifndef BAL_LOWDISC_HPP
#define BAL_LOWDISC_HPP

// Low-discrepancy point sets: Sobol (Gray-code order, Joe-Kuo directions) for
// the integration pool and Hammersley for the initial design, plus the maps
// that carry unit-cube points into the input distribution or a box.
//
// Supported dimension is bounded by the embedded direction table
// (kSobolMaxDim = 64); Hammersley shares the same bound.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bal/detail/sobol_table.hpp"
#include "bal/stats.hpp"

namespace bal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr int kMaxSequenceDim = detail::kSobolMaxDim;

enum class SequenceKind { Sobol, Hammersley };

struct SequenceSpec {
  SequenceKind kind = SequenceKind::Sobol;
  int dimension = 1;
  std::int64_t count = 1;
  // Nested uniform (Owen-style) scrambling when set. Sobol only.
  std::optional<std::uint64_t> scramble_seed;
};

namespace detail {

inline std::uint32_t reverse_bits(std::uint32_t x) noexcept {
  x = ((x >> 1) & 0x55555555u) | ((x & 0x55555555u) << 1);
  x = ((x >> 2) & 0x33333333u) | ((x & 0x33333333u) << 2);
  x = ((x >> 4) & 0x0F0F0F0Fu) | ((x & 0x0F0F0F0Fu) << 4);
  x = ((x >> 8) & 0x00FF00FFu) | ((x & 0x00FF00FFu) << 8);
  return (x >> 16) | (x << 16);
}

// Laine-Karras hash applied in bit-reversed order gives a nested uniform
// scramble of the binary digits.
inline std::uint32_t nested_uniform_scramble(std::uint32_t x, std::uint32_t seed) noexcept {
  x = reverse_bits(x);
  x += seed;
  x ^= x * 0x6c50b47cu;
  x ^= x * 0xb82f1e52u;
  x ^= x * 0xc7afe638u;
  x ^= x * 0x8d22f6e6u;
  return reverse_bits(x);
}

inline std::uint32_t mix_seed(std::uint64_t seed, int dim) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(dim + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return static_cast<std::uint32_t>(z ^ (z >> 31));
}

inline std::array<std::uint32_t, 32> sobol_directions(int dim) {
  std::array<std::uint32_t, 32> v{};
  const auto& row = kSobolTable[static_cast<std::size_t>(dim)];
  const int s = row.degree;
  if (s == 0) {
    for (int k = 0; k < 32; ++k) v[k] = 1u << (31 - k);
    return v;
  }
  for (int k = 0; k < 32; ++k) {
    if (k < s) {
      v[k] = row.m[k] << (31 - k);
    } else {
      std::uint32_t x = v[k - s] ^ (v[k - s] >> s);
      for (int i = 1; i < s; ++i) {
        if ((row.coeffs >> (s - 1 - i)) & 1u) x ^= v[k - i];
      }
      v[k] = x;
    }
  }
  return v;
}

inline double radical_inverse(std::uint64_t i, unsigned base) noexcept {
  const double inv = 1.0 / base;
  double f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

inline unsigned nth_prime(int k) {
  static const std::vector<unsigned> primes = [] {
    std::vector<unsigned> p;
    for (unsigned c = 2; p.size() < kMaxSequenceDim; ++c) {
      bool prime = true;
      for (unsigned q : p) {
        if (q * q > c) break;
        if (c % q == 0) { prime = false; break; }
      }
      if (prime) p.push_back(c);
    }
    return p;
  }();
  return primes.at(static_cast<std::size_t>(k));
}

}  // namespace detail

/// count x dimension matrix of points in [0,1)^d. Deterministic for a fixed
/// spec; Sobol output is nested (a shorter run is a prefix of a longer one).
inline Matrix generate_unit_points(const SequenceSpec& spec) {
  if (spec.dimension < 1 || spec.dimension > kMaxSequenceDim) {
    throw std::invalid_argument("generate_unit_points: dimension must be in [1, " +
                                std::to_string(kMaxSequenceDim) + "]");
  }
  if (spec.count < 1) throw std::invalid_argument("generate_unit_points: count must be >= 1");
  const int d = spec.dimension;
  const auto n = static_cast<Eigen::Index>(spec.count);
  Matrix pts(n, d);
  constexpr double two_m32 = 1.0 / 4294967296.0;

  if (spec.kind == SequenceKind::Hammersley) {
    for (Eigen::Index i = 0; i < n; ++i) {
      pts(i, 0) = static_cast<double>(i) / static_cast<double>(n);
      for (int j = 1; j < d; ++j) {
        pts(i, j) = detail::radical_inverse(static_cast<std::uint64_t>(i), detail::nth_prime(j - 1));
      }
    }
    return pts;
  }

  if (spec.count > (std::int64_t{1} << 32)) {
    throw std::invalid_argument("generate_unit_points: Sobol count exceeds 2^32");
  }
  for (int j = 0; j < d; ++j) {
    const auto v = detail::sobol_directions(j);
    const std::uint32_t seed =
        spec.scramble_seed ? detail::mix_seed(*spec.scramble_seed, j) : 0u;
    std::uint32_t x = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i > 0) {
        // Gray-code update: flip the direction of the lowest zero bit of i-1.
        const auto c = static_cast<unsigned>(std::countr_one(static_cast<std::uint64_t>(i - 1)));
        x ^= v[c];
      }
      const std::uint32_t out = spec.scramble_seed ? detail::nested_uniform_scramble(x, seed) : x;
      pts(i, j) = static_cast<double>(out) * two_m32;
    }
  }
  return pts;
}

/// Column j goes through the inverse CDF of marginal j. Coordinates equal to 0
/// or 1 are nudged inward by 1e-12.
inline Matrix map_to_distribution(const Matrix& unit, std::span<const Marginal> marginals) {
  if (unit.cols() != static_cast<Eigen::Index>(marginals.size())) {
    throw std::invalid_argument("map_to_distribution: column count != number of marginals");
  }
  constexpr double eps = 1e-12;
  Matrix out(unit.rows(), unit.cols());
  for (Eigen::Index j = 0; j < unit.cols(); ++j) {
    const auto& m = marginals[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < unit.rows(); ++i) {
      const double u = std::clamp(unit(i, j), eps, 1.0 - eps);
      out(i, j) = m.inverse_cdf(u);
    }
  }
  return out;
}

inline Matrix map_to_box(const Matrix& unit, const Vector& lower, const Vector& upper) {
  if (lower.size() != unit.cols() || upper.size() != unit.cols()) {
    throw std::invalid_argument("map_to_box: bound sizes must match point dimension");
  }
  for (Eigen::Index j = 0; j < lower.size(); ++j) {
    if (!(lower(j) < upper(j))) {
      throw std::invalid_argument("map_to_box: lower must be < upper in every dimension");
    }
  }
  Matrix out(unit.rows(), unit.cols());
  for (Eigen::Index j = 0; j < unit.cols(); ++j) {
    out.col(j) = (lower(j) + (upper(j) - lower(j)) * unit.col(j).array()).matrix();
  }
  return out;
}

}  // namespace bal

#endif  // BAL_LOWDISC_HPP
