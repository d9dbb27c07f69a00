#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "bal/lowdisc.hpp"

using namespace bal;

TEST(Hammersley, SmallExample) {
  const Matrix p = generate_unit_points({SequenceKind::Hammersley, 2, 4, {}});
  const double first[] = {0, 0.25, 0.5, 0.75};
  const double second[] = {0, 0.5, 0.25, 0.75};
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(p(i, 0), first[i]);
    EXPECT_EQ(p(i, 1), second[i]);
  }
}

TEST(Hammersley, HigherCoordinatesUseSuccessivePrimes) {
  const Matrix p = generate_unit_points({SequenceKind::Hammersley, 4, 8, {}});
  // i = 5 is 101 in base 2, 12 in base 3, 10 in base 5.
  EXPECT_DOUBLE_EQ(p(5, 1), 0.625);
  EXPECT_DOUBLE_EQ(p(5, 2), 2.0 / 3.0 + 1.0 / 9.0);
  EXPECT_DOUBLE_EQ(p(5, 3), 1.0 / 25.0);
}

TEST(Sobol, FirstDimensionIsVanDerCorputInGrayOrder) {
  const Matrix p = generate_unit_points({SequenceKind::Sobol, 1, 4, {}});
  EXPECT_EQ(p(0, 0), 0.0);
  EXPECT_EQ(p(1, 0), 0.5);
  EXPECT_EQ(p(2, 0), 0.75);
  EXPECT_EQ(p(3, 0), 0.25);
}

TEST(Sobol, MatchesIndependentGenerator) {
  // Reference rows from scipy.stats.qmc.Sobol(6, scramble=False, bits=32).
  struct Row {
    int i;
    double v[6];
  };
  const Row ref[] = {
      {4, {0.375, 0.375, 0.625, 0.875, 0.375, 0.125}},
      {7, {0.125, 0.625, 0.375, 0.125, 0.125, 0.375}},
      {100, {0.4140625, 0.2578125, 0.7734375, 0.7265625, 0.8828125, 0.7421875}},
      {1023, {0.0009765625, 0.7529296875, 0.6123046875, 0.1455078125, 0.1865234375, 0.4384765625}},
  };
  const Matrix p = generate_unit_points({SequenceKind::Sobol, 6, 1024, {}});
  for (const auto& r : ref)
    for (int j = 0; j < 6; ++j) EXPECT_EQ(p(r.i, j), r.v[j]) << r.i << ',' << j;
}

TEST(Sobol, RangeDeterminismNesting) {
  for (auto scramble : {std::optional<std::uint64_t>{}, std::optional<std::uint64_t>{42}}) {
    const Matrix a = generate_unit_points({SequenceKind::Sobol, 9, 5000, scramble});
    const Matrix b = generate_unit_points({SequenceKind::Sobol, 9, 5000, scramble});
    const Matrix c = generate_unit_points({SequenceKind::Sobol, 9, 1234, scramble});
    EXPECT_TRUE((a.array() >= 0.0).all() && (a.array() < 1.0).all());
    EXPECT_EQ(a, b);
    EXPECT_EQ(Matrix(a.topRows(1234)), c);
  }
}

TEST(Sobol, ScramblingChangesPointsButKeepsStratification) {
  const Matrix plain = generate_unit_points({SequenceKind::Sobol, 3, 256, {}});
  const Matrix s1 = generate_unit_points({SequenceKind::Sobol, 3, 256, 1});
  const Matrix s2 = generate_unit_points({SequenceKind::Sobol, 3, 256, 2});
  EXPECT_NE(plain, s1);
  EXPECT_NE(s1, s2);
  // Each of the 256 intervals [k/256, (k+1)/256) holds exactly one point per coordinate.
  for (int j = 0; j < 3; ++j) {
    std::vector<int> hits(256, 0);
    for (int i = 0; i < 256; ++i) ++hits[static_cast<int>(s1(i, j) * 256)];
    for (int h : hits) EXPECT_EQ(h, 1);
  }
}

TEST(Sobol, QmcIntegrationOfProduct) {
  const Matrix p = generate_unit_points({SequenceKind::Sobol, 5, 1 << 14, {}});
  const double mean = p.rowwise().prod().mean();
  EXPECT_NEAR(mean, std::pow(2.0, -5), 1e-3);
}

TEST(Sobol, RejectsBadSpecs) {
  EXPECT_THROW(generate_unit_points({SequenceKind::Sobol, 0, 10, {}}), std::invalid_argument);
  EXPECT_THROW(generate_unit_points({SequenceKind::Sobol, kMaxSequenceDim + 1, 10, {}}), std::invalid_argument);
  EXPECT_THROW(generate_unit_points({SequenceKind::Hammersley, 2, 0, {}}), std::invalid_argument);
}

TEST(MapToDistribution, Examples) {
  const std::vector<Marginal> n2 = {Marginal::normal(0, 1), Marginal::normal(0, 1)};
  Matrix half(1, 2);
  half << 0.5, 0.5;
  const Matrix m = map_to_distribution(half, n2);
  EXPECT_EQ(m(0, 0), 0.0);
  EXPECT_EQ(m(0, 1), 0.0);

  Matrix u(1, 1);
  u << 0.975002;
  const std::vector<Marginal> n1 = {Marginal::normal(0, 1)};
  EXPECT_NEAR(map_to_distribution(u, n1)(0, 0), 1.96, 1e-5);

  // Endpoints are nudged, never infinite.
  Matrix zero(1, 1);
  zero << 0.0;
  EXPECT_TRUE(std::isfinite(map_to_distribution(zero, n1)(0, 0)));
  EXPECT_THROW(map_to_distribution(half, n1), std::invalid_argument);
}

TEST(MapToBox, EndpointsAndMidpoint) {
  Matrix u(3, 2);
  u << 0, 0, 1, 1, 0.5, 0.5;
  Vector lo(2), hi(2);
  lo << -1, 10;
  hi << 3, 20;
  const Matrix b = map_to_box(u, lo, hi);
  EXPECT_EQ(b(0, 0), -1);
  EXPECT_EQ(b(0, 1), 10);
  EXPECT_EQ(b(1, 0), 3);
  EXPECT_EQ(b(1, 1), 20);
  EXPECT_EQ(b(2, 0), 1);
  EXPECT_EQ(b(2, 1), 15);
  Vector bad = hi;
  bad(0) = -1;
  EXPECT_THROW(map_to_box(u, lo, bad), std::invalid_argument);
}

TEST(MapToBox, HammersleyDesignIsSpread) {
  Vector lo = Vector::Constant(2, -4.265), hi = Vector::Constant(2, 4.265);
  const Matrix x = map_to_box(generate_unit_points({SequenceKind::Hammersley, 2, 10, {}}), lo, hi);
  ASSERT_EQ(x.rows(), 10);
  double dmin = INFINITY;
  for (int i = 0; i < 10; ++i)
    for (int k = i + 1; k < 10; ++k) dmin = std::min(dmin, (x.row(i) - x.row(k)).norm());
  EXPECT_GT(dmin, 0.5);
}
