#include <gtest/gtest.h>

#include <cmath>

#include "compclust.hpp"
#include "oracles.hpp"

using namespace compclust;

namespace {

ModelParams unit_params() {
  ModelParams mp;
  mp.sigma = 1.0;
  mp.p = {0.5, 0.5};
  mp.lambda = 1.0;
  return mp;
}

PointPattern random_two_colour(int nr, int nb, double side, Rng& rng) {
  PointPattern x;
  x.k = 2;
  x.window = Window(Rect{0, 0, side, side});
  for (int i = 0; i < nr + nb; ++i) x.points.push_back({{side * uniform01(rng), side * uniform01(rng)}, i < nr ? 0 : 1});
  return x;
}

}  // namespace

TEST(WeightTable, CoincidentPairUnitParameters) {
  PointPattern x({{{0.5, 0.5}, 0}, {{0.5, 0.5}, 1}}, 2, Window(Rect{0, 0, 1, 1}));
  const auto t = build_weight_table(x, unit_params(), CenterDensity::uniform(x.window));
  EXPECT_NEAR(t.weight(0, 0), 2.0, 1e-12);
}

TEST(WeightTable, MatchesRawFormula) {
  Rng rng = make_rng(21);
  const PointPattern x = random_two_colour(4, 5, 3.0, rng);
  ModelParams mp;
  mp.sigma = 0.7;
  mp.p = {0.3, 0.7};
  mp.lambda = 4.0;
  auto gf = [](Point2 p) { return (1.0 + p.x) / 22.5; };  // integrates to 1 over [0,3]^2
  const CenterDensity g(gf, Rect{0, 0, 3, 3}, 4.0 / 22.5);
  const auto w = oracle::pair_weights(x, mp.sigma, mp.p, mp.lambda, gf);
  const auto t = build_weight_table(x, mp, g);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(t.weight(i, j) / w[i][j], 1.0, 1e-10);
}

TEST(WeightTable, TruncationIsExactZero) {
  PointPattern x({{{0, 0}, 0}, {{1.0, 0}, 1}, {{0.999, 0}, 1}, {{3, 0}, 1}}, 2, Window(Rect{-1, -1, 4, 4}));
  const auto t = build_weight_table(x, unit_params(), CenterDensity::uniform(x.window), 1.0);
  EXPECT_EQ(t.weight(0, 0), 0.0);
  EXPECT_EQ(t.entry(0, 0), -1);
  EXPECT_GT(t.weight(0, 1), 0.0);
  EXPECT_EQ(t.weight(0, 2), 0.0);
  EXPECT_EQ(t.nnz(), 1u);
  ASSERT_TRUE(t.r_max());
  EXPECT_DOUBLE_EQ(*t.r_max(), 1.0);
}

TEST(WeightTable, TruncatedEqualsDenseWithinRadius) {
  Rng rng = make_rng(22);
  const PointPattern x = random_two_colour(30, 30, 5.0, rng);
  const auto g = CenterDensity::uniform(x.window);
  const auto full = build_weight_table(x, unit_params(), g);
  const auto trunc = build_weight_table(x, unit_params(), g, 1.2);
  const BipartiteView v(x);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 30; ++j) {
      const double d = distance(x[v.red[i]].x, x[v.blue[j]].x);
      if (d < 1.2) EXPECT_DOUBLE_EQ(trunc.log_weight(i, j), full.log_weight(i, j));
      else EXPECT_EQ(trunc.entry(i, j), -1);
    }
}

TEST(WeightTable, P4RemovalAndAdditionTables) {
  const std::vector<std::vector<double>> w{{3.0, 0.5, 0.2}, {1.0, 4.0, 0.0}, {0.1, 2.0, 0.7}};
  const auto t = WeightTable::from_dense(w);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const int e = t.entry(i, j);
      if (w[i][j] == 0.0) {
        EXPECT_EQ(e, -1);
        continue;
      }
      EXPECT_NEAR(t.entry_q_rem(e), 1.0 / std::sqrt(w[i][j]), 1e-12);
      double a = 1.0;
      for (int jp = 0; jp < 3; ++jp) {
        if (jp == j) continue;
        double den = 1.0;
        for (int s = 0; s < 3; ++s)
          if (s != i) den += w[s][jp];
        for (int l = 0; l < 3; ++l) den += w[i][l];
        a -= (w[i][jp] - std::sqrt(w[i][jp])) / den;
      }
      double b = 1.0;
      for (int ip = 0; ip < 3; ++ip) {
        if (ip == i) continue;
        double den = 1.0;
        for (int s = 0; s < 3; ++s)
          if (s != j) den += w[ip][s];
        for (int l = 0; l < 3; ++l) den += w[l][j];
        b -= (w[ip][j] - std::sqrt(w[ip][j])) / den;
      }
      EXPECT_NEAR(t.entry_q_add(e), std::max(0.0, std::sqrt(w[i][j]) * a * b), 1e-12);
    }
}

TEST(WeightTable, ThresholdAndTemper) {
  const auto t = WeightTable::from_dense({{3.0, 0.0005}, {0.002, 1.0}});
  const auto th = t.thresholded(1e-3);
  EXPECT_EQ(th.nnz(), 3u);
  EXPECT_EQ(th.entry(0, 1), -1);
  const auto tp = t.tempered(0.5);
  EXPECT_NEAR(tp.weight(0, 0), std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(tp.weight(1, 0), std::sqrt(0.002), 1e-12);
}

TEST(WeightTable, RejectsBadInput) {
  EXPECT_THROW(WeightTable::from_dense({{1.0, 2.0}, {1.0}}), std::invalid_argument);
  EXPECT_THROW(WeightTable::from_dense({{-1.0}}), std::invalid_argument);
  PointPattern x3({{{0, 0}, 0}, {{0, 0}, 2}}, 3, Window(Rect{0, 0, 1, 1}));
  ModelParams mp;
  mp.p = {0.3, 0.3, 0.4};
  EXPECT_THROW(build_weight_table(x3, mp, CenterDensity::uniform(x3.window)), std::invalid_argument);
}

TEST(WeightTable, ColumnIndexCoversEntries) {
  const auto t = WeightTable::from_dense({{1, 0, 2}, {0, 3, 4}, {5, 0, 0}});
  int seen = 0;
  for (int j = 0; j < 3; ++j)
    for (int e : t.column(j)) {
      EXPECT_EQ(t.entry_blue(e), j);
      ++seen;
    }
  EXPECT_EQ(seen, 5);
}
