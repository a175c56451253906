#include <gtest/gtest.h>

#include <cmath>

#include "compclust.hpp"
#include "oracles.hpp"

using namespace compclust;

namespace {

IntensityField constant_field(const Window& w, double v, double cell = 1.0) {
  IntensityField f(w, cell, 1.0);
  for (int iy = 0; iy < f.ny(); ++iy)
    for (int ix = 0; ix < f.nx(); ++ix) f.set_value(ix, iy, v);
  return f;
}

}  // namespace

TEST(KCross, PoissonComponentsGivePiRSquared) {
  Rng rng = make_rng(1);
  const Window w(Rect{0, 0, 20, 20});
  const std::vector<double> r{1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<double> k12(r.size(), 0.0);
  const int reps = 20;
  for (int rep = 0; rep < reps; ++rep) {
    const auto x = simulate_csri_poisson({1.0, 1.0}, w, rng);
    const auto c = x.count_by_type();
    const double l0 = c[0] / w.area(), l1 = c[1] / w.area();
    const auto km = kcross_inhom(x, [&](int t, Point2) { return t == 0 ? l0 : l1; }, r);
    for (std::size_t t = 0; t < r.size(); ++t) k12[t] += km.at(0, 1)[t] / reps;
  }
  for (std::size_t t = 0; t < r.size(); ++t) EXPECT_NEAR(k12[t] / (oracle::kPi * r[t] * r[t]), 1.0, 0.1) << r[t];
}

TEST(KCross, ZeroRadiusAndIsolatedPair) {
  const Window w(Rect{0, 0, 100, 100});
  const PointPattern x({{{50, 50}, 0}, {{53, 54}, 1}}, 2, w);
  const std::vector<double> r{0.0, 4.99, 5.0, 7.0};
  const auto km = kcross_inhom(x, [](int, Point2) { return 1e-4; }, r);
  EXPECT_DOUBLE_EQ(km.at(0, 1)[0], 0.0);
  EXPECT_DOUBLE_EQ(km.at(0, 1)[1], 0.0);
  // single pair, translation weight |W| / ((100-3)(100-4)), over |W| lambda_i lambda_j
  const double expect = 1.0 / (97.0 * 96.0) / (1e-4 * 1e-4);
  EXPECT_NEAR(km.at(0, 1)[2], expect, 1e-9 * expect);
  EXPECT_NEAR(km.at(0, 1)[3], expect, 1e-9 * expect);
  EXPECT_NEAR(km.at(1, 0)[2], expect, 1e-9 * expect);
}

TEST(KCross, ZeroIntensityAtDataPointThrows) {
  const Window w(Rect{0, 0, 10, 10});
  const PointPattern x({{{5, 5}, 0}, {{6, 6}, 1}}, 2, w);
  EXPECT_THROW(kcross_inhom(x, [](int t, Point2) { return t == 0 ? 0.0 : 1.0; }, {1.0}), std::domain_error);
}

TEST(KCross, MonotoneInR) {
  Rng rng = make_rng(2);
  const Window w(Rect{0, 0, 15, 10});
  const auto x = simulate_csri({40, 30, 20}, w, rng);
  const auto r = default_r_grid(4.0, 64);
  const auto km = kcross_inhom(x, [](int, Point2) { return 0.2; }, r);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      for (std::size_t t = 1; t < r.size(); ++t) EXPECT_GE(km.at(i, j)[t], km.at(i, j)[t - 1]);
    }
}

TEST(LCross, Aggregation) {
  KMatrix km;
  km.k = 3;
  km.r = {1.0, 2.0};
  km.K.assign(3, std::vector<std::vector<double>>(3));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) km.K[i][j] = {oracle::kPi, 4 * oracle::kPi};
  auto l = lcross_aggregate(km, {3, 5, 9});
  EXPECT_NEAR(l[0], 1.0, 1e-12);
  EXPECT_NEAR(l[1], 2.0, 1e-12);

  KMatrix two;
  two.k = 2;
  two.r = {1.0};
  two.K = {{{}, {2.0}}, {{4.0}, {}}};
  EXPECT_NEAR(lcross_aggregate(two, {7, 11})[0], std::sqrt(3.0 / oracle::kPi), 1e-12);
}

TEST(LCross, PoissonIsIdentity) {
  Rng rng = make_rng(3);
  const Window w(Rect{0, 0, 20, 20});
  const std::vector<double> r{2.0, 4.0};
  std::vector<double> acc(2, 0.0);
  for (int rep = 0; rep < 20; ++rep) {
    const auto x = simulate_csri_poisson({0.8, 0.8, 0.8}, w, rng);
    const auto c = x.count_by_type();
    const auto l = lcross_aggregate(kcross_inhom(x, [&](int t, Point2) { return c[t] / w.area(); }, r), c);
    for (int t = 0; t < 2; ++t) acc[t] += l[t] / 20;
  }
  EXPECT_NEAR(acc[0], 2.0, 0.1);
  EXPECT_NEAR(acc[1], 4.0, 0.2);
}

TEST(NullPoisson, MeanCountsMatchFieldMass) {
  Rng rng = make_rng(4);
  const Window w(Rect{0, 0, 10, 10});
  IntensityField a(w, 0.5, 1.0), b = constant_field(w, 0.3, 0.5);
  for (int iy = 0; iy < a.ny(); ++iy)
    for (int ix = 0; ix < a.nx(); ++ix) a.set_value(ix, iy, 0.1 + 0.05 * a.center(ix, iy).x);
  std::vector<IntensityField> fields{a, b};
  double mass_a = 0.0;
  // bilinear interpolation of a linear field is exact inside the node hull
  const int q = 400;
  for (int u = 0; u < q; ++u)
    for (int v = 0; v < q; ++v) mass_a += a.at({(u + 0.5) * 10.0 / q, (v + 0.5) * 10.0 / q}) * (100.0 / (q * q));
  std::vector<double> mean(2, 0.0);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto c = simulate_null_poisson(fields, w, rng).count_by_type();
    for (int t = 0; t < 2; ++t) mean[t] += c[t] / 1000.0;
  }
  EXPECT_NEAR(mean[0] / mass_a, 1.0, 0.02);
  EXPECT_NEAR(mean[1] / 30.0, 1.0, 0.02);
}

TEST(NullPoisson, ZeroFieldGivesEmptyPattern) {
  Rng rng = make_rng(5);
  const Window w(Rect{0, 0, 5, 5});
  const std::vector<IntensityField> fields{IntensityField(w, 1.0, 1.0)};
  EXPECT_EQ(simulate_null_poisson(fields, w, rng).size(), 0u);
}

TEST(NullPoisson, UniformFieldGivesCsr) {
  Rng rng = make_rng(6);
  const Window w(Rect{0, 0, 20, 20});
  const std::vector<IntensityField> fields{constant_field(w, 0.5), constant_field(w, 0.5)};
  double k2 = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto x = simulate_null_poisson(fields, w, rng);
    k2 += kcross_inhom(x, field_intensity(fields), {2.0}).at(0, 1)[0] / 20;
  }
  EXPECT_NEAR(k2 / (4 * oracle::kPi), 1.0, 0.1);
}

TEST(Deviation, PValueRank) {
  std::vector<double> null(99);
  for (int s = 0; s < 99; ++s) null[s] = s * 0.01;
  EXPECT_DOUBLE_EQ(monte_carlo_p_value(5.0, null), 0.01);
  EXPECT_DOUBLE_EQ(monte_carlo_p_value(-1.0, null), 1.0);
  EXPECT_DOUBLE_EQ(monte_carlo_p_value(0.5, null), 50.0 / 100.0);
  // rank based: invariant to increasing transforms
  std::vector<double> t;
  for (double d : null) t.push_back(std::exp(3 * d));
  EXPECT_DOUBLE_EQ(monte_carlo_p_value(std::exp(1.5), t), monte_carlo_p_value(0.5, null));
  EXPECT_DOUBLE_EQ(deviation_statistic({1, 5, 2}, {0, 4.5, 0}), 2.0);
}

TEST(Deviation, EnvelopeContainsMeanAndPValueOnGrid) {
  Rng rng = make_rng(7);
  const Window w(Rect{0, 0, 12, 12});
  const std::vector<IntensityField> fields{constant_field(w, 0.3), constant_field(w, 0.3)};
  const auto x = simulate_null_poisson(fields, w, rng);
  DeviationOptions opt;
  opt.m = 19;
  opt.m_mean = 19;
  opt.r = default_r_grid(3.0, 32);
  const auto est = deviation_test(x, fields, opt, rng);
  for (std::size_t t = 0; t < est.r.size(); ++t) {
    EXPECT_LE(est.lower[t], est.null_mean[t] + 1e-12);
    EXPECT_GE(est.upper[t], est.null_mean[t] - 1e-12);
  }
  const double scaled = est.p_value * 20.0;
  EXPECT_NEAR(scaled, std::round(scaled), 1e-9);
  EXPECT_EQ(est.d_null.size(), 19u);
  EXPECT_EQ(est.reject, est.p_value <= 0.05);
}

TEST(Deviation, StrongClusteringRejects) {
  Rng rng = make_rng(8);
  const Window w(Rect{0, 0, 15, 15});
  ModelParams mp;
  mp.sigma = 0.15;
  mp.p = {0.05, 0.95};
  mp.lambda = 60;
  const auto x = simulate_model(mp, CenterDensity::uniform(w), w, rng, {true}).pattern;
  std::vector<IntensityField> fields;
  for (int t = 0; t < 2; ++t) fields.push_back(constant_field(w, x.count_by_type()[t] / w.area()));
  DeviationOptions opt;
  opt.m = 39;
  opt.m_mean = 39;
  opt.r = default_r_grid(3.0, 64);
  const auto est = deviation_test(x, fields, opt, rng);
  EXPECT_DOUBLE_EQ(est.p_value, 1.0 / 40.0);
  EXPECT_TRUE(est.reject);
}

TEST(Deviation, RefitUsesEachPatternsOwnKde) {
  Rng rng = make_rng(9);
  const Window w(Rect{0, 0, 10, 10});
  const std::vector<IntensityField> fields{constant_field(w, 0.5), constant_field(w, 0.5)};
  const auto x = simulate_null_poisson(fields, w, rng);
  DeviationOptions opt;
  opt.m = 19;
  opt.m_mean = 19;
  opt.r = default_r_grid(2.0, 16);
  opt.bandwidths = {1.5, 2.0};
  const auto est = deviation_test(x, fields, opt, rng);
  std::vector<IntensityField> own;
  for (int t = 0; t < 2; ++t) {
    std::vector<Point2> pts;
    for (const auto& p : x.points)
      if (p.mark == t) pts.push_back(p.x);
    own.push_back(kde_intensity(pts, w, opt.bandwidths[t]));
  }
  const auto k = kcross_inhom(x, field_intensity(own), opt.r);
  for (std::size_t t = 0; t < opt.r.size(); ++t) EXPECT_DOUBLE_EQ(est.k_obs.at(0, 1)[t], k.at(0, 1)[t]);
  opt.bandwidths = {1.5};
  EXPECT_THROW(deviation_test(x, fields, opt, rng), std::invalid_argument);
}
