#include <cmath>

#include <gtest/gtest.h>

#include "neb/bandwidth_selector.hpp"
#include "oracles.hpp"

using namespace neb;

namespace {

// A solution carrying only what psi/are read.
ShrinkageSolution toy(std::vector<int> y, std::vector<int> values, std::vector<double> delta_distinct, int k) {
  ShrinkageSolution s;
  s.k = k;
  s.y = std::move(y);
  s.values = std::move(values);
  s.delta_distinct = Eigen::Map<Eigen::VectorXd>(delta_distinct.data(), static_cast<Eigen::Index>(delta_distinct.size()));
  s.delta.resize(static_cast<Eigen::Index>(s.y.size()));
  for (std::size_t i = 0; i < s.y.size(); ++i) s.delta[static_cast<Eigen::Index>(i)] = *s.delta_at(s.y[i]);
  return s;
}

}  // namespace

TEST(Psi, SplineFillsMissingCount) {
  const auto s = toy({0, 1, 3}, {0, 1, 3}, {0.0, 0.8, 2.9}, 1);
  const auto ps = psi(s, DleModel::poisson());
  const auto ref = oracle::dense_natural_spline({0.0, 1.0, 3.0}, {0.0, 0.8, 2.9});
  EXPECT_NEAR(ps[1], ref(2.0) * ref(2.0) / 2.0, 1e-10);
  EXPECT_NEAR(ps[0], 0.8 * 0.8 / 1.0, 1e-15);
  // count 4 lies past the data: secant through (1, 0.8), (3, 2.9)
  const double d4 = 2.9 + (2.9 - 0.8) / 2.0;
  EXPECT_NEAR(ps[2], d4 * d4 / 4.0, 1e-12);
}

TEST(Are, TwoPointPoissonByHand) {
  const double d1 = 0.7, d2 = 1.9;
  const auto s = toy({1, 2}, {1, 2}, {d1, d2}, 1);
  const double p1 = d2 * d2 / 2.0;
  const double d3 = d2 + (d2 - d1);
  const double p2 = d3 * d3 / 3.0;
  EXPECT_NEAR(are(s, DleModel::poisson()), 0.5 * (3.0 + p1 + p2 - 2.0 * (d1 + d2)), 1e-14);
}

TEST(Are, ZeroDeltaGivesSampleMean) {
  const auto s = toy({0, 2, 2, 5, 7}, {0, 2, 5, 7}, {0.0, 0.0, 0.0, 0.0}, 1);
  EXPECT_NEAR(are(s, DleModel::poisson()), 16.0 / 5.0, 1e-14);
}

TEST(Are, SquaredLossPoissonByHand) {
  const auto s = toy({1, 3, 3, 4}, {1, 3, 4}, {1.0, 2.0, 3.5}, 0);
  // psi(y) = delta(y-1): delta(0) by secant = 0.5, delta(2) by spline
  const auto ref = oracle::dense_natural_spline({1.0, 3.0, 4.0}, {1.0, 2.0, 3.5});
  const double d0 = 1.0 - (2.0 - 1.0) / 2.0;
  const double t1 = 0.0 + 6.0 + 6.0 + 12.0;
  const double t2 = 1.0 * d0 + 3.0 * ref(2.0) * 2.0 + 4.0 * 2.0;
  const double t3 = 1.0 + 4.0 + 4.0 + 3.5 * 3.5;
  EXPECT_NEAR(are(s, DleModel::poisson()), (t1 - 2.0 * t2 + t3) / 4.0, 1e-12);
}

// The Binomial first terms have exact expectations theta (1 - p(m)) and
// theta^2 (1 - p(m-1) - p(m)), which the estimate uses as stand-ins for
// theta and theta^2.
TEST(Are, BinomialFirstTermExpectations) {
  for (int m : {1, 3, 5, 10}) {
    for (double q : {0.1, 0.4, 0.8}) {
      const double th = q / (1.0 - q);
      double e1 = 0.0, e2 = 0.0;
      for (int y = 0; y <= m; ++y) {
        const double p = oracle::binomial_pmf(y, m, th);
        e1 += p * y / (m - y + 1.0);
        e2 += p * y * (y - 1.0) / ((m - y + 2.0) * (m - y + 1.0));
      }
      const double pm = oracle::binomial_pmf(m, m, th), pm1 = oracle::binomial_pmf(m - 1, m, th);
      EXPECT_NEAR(e1, th * (1.0 - pm), 1e-12);
      EXPECT_NEAR(e2, th * th * (1.0 - pm - pm1), 1e-12);
    }
  }
}

// E[(m - Y) f(Y+1) / (Y+1)] = E[f(Y) / theta] when f(0) = 0, so the psi term
// of the scaled-loss estimate is exact for delta^2 / theta.
TEST(Are, BinomialPsiTermIsUnbiased) {
  const int m = 6;
  const double th = 0.7;
  auto f = [](int y) { return y == 0 ? 0.0 : 0.3 + 0.5 * y; };
  double lhs = 0.0, rhs = 0.0;
  for (int y = 0; y <= m; ++y) {
    const double p = oracle::binomial_pmf(y, m, th);
    if (y < m) lhs += p * (m - y) * f(y + 1) * f(y + 1) / (y + 1.0);
    rhs += p * f(y) * f(y) / th;
  }
  EXPECT_NEAR(lhs, rhs, 1e-13);
}

TEST(Grid, DefaultAndErrors) {
  const auto g = default_grid();
  ASSERT_EQ(g.size(), 10u);
  EXPECT_DOUBLE_EQ(g.front(), 10.0);
  EXPECT_DOUBLE_EQ(g[1], 20.0);
  EXPECT_DOUBLE_EQ(g.back(), 100.0);
  EXPECT_EQ(default_grid(7.0, 7.0, 1), (std::vector<double>{7.0}));
  EXPECT_THROW(default_grid(10.0, 5.0, 3), std::invalid_argument);
  EXPECT_THROW(default_grid(10.0, 50.0, 0), std::invalid_argument);
  const auto s = make_sample({1, 2, 3}, DleModel::poisson());
  EXPECT_THROW(select_lambda(s, 1, {}), std::invalid_argument);
  EXPECT_THROW(select_lambda(s, 1, {5.0, 5.0}), std::invalid_argument);
  EXPECT_THROW(select_lambda(s, 1, {-1.0}), std::invalid_argument);
}

TEST(Select, SinglePointGrid) {
  const auto s = sample_counts(DleModel::poisson(), std::vector<double>(100, 2.0), 1);
  const auto c = select_lambda(s, 1, {33.0});
  EXPECT_EQ(c.lambda_hat, 33.0);
  const std::vector<double> theta(100, 2.0);
  EXPECT_EQ(oracle_lambda(s, 1, {33.0}, theta).lambda, 33.0);
}

TEST(Select, TiesGoToSmallestLambda) {
  EXPECT_EQ(detail::argmin_first({1.0, 1.0, 1.0}), 0u);
  EXPECT_EQ(detail::argmin_first({3.0, 1.0, 1.0, 2.0}), 1u);
}

TEST(Select, CurveArgminAndThreadsAgree) {
  const auto th = sample_theta(PriorSpec(UniformPrior{1.0, 4.0}), 400, 2);
  const auto s = sample_counts(DleModel::poisson(), th, 3);
  const auto a = select_lambda(s, 1, default_grid(), {{}, 1}, &th);
  const auto b = select_lambda(s, 1, default_grid(), {{}, 4}, &th);
  EXPECT_EQ(a.are, b.are);
  EXPECT_EQ(*a.losses, *b.losses);
  EXPECT_EQ(a.lambda_hat, a.grid[detail::argmin_first(a.are)]);
  EXPECT_THROW(oracle_lambda(select_lambda(s, 1, default_grid())), std::invalid_argument);
}

TEST(Select, LossAtSelectedNearOracle) {
  int good = 0;
  for (int seed = 0; seed < 20; ++seed) {
    const std::vector<double> theta(2000, 3.0);
    const auto s = sample_counts(DleModel::poisson(), theta, 1000 + seed);
    const auto c = select_lambda(s, 1, default_grid(), {}, &theta);
    const auto o = oracle_lambda(c);
    const double sel = (*c.losses)[c.index], best = o.losses[o.index];
    good += sel <= 1.1 * best;
  }
  EXPECT_GE(good, 16);
}
