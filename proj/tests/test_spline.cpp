#include <cmath>

#include <gtest/gtest.h>

#include "neb/spline.hpp"
#include "oracles.hpp"

using namespace neb;

TEST(Spline, ConstantData) {
  const auto s = fit_natural_spline({0.0, 1.0, 3.0, 4.5}, {2.0, 2.0, 2.0, 2.0});
  for (double x = 0.0; x <= 4.5; x += 0.1) EXPECT_NEAR(eval(s, x), 2.0, 1e-14);
}

TEST(Spline, TwoKnotsIsTheLine) {
  const auto s = fit_natural_spline({1.0, 3.0}, {0.0, 4.0});
  for (double x = -1.0; x <= 6.0; x += 0.25) EXPECT_NEAR(eval(s, x), 2.0 * (x - 1.0), 1e-13);
}

TEST(Spline, ReproducesLinesEverywhere) {
  const auto s = fit_natural_spline({0.0, 0.5, 2.0, 3.0, 7.0}, {1.0, 0.0, -3.0, -5.0, -13.0});
  for (double x = -3.0; x <= 10.0; x += 0.125) EXPECT_NEAR(eval(s, x), 1.0 - 2.0 * x, 1e-12);
}

TEST(Spline, InterpolatesKnotsAndNaturalEnds) {
  const std::vector<double> x{0.0, 1.0, 2.0, 4.0, 5.0}, y{1.0, -1.0, 3.0, 2.0, 8.0};
  const auto s = fit_natural_spline(x, y);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(eval(s, x[i]), y[i], 1e-12);
  EXPECT_EQ(s.second.front(), 0.0);
  EXPECT_EQ(s.second.back(), 0.0);
}

TEST(Spline, MatchesDenseCoefficientSolve) {
  const std::vector<double> x{0.0, 1.0, 2.0, 3.0}, y{0.0, 1.0, 8.0, 27.0};
  const auto s = fit_natural_spline(x, y);
  const auto ref = oracle::dense_natural_spline(x, y);
  for (double v = 0.0; v <= 3.0; v += 0.05) EXPECT_NEAR(eval(s, v), ref(v), 1e-10) << v;

  const std::vector<double> x2{0.0, 0.3, 1.1, 2.0, 2.2, 4.0}, y2{1.0, 2.0, 0.5, -1.0, 0.0, 3.0};
  const auto s2 = fit_natural_spline(x2, y2);
  const auto ref2 = oracle::dense_natural_spline(x2, y2);
  for (double v = 0.0; v <= 4.0; v += 0.01) EXPECT_NEAR(eval(s2, v), ref2(v), 1e-10) << v;
}

TEST(Spline, DerivativeMatchesFiniteDifferences) {
  const auto s = fit_natural_spline({0.0, 0.7, 1.5, 2.6, 4.0}, {0.0, 0.64, 0.997, 0.515, -0.757});
  const double h = 1e-4;
  for (double x = 0.1; x < 3.95; x += 0.13)
    EXPECT_NEAR(spline_derivative(s, x), (eval(s, x + h) - eval(s, x - h)) / (2.0 * h), 1e-6) << x;
}

// Data (0,1),(1,2),(2,4): beyond the last knot the spline continues along its
// end slope, which a one-sided difference recovers.
TEST(Spline, ExtrapolationUsesEndSlope) {
  const auto s = fit_natural_spline({0.0, 1.0, 2.0}, {1.0, 2.0, 4.0});
  const double h = 1e-5;
  const double fd = (eval(s, 2.0) - eval(s, 2.0 - h)) / h;
  EXPECT_NEAR(spline_derivative(s, 2.0), fd, 1e-8);
  EXPECT_NEAR(eval(s, 3.0), 4.0 + spline_derivative(s, 2.0), 1e-12);
  EXPECT_NEAR(eval(s, -1.0), 1.0 - spline_derivative(s, 0.0), 1e-12);
}

TEST(Spline, Errors) {
  EXPECT_THROW(fit_natural_spline({0.0, 1.0, 1.0}, {1.0, 2.0, 3.0}), std::domain_error);
  EXPECT_THROW(fit_natural_spline({0.0}, {1.0}), std::domain_error);
  EXPECT_THROW(fit_natural_spline({0.0, 1.0}, {1.0}), std::domain_error);
  EXPECT_THROW(fit_natural_spline({1.0, 0.0}, {1.0, 2.0}), std::domain_error);
}
