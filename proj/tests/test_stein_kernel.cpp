#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "neb/neb_estimator.hpp"
#include "neb/stein_kernel.hpp"
#include "oracles.hpp"

using namespace neb;

TEST(Rbf, ClosedForm) {
  EXPECT_DOUBLE_EQ(rbf(0, 1, 2.0), std::exp(-0.25));
  EXPECT_DOUBLE_EQ(rbf(3, 3, 7.0), 1.0);
  EXPECT_DOUBLE_EQ(rbf(0, 1, 2.0, KernelConvention::Appendix), std::exp(-0.125));
  EXPECT_THROW(GapKernel(0.0, 3), std::domain_error);
}

TEST(KernelSystem, TwoPointHandValues) {
  const auto sys = build_kernel_system({0, 1}, 2.0, 1);
  const double e = std::exp(-0.25), e4 = std::exp(-1.0);
  EXPECT_NEAR(4.0 * sys.K(0, 1), e, 1e-15);
  // D_u K(u, v) at (u, v) = (1, 1) is K(2,1) - K(1,1).
  EXPECT_NEAR(4.0 * sys.dK(1, 1), e - 1.0, 1e-15);
  // D_uv K(0,1) = K(1,2) - K(1,1) - K(0,2) + K(0,1)
  EXPECT_NEAR(4.0 * sys.d2K(0, 1), e - 1.0 - e4 + e, 1e-15);
  const oracle::Rbf K{2.0, std::nullopt};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const long long u = sys.y[static_cast<std::size_t>(i)], v = sys.y[static_cast<std::size_t>(j)];
      EXPECT_NEAR(4.0 * sys.d2K(i, j), K(u + 1, v + 1) - K(u + 1, v) - K(u, v + 1) + K(u, v), 1e-15);
    }
}

TEST(EmpiricalKsd, ZeroHIsDoubleDifferenceSum) {
  const auto sys = build_kernel_system({0, 2, 2, 5}, 3.0, 1);
  EXPECT_NEAR(empirical_ksd(sys, Eigen::VectorXd::Zero(4)), sys.d2K.sum(), 1e-15);
}

TEST(EmpiricalKsd, TwoPointExpansion) {
  const std::vector<int> y{1, 3};
  const oracle::Rbf K{4.0, std::nullopt};
  for (int k : {0, 1}) {
    Eigen::VectorXd h(2);
    h << 0.3, -1.2;
    const double hand = (oracle::kappa(0.3, 0.3, 1, 1, k, K) + oracle::kappa(0.3, -1.2, 1, 3, k, K) +
                         oracle::kappa(-1.2, 0.3, 3, 1, k, K) + oracle::kappa(-1.2, -1.2, 3, 3, k, K)) /
                        4.0;
    EXPECT_NEAR(empirical_ksd(build_kernel_system(y, 4.0, k), h), hand, 1e-12);
  }
}

TEST(EmpiricalKsd, MatchesDoubleLoopKappa) {
  std::mt19937_64 g(77);
  std::uniform_int_distribution<int> len(2, 40), val(0, 15);
  std::uniform_real_distribution<double> hv(-3.0, 1.0), lam(0.5, 100.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<int> y(static_cast<std::size_t>(len(g)));
    for (int& v : y) v = val(g);
    const double lambda = lam(g);
    std::vector<double> h(y.size());
    for (double& v : h) v = hv(g);
    const Eigen::Map<const Eigen::VectorXd> hm(h.data(), static_cast<Eigen::Index>(h.size()));
    for (int k : {0, 1}) {
      const double ref = oracle::ksd_double_loop(y, h, k, {lambda, std::nullopt});
      EXPECT_NEAR(empirical_ksd(build_kernel_system(y, lambda, k), hm), ref, 1e-10);
      // also with a support bound on the kernel
      KernelOptions opt;
      opt.support_bound = 15;
      EXPECT_NEAR(empirical_ksd(build_kernel_system(y, lambda, k, opt), hm),
                  oracle::ksd_double_loop(y, h, k, {lambda, 15}), 1e-10);
    }
  }
}

TEST(ReducedSystem, EqualsFullOnTiedVectors) {
  const std::vector<int> y{4, 0, 2, 2, 4, 4, 7, 0};
  const CountTable t = tabulate(y);
  ASSERT_EQ(t.values, (std::vector<int>{0, 2, 4, 7}));
  ASSERT_EQ(t.counts, (std::vector<double>{2, 2, 3, 1}));
  Eigen::VectorXd g(4);
  g << 1.0, -0.5, 0.25, -2.0;
  Eigen::VectorXd h(8);
  for (std::size_t i = 0; i < y.size(); ++i) h[static_cast<Eigen::Index>(i)] = g[static_cast<Eigen::Index>(t.group[i])];
  for (int k : {0, 1}) {
    const auto full = build_kernel_system(y, 12.0, k);
    const auto red = build_reduced_system(t, 12.0, k);
    EXPECT_NEAR(red.ksd(g), empirical_ksd(full, h), 1e-13);
  }
}

TEST(PopulationKsd, DifferenceFormEqualsKappaForm) {
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(0.05, 1.0), hv(-2.0, 1.0);
  const int m = 6;
  for (int rep = 0; rep < 10; ++rep) {
    PmfTable p{std::vector<double>(m + 1)};
    double tot = 0.0;
    for (auto& v : p.p) tot += (v = u(g));
    for (auto& v : p.p) v /= tot;
    for (int k : {0, 1}) {
      std::vector<double> ht(m + 1), h0(m + 1);
      for (auto& v : ht) v = hv(g);
      for (int y = 0; y <= m; ++y) {
        const double py = p[static_cast<std::size_t>(y)];
        const double next = y < m ? p[static_cast<std::size_t>(y + 1)] : 0.0;
        h0[static_cast<std::size_t>(y)] = k == 1 ? (y == 0 ? 1.0 : 1.0 - p[static_cast<std::size_t>(y - 1)] / py)
                                                 : (y + 1.0) * next / py - y;
      }
      const double lambda = 0.5 + 4.5 * rep;
      const oracle::Rbf K{lambda, k == 1 ? std::optional<int>(m) : std::nullopt};
      double diff = 0.0, kap = 0.0;
      for (int a = 0; a <= m; ++a)
        for (int b = 0; b <= m; ++b) {
          const double w = p[static_cast<std::size_t>(a)] * p[static_cast<std::size_t>(b)];
          diff += (ht[static_cast<std::size_t>(a)] - h0[static_cast<std::size_t>(a)]) * K(a, b) *
                  (ht[static_cast<std::size_t>(b)] - h0[static_cast<std::size_t>(b)]) * w;
          kap += oracle::kappa(ht[static_cast<std::size_t>(a)], ht[static_cast<std::size_t>(b)], a, b, k, K) * w;
        }
      EXPECT_NEAR(diff, kap, 1e-8) << "k=" << k;
      KernelOptions opt;
      if (k == 1) opt.support_bound = m;
      EXPECT_NEAR(population_ksd_kappa(p, ht, lambda, k, opt), diff, 1e-8);
      EXPECT_NEAR(population_ksd(p, ht, h0, lambda, opt), diff, 1e-12);
      EXPECT_NEAR(population_ksd(p, h0, h0, lambda, opt), 0.0, 1e-15);
      std::vector<double> shifted = h0;
      for (auto& v : shifted) v += 0.7;
      double mass = 0.0;
      for (int a = 0; a <= m; ++a)
        for (int b = 0; b <= m; ++b) mass += K(a, b) * p[static_cast<std::size_t>(a)] * p[static_cast<std::size_t>(b)];
      EXPECT_NEAR(population_ksd(p, shifted, h0, lambda, opt), 0.49 * mass, 1e-12);
    }
  }
}

// Without zero-extension past m the k = 1 identity breaks on a bounded support.
TEST(PopulationKsd, BoundedSupportNeedsTruncatedKernel) {
  const PmfTable p{{0.1, 0.2, 0.3, 0.25, 0.15}};
  std::vector<double> ht{0.5, -0.2, 0.1, 0.3, -0.4};
  std::vector<double> h0(5);
  h0[0] = 1.0;
  for (int y = 1; y < 5; ++y) h0[static_cast<std::size_t>(y)] = 1.0 - p[static_cast<std::size_t>(y - 1)] / p[static_cast<std::size_t>(y)];
  KernelOptions bounded;
  bounded.support_bound = 4;
  EXPECT_NEAR(population_ksd_kappa(p, ht, 3.0, 1, bounded), population_ksd(p, ht, h0, 3.0, bounded), 1e-12);
  EXPECT_GT(std::abs(population_ksd_kappa(p, ht, 3.0, 1) - population_ksd(p, ht, h0, 3.0)), 1e-4);
}

TEST(KernelSystem, Errors) {
  EXPECT_THROW(build_kernel_system({1}, 1.0, 1), std::domain_error);
  EXPECT_THROW(build_kernel_system({1, -1}, 1.0, 1), std::domain_error);
  EXPECT_THROW(build_kernel_system({1, 2}, -1.0, 1), std::domain_error);
  EXPECT_THROW(build_kernel_system({1, 2}, 1.0, 2), std::domain_error);
  EXPECT_THROW(empirical_ksd(build_kernel_system({1, 2}, 1.0, 1), Eigen::VectorXd::Zero(3)), std::domain_error);
}
