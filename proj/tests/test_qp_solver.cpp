#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "neb/qp_solver.hpp"
#include "oracles.hpp"

using namespace neb;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST(Qp, Unconstrained) {
  QpProblem pr;
  pr.P = MatrixXd::Identity(4, 4);
  pr.q = -VectorXd::Ones(4);
  const auto s = solve(pr);
  ASSERT_EQ(s.status, QpStatus::Optimal);
  EXPECT_NEAR((s.x - VectorXd::Ones(4)).norm(), 0.0, 1e-9);
  EXPECT_NEAR(s.objective, -2.0, 1e-9);
}

TEST(Qp, ClippedScalar) {
  QpProblem pr;
  pr.P = MatrixXd::Identity(1, 1);
  pr.q = -VectorXd::Ones(1);
  pr.A = MatrixXd::Ones(1, 1);
  pr.b = VectorXd::Constant(1, 0.5);
  const auto s = solve(pr);
  ASSERT_EQ(s.status, QpStatus::Optimal);
  EXPECT_NEAR(s.x[0], 0.5, 1e-9);
  EXPECT_NEAR(s.ineq_dual[0], 0.5, 1e-8);
}

TEST(Qp, EqualityOnly) {
  QpProblem pr;
  pr.P = MatrixXd::Identity(2, 2);
  pr.q = VectorXd::Zero(2);
  pr.C = MatrixXd::Ones(1, 2);
  pr.d = VectorXd::Constant(1, 2.0);
  const auto s = solve(pr);
  ASSERT_EQ(s.status, QpStatus::Optimal);
  EXPECT_NEAR(s.x[0], 1.0, 1e-9);
  EXPECT_NEAR(s.x[1], 1.0, 1e-9);
}

TEST(Qp, MatchesActiveSetEnumeration) {
  std::mt19937_64 g(2024);
  std::uniform_int_distribution<int> nn(1, 8), pp(0, 6), rr(0, 3);
  int checked = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const int n = nn(g);
    const int r = std::min(rr(g), n - 1);
    const auto inst = oracle::random_qp(g, n, pp(g), r);
    const auto ref = oracle::enumerate_active_sets(inst.P, inst.q, inst.A, inst.b, inst.C, inst.d);
    ASSERT_TRUE(ref.found) << rep;
    QpProblem pr{inst.P, inst.q, inst.A, inst.b, inst.C, inst.d};
    const auto s = solve(pr);
    ASSERT_EQ(s.status, QpStatus::Optimal) << rep;
    EXPECT_LE((s.x - ref.x).lpNorm<Eigen::Infinity>(), 1e-6) << rep;

    // KKT residuals from the raw data
    VectorXd stat = inst.P * s.x + inst.q;
    if (inst.A.rows()) stat += inst.A.transpose() * s.ineq_dual;
    if (inst.C.rows()) stat += inst.C.transpose() * s.eq_dual;
    EXPECT_LE(stat.lpNorm<Eigen::Infinity>(), 1e-6) << rep;
    if (inst.A.rows()) {
      const VectorXd slack = inst.A * s.x - inst.b;
      EXPECT_LE(slack.maxCoeff(), 1e-6);
      EXPECT_GE(s.ineq_dual.minCoeff(), -1e-6);
      EXPECT_LE((s.ineq_dual.array() * slack.array()).abs().maxCoeff(), 1e-6);
    }
    if (inst.C.rows()) EXPECT_LE((inst.C * s.x - inst.d).lpNorm<Eigen::Infinity>(), 1e-6);
    ++checked;
  }
  EXPECT_EQ(checked, 200);
}

TEST(Qp, SemidefiniteWithBoundedFeasibleSet) {
  // min -x1 over x1 <= 2, x2 free but tied to x1: a flat direction in P.
  QpProblem pr;
  pr.P = MatrixXd::Zero(2, 2);
  pr.P(1, 1) = 1.0;
  pr.q = VectorXd(2);
  pr.q << -1.0, 0.0;
  pr.A = MatrixXd(1, 2);
  pr.A << 1.0, 0.0;
  pr.b = VectorXd::Constant(1, 2.0);
  const auto s = solve(pr);
  ASSERT_EQ(s.status, QpStatus::Optimal);
  EXPECT_NEAR(s.x[0], 2.0, 1e-6);
  EXPECT_NEAR(s.x[1], 0.0, 1e-6);
}

TEST(Qp, DetectsInfeasibility) {
  QpProblem pr;
  pr.P = MatrixXd::Identity(2, 2);
  pr.q = VectorXd::Zero(2);
  pr.A = MatrixXd(2, 2);
  pr.A << 1.0, 0.0, -1.0, 0.0;  // x1 <= 0 and x1 >= 1
  pr.b = VectorXd(2);
  pr.b << 0.0, -1.0;
  const auto s = solve(pr);
  ASSERT_EQ(s.status, QpStatus::Infeasible);
  ASSERT_EQ(s.certificate.size(), 2);
  EXPECT_GT(std::abs(s.certificate[0]), 1e-3);
  EXPECT_GT(std::abs(s.certificate[1]), 1e-3);
}

TEST(Qp, InfeasibleEqualities) {
  QpProblem pr;
  pr.P = MatrixXd::Identity(2, 2);
  pr.q = VectorXd::Zero(2);
  pr.C = MatrixXd(2, 2);
  pr.C << 1.0, 1.0, 1.0, 1.0;
  pr.d = VectorXd(2);
  pr.d << 0.0, 1.0;
  EXPECT_EQ(solve(pr).status, QpStatus::Infeasible);
}

TEST(Qp, RejectsBadProblems) {
  QpProblem neg;
  neg.P = -MatrixXd::Identity(2, 2);
  neg.q = VectorXd::Zero(2);
  EXPECT_THROW(solve(neg), std::domain_error);
  QpProblem asym;
  asym.P = MatrixXd::Identity(2, 2);
  asym.P(0, 1) = 1.0;
  asym.q = VectorXd::Zero(2);
  EXPECT_THROW(solve(asym), std::invalid_argument);
  QpProblem shape;
  shape.P = MatrixXd::Identity(2, 2);
  shape.q = VectorXd::Zero(3);
  EXPECT_THROW(solve(shape), std::invalid_argument);
}

TEST(Qp, AdmmPathWithoutPolishStillConverges) {
  std::mt19937_64 g(9);
  QpOptions opt;
  opt.polish = false;
  for (int rep = 0; rep < 20; ++rep) {
    const auto inst = oracle::random_qp(g, 5, 4, 1);
    const auto ref = oracle::enumerate_active_sets(inst.P, inst.q, inst.A, inst.b, inst.C, inst.d);
    const auto s = solve({inst.P, inst.q, inst.A, inst.b, inst.C, inst.d}, opt);
    ASSERT_EQ(s.status, QpStatus::Optimal);
    EXPECT_LE((s.x - ref.x).lpNorm<Eigen::Infinity>(), 1e-4) << rep;
  }
}
