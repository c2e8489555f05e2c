#pragma once

// Fast internal consistency checks run by `neb selftest`. Each check compares
// two independent computations of the same quantity.

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "neb/bayes_rules.hpp"
#include "neb/constraint_builder.hpp"
#include "neb/dle_models.hpp"
#include "neb/neb_estimator.hpp"
#include "neb/qp_solver.hpp"
#include "neb/spline.hpp"
#include "neb/stein_kernel.hpp"

namespace neb {

enum class Fault { None, KernelConvention };

struct SelftestResult {
  std::string name;
  bool pass = false;
  double value = 0.0;  // observed discrepancy
  double tolerance = 0.0;
};

namespace detail {

inline std::vector<PriorNode> random_finite_prior(std::mt19937_64& g, int atoms, double lo, double hi) {
  std::uniform_real_distribution<double> t(lo, hi), w(0.1, 1.0);
  std::vector<PriorNode> p(static_cast<std::size_t>(atoms));
  double total = 0.0;
  for (auto& n : p) total += (n = {t(g), w(g)}).weight;
  for (auto& n : p) n.weight /= total;
  return p;
}

inline double check_bayes_rule(std::mt19937_64& g) {
  double worst = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    for (const DleModel& model : {DleModel::poisson(), DleModel::binomial(6)}) {
      const auto prior = random_finite_prior(g, 3, 0.3, 4.0);
      const int ymax = model.support_max().value_or(25);
      const PmfTable p = marginal_pmf(model, prior, ymax);
      for (int k : {0, 1}) {
        const BayesRule a = bayes_rule_from_marginal(model, p, k);
        const BayesRule b = oracle_bayes(model, prior, k, ymax);
        for (int y = 0; y <= ymax; ++y)
          if (a.at(y) && b.at(y) && p[static_cast<std::size_t>(y)] > 1e-300)
            worst = std::max(worst, std::abs(*a.at(y) - *b.at(y)));
      }
    }
  }
  return worst;
}

inline double check_kappa_matrix(std::mt19937_64& g, Fault fault) {
  double worst = 0.0;
  std::uniform_int_distribution<int> len(2, 15), val(0, 9);
  std::uniform_real_distribution<double> hv(-2.0, 1.0), lam(1.0, 20.0);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<int> y(static_cast<std::size_t>(len(g)));
    for (int& v : y) v = val(g);
    const double lambda = lam(g);
    Eigen::VectorXd h(static_cast<Eigen::Index>(y.size()));
    for (Eigen::Index i = 0; i < h.size(); ++i) h[i] = hv(g);
    for (int k : {0, 1}) {
      KernelOptions mo;
      if (fault == Fault::KernelConvention) mo.convention = KernelConvention::Appendix;
      const double matrix = empirical_ksd(build_kernel_system(y, lambda, k, mo), h);
      const GapKernel ker(lambda, 12);
      double loop = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t j = 0; j < y.size(); ++j)
          loop += kappa(h[static_cast<Eigen::Index>(i)], h[static_cast<Eigen::Index>(j)], y[i], y[j], k, ker);
      loop /= static_cast<double>(y.size() * y.size());
      worst = std::max(worst, std::abs(matrix - loop));
    }
  }
  return worst;
}

inline double check_population_identity(std::mt19937_64& g) {
  double worst = 0.0;
  const DleModel model = DleModel::binomial(6);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int rep = 0; rep < 3; ++rep) {
    std::vector<double> raw(7);
    double tot = 0.0;
    for (auto& v : raw) tot += (v = u(g));
    PmfTable p{raw};
    for (auto& v : p.p) v /= tot;
    for (int k : {0, 1}) {
      std::vector<double> h0(7, 0.0), ht(7);
      const auto h = h0_from_pmf(p, k);
      for (std::size_t y = 0; y < 7; ++y) h0[y] = h[y].value_or(-6.0);  // k = 0 at y = m: p(m+1) = 0
      for (auto& v : ht) v = u(g) * 2.0 - 1.0;
      KernelOptions opt;
      if (k == 1) opt.support_bound = 6;
      const double diff = population_ksd(p, ht, h0, 5.0, opt);
      const double kap = population_ksd_kappa(p, ht, 5.0, k, opt);
      worst = std::max(worst, std::abs(diff - kap));
    }
  }
  return worst;
}

// KKT certificate of a solved random QP: stationarity, feasibility, dual
// sign and complementarity, computed from the raw problem data.
inline double check_qp_kkt(std::mt19937_64& g) {
  double worst = 0.0;
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 2 + rep % 5, p = 1 + rep % 4;
    Eigen::MatrixXd B(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) B(i, j) = nd(g);
    QpProblem pr;
    pr.P = B * B.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
    pr.q = Eigen::VectorXd(n);
    for (int i = 0; i < n; ++i) pr.q[i] = 3.0 * nd(g);
    pr.A = Eigen::MatrixXd(p, n);
    pr.b = Eigen::VectorXd(p);
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < n; ++j) pr.A(i, j) = nd(g);
      pr.b[i] = std::abs(nd(g));
    }
    const QpSolution s = solve(pr);
    if (s.status != QpStatus::Optimal) return std::numeric_limits<double>::infinity();
    const Eigen::VectorXd stat = pr.P * s.x + pr.q + pr.A.transpose() * s.ineq_dual;
    const Eigen::VectorXd slack = pr.A * s.x - pr.b;
    worst = std::max({worst, stat.lpNorm<Eigen::Infinity>() / (1.0 + pr.q.lpNorm<Eigen::Infinity>()),
                      slack.maxCoeff() > 0 ? slack.maxCoeff() : 0.0, -s.ineq_dual.minCoeff(),
                      (s.ineq_dual.array() * slack.array()).abs().maxCoeff()});
  }
  return worst;
}

inline double check_spline_line() {
  const SplineFit s = fit_natural_spline({0.0, 1.0, 2.5, 4.0}, {1.0, 3.0, 6.0, 9.0});
  double worst = 0.0;
  for (double x = -2.0; x <= 6.0; x += 0.25) worst = std::max(worst, std::abs(eval(s, x) - (1.0 + 2.0 * x)));
  return worst;
}

// E[Y/(m-Y+1)] = theta (1 - p(m)) and
// E[Y(Y-1)/((m-Y+2)(m-Y+1))] = theta^2 (1 - p(m-1) - p(m)), by enumeration.
inline double check_unbiasedness(std::mt19937_64& g) {
  double worst = 0.0;
  std::uniform_int_distribution<int> mm(1, 10);
  std::uniform_real_distribution<double> qq(0.05, 0.95);
  for (int rep = 0; rep < 10; ++rep) {
    const int m = mm(g);
    const double q = qq(g), theta = q / (1.0 - q);
    const DleModel model = DleModel::binomial(m);
    double e1 = 0.0, e2 = 0.0;
    for (int y = 0; y <= m; ++y) {
      const double p = model.pmf(y, theta);
      e1 += p * y / (m - y + 1.0);
      e2 += p * y * (y - 1.0) / ((m - y + 2.0) * (m - y + 1.0));
    }
    const double pm = model.pmf(m, theta), pm1 = model.pmf(m - 1, theta);
    const double t1 = theta * (1.0 - pm), t2 = theta * theta * (1.0 - pm - pm1);
    worst = std::max({worst, std::abs(e1 - t1) / (1.0 + t1), std::abs(e2 - t2) / (1.0 + t2)});
  }
  return worst;
}

// Structural constraints hold on a fit: monotone delta, delta(0) = 0 for k = 1.
inline double check_fit_constraints(std::mt19937_64& g) {
  double worst = 0.0;
  const std::vector<double> theta(60, 2.5);
  for (int k : {0, 1}) {
    const CountSample s = sample_counts(DleModel::poisson(), theta, g());
    const ShrinkageSolution sol = fit(s, k, 20.0);
    for (Eigen::Index a = 1; a < sol.delta_distinct.size(); ++a)
      worst = std::max(worst, sol.delta_distinct[a - 1] - sol.delta_distinct[a]);
    if (k == 1 && sol.values.front() == 0) worst = std::max(worst, std::abs(sol.delta_distinct[0]));
  }
  return worst;
}

}  // namespace detail

inline std::vector<SelftestResult> run_selftest(Fault fault = Fault::None, std::uint64_t seed = 20240611) {
  std::mt19937_64 g(seed);
  std::vector<SelftestResult> out;
  auto add = [&](std::string name, double value, double tol) {
    out.push_back({std::move(name), std::isfinite(value) && value <= tol, value, tol});
  };
  add("bayes_rule_vs_posterior_ratio", detail::check_bayes_rule(g), 1e-10);
  add("empirical_ksd_matrix_vs_kappa", detail::check_kappa_matrix(g, fault), 1e-10);
  add("population_ksd_difference_vs_kappa", detail::check_population_identity(g), 1e-8);
  add("qp_kkt_certificate", detail::check_qp_kkt(g), 1e-6);
  add("spline_reproduces_lines", detail::check_spline_line(), 1e-12);
  add("binomial_are_first_terms", detail::check_unbiasedness(g), 1e-12);
  add("fit_monotone_and_boundary", detail::check_fit_constraints(g), 1e-8);
  return out;
}

inline bool report_selftest(const std::vector<SelftestResult>& results, std::ostream& os) {
  bool ok = true;
  for (const auto& r : results) {
    ok &= r.pass;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e <= %.1e", r.value, r.tolerance);
    os << (r.pass ? "PASS " : "FAIL ") << r.name << "  " << buf << '\n';
  }
  os << (ok ? "selftest: all checks passed" : "selftest: FAILED") << '\n';
  return ok;
}

}  // namespace neb
