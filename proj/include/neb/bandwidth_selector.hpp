#pragma once

// Bandwidth choice by minimizing an asymptotic risk estimate (ARE) over a grid.
//
//   Poisson  k=1:  n^-1 { sum y_i + sum psi_i - 2 sum delta_i },            psi_i = delta(y_i+1)^2/(y_i+1)
//   Binomial k=1:  n^-1 { sum y_i/(m-y_i+1) + sum (m-y_i) psi_i - 2 sum delta_i }
//   Poisson  k=0:  n^-1 { sum y_i(y_i-1) - 2 sum y_i psi_i + sum delta_i^2 }, psi_i = delta(y_i-1)
//   Binomial k=0:  n^-1 { sum y_i(y_i-1)/((m-y_i+2)(m-y_i+1)) - 2 sum y_i psi_i + sum delta_i^2 },
//                  psi_i = delta(y_i-1)/(m-y_i+1)
//
// delta at a count missing from the sample comes from a natural cubic spline
// through the fitted (count, delta) pairs, or from the secant through the two
// nearest distinct counts when it lies outside the observed range.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "neb/dle_models.hpp"
#include "neb/error.hpp"
#include "neb/loss.hpp"
#include "neb/neb_estimator.hpp"
#include "neb/parallel.hpp"
#include "neb/spline.hpp"

namespace neb {

namespace detail {

class DeltaLookup {
 public:
  explicit DeltaLookup(const ShrinkageSolution& s) : s_(s) {}

  double at(int count) {
    if (auto d = s_.delta_at(count)) return *d;
    const auto& v = s_.values;
    if (v.size() < 2) throw std::domain_error("delta interpolation needs at least two distinct counts");
    if (count > v.back()) return secant(v.size() - 2, count);
    if (count < v.front()) return secant(0, count);
    if (!spline_) {
      std::vector<double> knots(v.begin(), v.end());
      std::vector<double> vals(s_.delta_distinct.data(), s_.delta_distinct.data() + s_.delta_distinct.size());
      spline_ = fit_natural_spline(std::move(knots), std::move(vals));
    }
    return eval(*spline_, count);
  }

 private:
  double secant(std::size_t a, int x) const {
    const double x0 = s_.values[a], x1 = s_.values[a + 1];
    const double y0 = s_.delta_distinct[static_cast<Eigen::Index>(a)];
    const double y1 = s_.delta_distinct[static_cast<Eigen::Index>(a + 1)];
    return y1 + (y1 - y0) / (x1 - x0) * (x - x1);
  }

  const ShrinkageSolution& s_;
  std::optional<SplineFit> spline_;
};

}  // namespace detail

inline std::vector<double> psi(const ShrinkageSolution& sol, const DleModel& model) {
  const int k = sol.k;
  const auto bound = model.support_max();
  detail::DeltaLookup lookup(sol);
  // One value per distinct count, then expanded.
  std::vector<double> per_value(sol.values.size(), 0.0);
  for (std::size_t a = 0; a < sol.values.size(); ++a) {
    const int y = sol.values[a];
    if (k == 1) {
      if (bound && y == *bound) continue;
      const double d = lookup.at(y + 1);
      per_value[a] = d * d / (y + 1.0);
    } else {
      if (y == 0) continue;
      const double d = lookup.at(y - 1);
      per_value[a] = bound ? d / (*bound - y + 1.0) : d;
    }
  }
  std::vector<double> out(sol.y.size());
  for (std::size_t i = 0; i < sol.y.size(); ++i) {
    auto it = std::lower_bound(sol.values.begin(), sol.values.end(), sol.y[i]);
    out[i] = per_value[static_cast<std::size_t>(it - sol.values.begin())];
  }
  return out;
}

inline double are(const ShrinkageSolution& sol, const DleModel& model) {
  require_loss_index(sol.k);
  const auto bound = model.support_max();
  const std::vector<double> ps = psi(sol, model);
  const std::size_t n = sol.y.size();
  double t1 = 0.0, t2 = 0.0, t3 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = sol.y[i];
    const double d = sol.delta[static_cast<Eigen::Index>(i)];
    if (sol.k == 1) {
      if (bound) {
        const double m = *bound;
        t1 += y / (m - y + 1.0);
        t2 += (m - y) * ps[i];
      } else {
        t1 += y;
        t2 += ps[i];
      }
      t3 += d;
    } else {
      if (bound) {
        const double m = *bound;
        t1 += y * (y - 1.0) / ((m - y + 2.0) * (m - y + 1.0));
      } else {
        t1 += y * (y - 1.0);
      }
      t2 += y * ps[i];
      t3 += d * d;
    }
  }
  const double total = sol.k == 1 ? t1 + t2 - 2.0 * t3 : t1 - 2.0 * t2 + t3;
  return total / static_cast<double>(n);
}

inline std::vector<double> default_grid(double lo = 10.0, double hi = 100.0, std::size_t points = 10) {
  if (points == 0) throw std::invalid_argument("grid needs at least one point");
  if (points == 1) return {lo};
  if (!(lo < hi)) throw std::invalid_argument("grid requires lo < hi");
  return detail::linspace(lo, hi, points);
}

struct BandwidthOptions {
  FitOptions fit;
  unsigned threads = 1;
};

struct AreCurve {
  std::vector<double> grid;
  std::vector<double> are;
  double lambda_hat = 0.0;
  std::size_t index = 0;
  std::vector<ShrinkageSolution> solutions;
  std::optional<std::vector<double>> losses;  // realized L_n when truth is supplied

  const ShrinkageSolution& selected() const { return solutions.at(index); }
};

namespace detail {

inline void require_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("bandwidth grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0) || !std::isfinite(grid[i])) throw std::invalid_argument("bandwidths must be positive");
    if (i && !(grid[i] > grid[i - 1])) throw std::invalid_argument("bandwidth grid must be strictly increasing");
  }
}

// First index of the minimum: ties go to the smallest lambda.
inline std::size_t argmin_first(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[best]) best = i;
  return best;
}

inline std::vector<ShrinkageSolution> fit_grid(const NebProblem& problem, const std::vector<double>& grid,
                                               unsigned threads) {
  std::vector<std::optional<ShrinkageSolution>> slots(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    try {
      slots[i] = problem.fit(grid[i]);
    } catch (const InfeasibleError& e) {
      throw InfeasibleError(std::string(e.what()), e.rows());
    } catch (const std::exception& e) {
      throw std::runtime_error("fit failed at lambda=" + std::to_string(grid[i]) + ": " + e.what());
    }
  });
  std::vector<ShrinkageSolution> out;
  out.reserve(grid.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace detail

inline AreCurve select_lambda(const CountSample& sample, int k, const std::vector<double>& grid,
                              const BandwidthOptions& opt = {}, const std::vector<double>* theta = nullptr) {
  detail::require_grid(grid);
  if (theta && theta->size() != sample.y.size()) throw std::invalid_argument("theta has the wrong length");
  const NebProblem problem(sample, k, opt.fit);
  AreCurve c;
  c.grid = grid;
  c.solutions = detail::fit_grid(problem, grid, opt.threads);
  c.are.reserve(grid.size());
  for (const auto& s : c.solutions) c.are.push_back(are(s, sample.model));
  c.index = detail::argmin_first(c.are);
  c.lambda_hat = grid[c.index];
  if (theta) {
    std::vector<double> losses;
    for (const auto& s : c.solutions) losses.push_back(compound_loss(*theta, s.delta, k).compound);
    c.losses = std::move(losses);
  }
  return c;
}

struct OracleBandwidth {
  double lambda = 0.0;
  std::size_t index = 0;
  ShrinkageSolution solution;
  std::vector<double> losses;
};

// Bandwidth minimizing the realized loss; needs the true theta.
inline OracleBandwidth oracle_lambda(const AreCurve& curve) {
  if (!curve.losses) throw std::invalid_argument("oracle bandwidth needs realized losses");
  OracleBandwidth o;
  o.losses = *curve.losses;
  o.index = detail::argmin_first(o.losses);
  o.lambda = curve.grid[o.index];
  o.solution = curve.solutions[o.index];
  return o;
}

inline OracleBandwidth oracle_lambda(const CountSample& sample, int k, const std::vector<double>& grid,
                                     const std::vector<double>& theta, const BandwidthOptions& opt = {}) {
  return oracle_lambda(select_lambda(sample, k, grid, opt, &theta));
}

}  // namespace neb
