#pragma once

// NEB shrinkage: minimize the empirical KSD over the constrained ratio
// functional h, then map
//   k = 1:  w = 1 - h,            delta = (a_{y-1}/a_y) / w   (delta = 0 at y = 0)
//   k = 0:  w = (y+1) / (y + h),  delta = (a_y/a_{y+1}) / w
// The QP is solved with one unknown per distinct count and expanded back, so
// equal counts always receive bitwise-equal estimates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "neb/bayes_rules.hpp"
#include "neb/constraint_builder.hpp"
#include "neb/dle_models.hpp"
#include "neb/error.hpp"
#include "neb/qp_solver.hpp"
#include "neb/stein_kernel.hpp"

namespace neb {

enum CoordFlag : unsigned {
  kFlagNone = 0,
  kFlagBoundaryZero = 1u << 0,  // delta fixed at 0 by the y < k rule
  kFlagExtrapolated = 1u << 1,  // delta extrapolated (y = m, k = 0)
};

inline std::string flag_string(unsigned f) {
  std::string s;
  if (f & kFlagBoundaryZero) s += "boundary_zero";
  if (f & kFlagExtrapolated) s += s.empty() ? "extrapolated" : "|extrapolated";
  return s;
}

struct FitOptions {
  ConstraintOptions constraints;
  QpOptions qp;
  KernelConvention convention = KernelConvention::MainText;
  // Zero-extends the kernel past m for bounded supports under k = 1.
  bool truncate_bounded_kernel = true;
};

struct SolverDiagnostics {
  QpStatus status = QpStatus::MaxIter;
  int iterations = 0;
  double objective = 0.0;  // empirical KSD at the solution
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool polished = false;
  std::size_t distinct = 0;
  std::size_t inequality_rows = 0;
  std::size_t equality_rows = 0;
};

struct ShrinkageSolution {
  double lambda = 0.0;
  int k = 1;
  std::vector<int> y;
  Eigen::VectorXd h, w, delta;  // per coordinate
  std::vector<unsigned> flags;
  std::vector<int> values;  // distinct counts, increasing
  Eigen::VectorXd h_distinct, w_distinct, delta_distinct;
  SolverDiagnostics diagnostics;
  std::vector<std::string> warnings;

  // delta at an observed count; nullopt if the count is not in the sample.
  std::optional<double> delta_at(int count) const {
    auto it = std::lower_bound(values.begin(), values.end(), count);
    if (it == values.end() || *it != count) return std::nullopt;
    return delta_distinct[it - values.begin()];
  }
};

// Oracle h on {0..size-1} from an exact pmf table.
inline std::vector<std::optional<double>> h0_from_pmf(const PmfTable& p, int k) {
  require_loss_index(k);
  std::vector<std::optional<double>> h(p.size());
  for (std::size_t y = 0; y < p.size(); ++y) {
    if (k == 1) {
      if (y == 0) h[y] = 1.0;
      else if (p[y] > 0.0) h[y] = 1.0 - p[y - 1] / p[y];
    } else if (p[y] > 0.0 && y + 1 < p.size()) {
      h[y] = static_cast<double>(y + 1) * p[y + 1] / p[y] - static_cast<double>(y);
    }
  }
  return h;
}

// The reduced problem for one (sample, k): counts, constraints and the map
// back to coordinates. Reused across a bandwidth grid.
class NebProblem {
 public:
  NebProblem(CountSample sample, int k, FitOptions opt = {})
      : sample_(std::move(sample)), k_(k), opt_(std::move(opt)) {
    require_loss_index(k_);
    sample_.validate();
    table_ = tabulate(sample_.y);
    constraints_ = build_reduced(table_.values, sample_.model, k_, opt_.constraints);
    const auto bound = sample_.model.support_max();
    if (k_ == 0 && bound && table_.values.size() == 1 && table_.values.front() == *bound)
      throw DataError("every count equals the trial number m; the k = 0 rule is undefined there");
    if (k_ == 1 && opt_.truncate_bounded_kernel) kernel_opt_.support_bound = bound;
    kernel_opt_.convention = opt_.convention;
  }

  const CountSample& sample() const noexcept { return sample_; }
  const CountTable& table() const noexcept { return table_; }
  const ConstraintSet& constraints() const noexcept { return constraints_; }
  const KernelOptions& kernel_options() const noexcept { return kernel_opt_; }
  int k() const noexcept { return k_; }

  ReducedKernelSystem system(double lambda) const { return build_reduced_system(table_, lambda, k_, kernel_opt_); }

  ShrinkageSolution fit(double lambda) const {
    const ReducedKernelSystem sys = system(lambda);
    QpProblem qp{2.0 * sys.Q, 2.0 * sys.lin, constraints_.A, constraints_.b, constraints_.C, constraints_.d};
    const QpSolution qs = solve(std::move(qp), opt_.qp);
    if (qs.status == QpStatus::Infeasible) {
      std::vector<std::string> rows;
      for (Eigen::Index i = 0; i < qs.certificate.size(); ++i)
        if (std::abs(qs.certificate[i]) > 1e-6) rows.push_back(constraints_.label_of_stacked(i));
      throw InfeasibleError("constraint set is infeasible at lambda=" + std::to_string(lambda), std::move(rows));
    }

    ShrinkageSolution s;
    s.lambda = lambda;
    s.k = k_;
    s.y = sample_.y;
    s.values = table_.values;
    s.h_distinct = qs.x;
    map_distinct(s);
    expand(s);

    auto& dg = s.diagnostics;
    dg.status = qs.status;
    dg.iterations = qs.iterations;
    dg.objective = sys.ksd(qs.x);
    dg.primal_residual = qs.primal_residual;
    dg.dual_residual = qs.dual_residual;
    dg.polished = qs.polished;
    dg.distinct = table_.values.size();
    dg.inequality_rows = static_cast<std::size_t>(constraints_.A.rows());
    dg.equality_rows = static_cast<std::size_t>(constraints_.C.rows());
    if (qs.status == QpStatus::MaxIter)
      s.warnings.push_back("solver stopped at the iteration cap; residuals primal=" +
                           std::to_string(qs.primal_residual) + " dual=" + std::to_string(qs.dual_residual));
    if (k_ == 1 && table_.values.size() == 1 && table_.values.front() == 0)
      s.warnings.push_back("boundary_determined: all counts are 0, h is fixed by the constraints");
    return s;
  }

 private:
  void map_distinct(ShrinkageSolution& s) const {
    const DleModel& model = sample_.model;
    const auto D = static_cast<Eigen::Index>(table_.values.size());
    s.w_distinct.resize(D);
    s.delta_distinct.resize(D);
    const auto bound = model.support_max();
    std::vector<Eigen::Index> extrapolate;
    for (Eigen::Index a = 0; a < D; ++a) {
      const int y = table_.values[static_cast<std::size_t>(a)];
      const double h = s.h_distinct[a];
      if (k_ == 1) {
        if (y == 0) s.h_distinct[a] = 1.0;  // its boundary row; drops KKT roundoff
        s.w_distinct[a] = 1.0 - s.h_distinct[a];
        s.delta_distinct[a] = y == 0 ? 0.0 : coefficient_ratio(model, y, 1) / s.w_distinct[a];
      } else {
        s.w_distinct[a] = static_cast<double>(y + 1) / (static_cast<double>(y) + h);
        if (bound && y == *bound) {
          extrapolate.push_back(a);
          continue;
        }
        s.delta_distinct[a] = coefficient_ratio(model, y, 0) / s.w_distinct[a];
      }
    }
    for (Eigen::Index a : extrapolate) {
      // Two largest distinct counts below m; a is the last index.
      const double y_top = table_.values[static_cast<std::size_t>(a)];
      if (a == 1) {
        s.delta_distinct[a] = s.delta_distinct[0];
      } else {
        const double y1 = table_.values[static_cast<std::size_t>(a - 2)];
        const double y2 = table_.values[static_cast<std::size_t>(a - 1)];
        const double d1 = s.delta_distinct[a - 2], d2 = s.delta_distinct[a - 1];
        s.delta_distinct[a] = std::max(d2, d2 + (d2 - d1) / (y2 - y1) * (y_top - y2));
      }
    }
  }

  void expand(ShrinkageSolution& s) const {
    const auto n = static_cast<Eigen::Index>(sample_.y.size());
    s.h.resize(n);
    s.w.resize(n);
    s.delta.resize(n);
    s.flags.assign(sample_.y.size(), kFlagNone);
    const auto bound = sample_.model.support_max();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto g = static_cast<Eigen::Index>(table_.group[static_cast<std::size_t>(i)]);
      s.h[i] = s.h_distinct[g];
      s.w[i] = s.w_distinct[g];
      s.delta[i] = s.delta_distinct[g];
      const int y = sample_.y[static_cast<std::size_t>(i)];
      if (y < k_) s.flags[static_cast<std::size_t>(i)] |= kFlagBoundaryZero;
      if (k_ == 0 && bound && y == *bound) s.flags[static_cast<std::size_t>(i)] |= kFlagExtrapolated;
    }
  }

  CountSample sample_;
  int k_;
  FitOptions opt_;
  CountTable table_;
  ConstraintSet constraints_;
  KernelOptions kernel_opt_;
};

inline ShrinkageSolution fit(const CountSample& sample, int k, double lambda, const FitOptions& opt = {}) {
  return NebProblem(sample, k, opt).fit(lambda);
}

}  // namespace neb
