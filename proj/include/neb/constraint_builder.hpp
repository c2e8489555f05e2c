#pragma once

// Structural constraints on the ratio functional h, as rows of A h <= b and
// C h = d:
//   tie         h_i = h_j when y_i = y_j
//   boundary    h = 1 at y = 0 (k = 1), which makes delta(0) = 0
//   positivity  h <= 1 - eps for y > 0 (k = 1);  h >= -y + eps (k = 0)
//   monotone    delta nondecreasing across consecutive distinct counts
//
// With r(y) = a_{y-1}/a_y the k = 1 rule is delta = r/(1 - h), so for distinct
// counts a < b the monotone row is h_a - (r_a/r_b) h_b <= 1 - r_a/r_b.
// For k = 0, delta = s(y)(y + h) with s(y) = (a_y/a_{y+1})/(y+1), giving
// (s_a/s_b) h_a - h_b <= b - (s_a/s_b) a. Rows that touch y = m of a bounded
// support under k = 0 are skipped and the count is flagged instead.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "neb/bayes_rules.hpp"
#include "neb/dle_models.hpp"
#include "neb/stein_kernel.hpp"

namespace neb {

enum class RowKind { Monotone, Tie, Boundary, Positivity, Custom };

inline const char* to_string(RowKind k) {
  switch (k) {
    case RowKind::Monotone: return "monotone";
    case RowKind::Tie: return "tie";
    case RowKind::Boundary: return "boundary";
    case RowKind::Positivity: return "positivity";
    case RowKind::Custom: return "custom";
  }
  return "unknown";
}

struct ConstraintOptions {
  double epsilon = 1e-6;
  bool monotone = true;
};

struct ConstraintSet {
  Eigen::Index dim = 0;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  std::vector<RowKind> ineq_kind;
  std::vector<std::string> ineq_label;
  Eigen::MatrixXd C;
  Eigen::VectorXd d;
  std::vector<RowKind> eq_kind;
  std::vector<std::string> eq_label;
  std::vector<int> flagged;  // counts left out of the monotone chain

  explicit ConstraintSet(Eigen::Index n = 0) : dim(n), A(0, n), b(0), C(0, n), d(0) {}

  void add_inequality(const Eigen::RowVectorXd& row, double rhs, RowKind kind, std::string label) {
    append(A, b, row, rhs);
    ineq_kind.push_back(kind);
    ineq_label.push_back(std::move(label));
  }
  void add_equality(const Eigen::RowVectorXd& row, double rhs, RowKind kind, std::string label) {
    append(C, d, row, rhs);
    eq_kind.push_back(kind);
    eq_label.push_back(std::move(label));
  }

  std::size_t count(RowKind kind) const {
    std::size_t c = 0;
    for (auto k : ineq_kind) c += k == kind;
    for (auto k : eq_kind) c += k == kind;
    return c;
  }

  // Largest violation over all rows (<= 0 when h is feasible).
  double max_violation(const Eigen::VectorXd& h) const {
    double v = -std::numeric_limits<double>::infinity();
    if (A.rows()) v = std::max(v, (A * h - b).maxCoeff());
    if (C.rows()) v = std::max(v, (C * h - d).cwiseAbs().maxCoeff());
    return v;
  }

  // Labels of the stacked rows [A; C], in that order.
  std::string label_of_stacked(Eigen::Index i) const {
    const auto p = static_cast<Eigen::Index>(ineq_label.size());
    return i < p ? ineq_label[static_cast<std::size_t>(i)] : eq_label[static_cast<std::size_t>(i - p)];
  }

 private:
  void append(Eigen::MatrixXd& M, Eigen::VectorXd& v, const Eigen::RowVectorXd& row, double rhs) {
    if (row.size() != dim) throw std::invalid_argument("constraint row has the wrong length");
    M.conservativeResize(M.rows() + 1, dim);
    M.row(M.rows() - 1) = row;
    v.conservativeResize(v.size() + 1);
    v[v.size() - 1] = rhs;
  }
};

namespace detail {

inline std::string value_label(const char* kind, int y) { return std::string(kind) + "(y=" + std::to_string(y) + ")"; }

// s(y) = (a_y / a_{y+1}) / (y + 1); +inf at the top of a bounded support.
inline double k0_scale(const DleModel& model, int y) {
  return coefficient_ratio(model, y, 0) / static_cast<double>(y + 1);
}

// Rows over distinct counts; column c of each row refers to `columns[c]`.
inline ConstraintSet distinct_rows(const std::vector<int>& values, const std::vector<Eigen::Index>& columns,
                                   Eigen::Index dim, const DleModel& model, int k, const ConstraintOptions& opt) {
  require_loss_index(k);
  if (!(opt.epsilon > 0.0)) throw std::domain_error("positivity margin must be > 0");
  ConstraintSet cs(dim);
  const auto bound = model.support_max();
  auto unit = [&](std::size_t pos, double coef) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(dim);
    row[columns[pos]] = coef;
    return row;
  };

  for (std::size_t a = 0; a < values.size(); ++a) {
    const int y = values[a];
    if (k == 1 && y == 0) {
      cs.add_equality(unit(a, 1.0), 1.0, RowKind::Boundary, value_label("boundary", y));
    } else if (k == 1) {
      cs.add_inequality(unit(a, 1.0), 1.0 - opt.epsilon, RowKind::Positivity, value_label("positivity", y));
    } else {
      cs.add_inequality(unit(a, -1.0), static_cast<double>(y) - opt.epsilon, RowKind::Positivity,
                        value_label("positivity", y));
    }
  }

  for (std::size_t i = 0; i < values.size(); ++i)
    if (k == 0 && bound && values[i] == *bound) cs.flagged.push_back(values[i]);

  if (!opt.monotone) return cs;
  for (std::size_t j = 1; j < values.size(); ++j) {
    const int ya = values[j - 1], yb = values[j];
    const std::string label = "monotone(y=" + std::to_string(ya) + ",y=" + std::to_string(yb) + ")";
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(dim);
    if (k == 1) {
      const double ra = ya == 0 ? 0.0 : coefficient_ratio(model, ya, 1);
      const double rb = coefficient_ratio(model, yb, 1);
      const double t = ra / rb;
      row[columns[j - 1]] = 1.0;
      row[columns[j]] = -t;
      cs.add_inequality(row, 1.0 - t, RowKind::Monotone, label);
    } else {
      if (bound && yb == *bound) continue;
      const double t = k0_scale(model, ya) / k0_scale(model, yb);
      row[columns[j - 1]] = t;
      row[columns[j]] = -1.0;
      cs.add_inequality(row, static_cast<double>(yb) - t * ya, RowKind::Monotone, label);
    }
  }
  return cs;
}

}  // namespace detail

// One unknown per distinct count, in increasing order.
inline ConstraintSet build_reduced(const std::vector<int>& distinct, const DleModel& model, int k,
                                   const ConstraintOptions& opt = {}) {
  for (std::size_t i = 1; i < distinct.size(); ++i)
    if (distinct[i] <= distinct[i - 1]) throw std::invalid_argument("distinct counts must be strictly increasing");
  std::vector<Eigen::Index> cols(distinct.size());
  for (std::size_t i = 0; i < cols.size(); ++i) cols[i] = static_cast<Eigen::Index>(i);
  return detail::distinct_rows(distinct, cols, static_cast<Eigen::Index>(distinct.size()), model, k, opt);
}

// Full form on the n-vector h: tie chains within each group of equal counts,
// and the per-value rows placed on the group's first coordinate.
inline ConstraintSet build(const CountSample& sample, int k, const ConstraintOptions& opt = {}) {
  sample.validate();
  const CountTable table = tabulate(sample.y);
  const auto n = static_cast<Eigen::Index>(sample.y.size());
  std::vector<std::vector<Eigen::Index>> members(table.values.size());
  for (std::size_t i = 0; i < sample.y.size(); ++i) members[table.group[i]].push_back(static_cast<Eigen::Index>(i));
  std::vector<Eigen::Index> reps(table.values.size());
  for (std::size_t g = 0; g < reps.size(); ++g) reps[g] = members[g].front();

  ConstraintSet cs = detail::distinct_rows(table.values, reps, n, sample.model, k, opt);
  for (std::size_t g = 0; g < members.size(); ++g) {
    for (std::size_t j = 1; j < members[g].size(); ++j) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
      row[members[g][j - 1]] = 1.0;
      row[members[g][j]] = -1.0;
      cs.add_equality(row, 0.0, RowKind::Tie,
                      "tie(y=" + std::to_string(table.values[g]) + ",i=" + std::to_string(members[g][j - 1]) +
                          ",j=" + std::to_string(members[g][j]) + ")");
    }
  }
  return cs;
}

}  // namespace neb
