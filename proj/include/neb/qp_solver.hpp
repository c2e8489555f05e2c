#pragma once

// Dense convex QP
//   minimize 1/2 x'Px + q'x  subject to  Ax <= b,  Cx = d
// by operator splitting on the stacked constraint l <= Mx <= u (M = [A; C]),
// followed by an active-set polish that solves the KKT system exactly and
// accepts the point only if it passes a full KKT check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <set>
#include <vector>

#include <Eigen/Dense>

namespace neb {

struct QpProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd A;  // p x n
  Eigen::VectorXd b;
  Eigen::MatrixXd C;  // r x n
  Eigen::VectorXd d;
};

struct QpOptions {
  int max_iter = 50000;
  double eps_abs = 1e-8;
  double eps_rel = 1e-9;
  double eps_infeasible = 1e-9;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  double ridge = 1e-10;  // times trace(P)/n, added inside the splitting iteration only
  bool polish = true;
  int scaling_iter = 15;
  int check_every = 25;
};

enum class QpStatus { Optimal, MaxIter, Infeasible };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::MaxIter: return "max-iter";
    case QpStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd ineq_dual;  // >= 0
  Eigen::VectorXd eq_dual;
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  QpStatus status = QpStatus::MaxIter;
  bool polished = false;
  // Primal infeasibility certificate over the stacked rows [A; C], normalized to
  // unit sup norm; empty unless status == Infeasible.
  Eigen::VectorXd certificate;
  double certificate_norm = 0.0;
};

namespace detail {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double inf_norm(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

inline double col_inf_norm(const MatrixXd& m, Index j) {
  return m.rows() ? m.col(j).lpNorm<Eigen::Infinity>() : 0.0;
}

inline void normalize_shapes(QpProblem& pr) {
  const Index n = pr.q.size();
  if (pr.P.rows() != n || pr.P.cols() != n) throw std::invalid_argument("P must be n x n with n = size(q)");
  if (pr.A.size() == 0) pr.A.resize(pr.b.size() == 0 ? 0 : pr.A.rows(), n);
  if (pr.C.size() == 0) pr.C.resize(pr.d.size() == 0 ? 0 : pr.C.rows(), n);
  if (pr.A.cols() != n || pr.A.rows() != pr.b.size()) throw std::invalid_argument("A/b dimensions inconsistent");
  if (pr.C.cols() != n || pr.C.rows() != pr.d.size()) throw std::invalid_argument("C/d dimensions inconsistent");
  if (!pr.P.allFinite() || !pr.q.allFinite() || !pr.A.allFinite() || !pr.b.allFinite() || !pr.C.allFinite() ||
      !pr.d.allFinite())
    throw std::invalid_argument("QP data must be finite");
  const double pn = pr.P.size() ? pr.P.cwiseAbs().maxCoeff() : 0.0;
  const double asym = pr.P.size() ? (pr.P - pr.P.transpose()).cwiseAbs().maxCoeff() : 0.0;
  if (asym > 1e-12 * std::max(1.0, pn)) throw std::invalid_argument("P is not symmetric");
  pr.P = 0.5 * (pr.P + pr.P.transpose());
}

inline void require_convex(const MatrixXd& P) {
  if (P.size() == 0) return;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(P, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double norm = std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()));
  if (ev.minCoeff() < -1e-8 * norm) throw std::domain_error("QP is not convex: P has a negative eigenvalue");
}

// Residuals and objective in the original problem space.
inline void evaluate(const QpProblem& pr, QpSolution& s) {
  const VectorXd Px = pr.P * s.x;
  s.objective = 0.5 * s.x.dot(Px) + pr.q.dot(s.x);
  double prim = 0.0;
  if (pr.A.rows()) prim = std::max(prim, (pr.A * s.x - pr.b).maxCoeff());
  if (pr.C.rows()) prim = std::max(prim, inf_norm(pr.C * s.x - pr.d));
  s.primal_residual = std::max(prim, 0.0);
  VectorXd g = Px + pr.q;
  if (pr.A.rows()) g += pr.A.transpose() * s.ineq_dual;
  if (pr.C.rows()) g += pr.C.transpose() * s.eq_dual;
  s.dual_residual = inf_norm(g);
}

inline double primal_target(const QpProblem& pr) { return 1e-8 * (1.0 + inf_norm(pr.b) + inf_norm(pr.d)); }

inline bool meets_optimality(const QpProblem& pr, const QpSolution& s) {
  if (s.primal_residual > primal_target(pr) || s.dual_residual > 1e-6)
    return false;
  if (s.ineq_dual.size() && s.ineq_dual.minCoeff() < 0.0) return false;
  if (pr.A.rows()) {
    const VectorXd slack = pr.A * s.x - pr.b;
    if ((s.ineq_dual.array() * slack.array()).abs().maxCoeff() > 1e-6) return false;
  }
  return true;
}

// Solves the equality-constrained QP on a guessed active set, then adds the
// most violated inactive row or drops the most negative multiplier until the
// KKT conditions hold or the budget runs out.
inline std::optional<QpSolution> polish(const QpProblem& pr, std::vector<char> active) {
  const Index n = pr.q.size(), p = pr.A.rows(), r = pr.C.rows();
  const double ptol = 0.1 * primal_target(pr);
  const double dtol = 1e-12 * (1.0 + inf_norm(pr.q));
  const int budget = 4 * static_cast<int>(p) + 8;
  std::set<std::vector<char>> seen{active};
  for (int round = 0; round < budget; ++round) {
    std::vector<Index> rows;
    for (Index i = 0; i < p; ++i)
      if (active[static_cast<std::size_t>(i)]) rows.push_back(i);
    const Index na = static_cast<Index>(rows.size());
    const Index dim = n + na + r;
    MatrixXd K = MatrixXd::Zero(dim, dim);
    VectorXd rhs(dim);
    K.topLeftCorner(n, n) = pr.P;
    rhs.head(n) = -pr.q;
    for (Index a = 0; a < na; ++a) {
      K.block(n + a, 0, 1, n) = pr.A.row(rows[static_cast<std::size_t>(a)]);
      K.block(0, n + a, n, 1) = pr.A.row(rows[static_cast<std::size_t>(a)]).transpose();
      rhs[n + a] = pr.b[rows[static_cast<std::size_t>(a)]];
    }
    if (r) {
      K.block(n + na, 0, r, n) = pr.C;
      K.block(0, n + na, n, r) = pr.C.transpose();
      rhs.tail(r) = pr.d;
    }
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(K);
    const VectorXd sol = cod.solve(rhs);
    if (!sol.allFinite() || inf_norm(K * sol - rhs) > 1e-9 * (1.0 + inf_norm(rhs))) return std::nullopt;

    QpSolution s;
    s.x = sol.head(n);
    s.ineq_dual = VectorXd::Zero(p);
    for (Index a = 0; a < na; ++a) s.ineq_dual[rows[static_cast<std::size_t>(a)]] = sol[n + a];
    s.eq_dual = sol.tail(r);

    Index worst_viol = -1, worst_neg = -1;
    double viol = ptol, neg = -dtol;
    if (p) {
      const VectorXd slack = pr.A * s.x - pr.b;
      for (Index i = 0; i < p; ++i) {
        if (!active[static_cast<std::size_t>(i)] && slack[i] > viol) viol = slack[i], worst_viol = i;
        if (active[static_cast<std::size_t>(i)] && s.ineq_dual[i] < neg) neg = s.ineq_dual[i], worst_neg = i;
      }
    }
    if (worst_viol >= 0) {
      active[static_cast<std::size_t>(worst_viol)] = 1;
      if (!seen.insert(active).second) return std::nullopt;
      continue;
    }
    if (worst_neg >= 0) {
      active[static_cast<std::size_t>(worst_neg)] = 0;
      if (!seen.insert(active).second) return std::nullopt;  // cycling on a degenerate set
      continue;
    }
    s.ineq_dual = s.ineq_dual.cwiseMax(0.0);
    evaluate(pr, s);
    s.polished = true;
    if (!meets_optimality(pr, s)) return std::nullopt;
    s.status = QpStatus::Optimal;
    return s;
  }
  return std::nullopt;
}

// Minimum-norm correction putting x exactly on the rows ADMM left within tol
// of active and on the equalities. Kept only if no other row becomes violated.
inline void snap_to_active(const QpProblem& pr, QpSolution& s, double tol) {
  const Index n = s.x.size(), p = pr.A.rows(), r = pr.C.rows();
  std::vector<Index> rows;
  const VectorXd slack = p ? VectorXd(pr.A * s.x - pr.b) : VectorXd();
  for (Index i = 0; i < p; ++i)
    if (slack[i] > -tol) rows.push_back(i);
  const Index na = static_cast<Index>(rows.size());
  if (na + r == 0) return;
  MatrixXd G(na + r, n);
  VectorXd gap(na + r);
  for (Index a = 0; a < na; ++a) {
    G.row(a) = pr.A.row(rows[static_cast<std::size_t>(a)]);
    gap[a] = -slack[rows[static_cast<std::size_t>(a)]];
  }
  if (r) G.bottomRows(r) = pr.C, gap.tail(r) = pr.d - pr.C * s.x;
  const VectorXd dx = Eigen::CompleteOrthogonalDecomposition<MatrixXd>(G).solve(gap);
  if (!dx.allFinite() || inf_norm(dx) > 1e3 * tol) return;
  const VectorXd x = s.x + dx;
  if (p && (pr.A * x - pr.b).maxCoeff() > 1e-14 * (1.0 + inf_norm(pr.b))) return;
  s.x = x;
  evaluate(pr, s);
}

// Ruiz equilibration of [P M'; M 0] plus a cost scale.
struct Scaling {
  VectorXd D, E;
  double c = 1.0;
};

inline Scaling equilibrate(MatrixXd& P, VectorXd& q, MatrixXd& M, VectorXd& l, VectorXd& u, int iters) {
  const Index n = P.rows(), m = M.rows();
  Scaling s{VectorXd::Ones(n), VectorXd::Ones(m), 1.0};
  auto clampv = [](double v) { return std::clamp(v, 1e-4, 1e4); };
  for (int it = 0; it < iters; ++it) {
    VectorXd dn(n), em(m);
    for (Index j = 0; j < n; ++j) {
      const double c = std::max(col_inf_norm(P, j), col_inf_norm(M, j));
      dn[j] = c > 0.0 ? 1.0 / std::sqrt(clampv(c)) : 1.0;
    }
    for (Index i = 0; i < m; ++i) {
      const double c = M.row(i).lpNorm<Eigen::Infinity>();
      em[i] = c > 0.0 ? 1.0 / std::sqrt(clampv(c)) : 1.0;
    }
    P = dn.asDiagonal() * P * dn.asDiagonal();
    q = dn.asDiagonal() * q;
    M = em.asDiagonal() * M * dn.asDiagonal();
    s.D = s.D.cwiseProduct(dn);
    s.E = s.E.cwiseProduct(em);
  }
  l = s.E.cwiseProduct(l);  // infinities stay infinite
  u = s.E.cwiseProduct(u);
  double pc = 0.0;
  for (Index j = 0; j < n; ++j) pc += col_inf_norm(P, j);
  pc = n ? pc / static_cast<double>(n) : 0.0;
  const double scale = std::max(pc, inf_norm(q));
  s.c = scale > 0.0 ? 1.0 / clampv(scale) : 1.0;
  P *= s.c;
  q *= s.c;
  return s;
}

}  // namespace detail

inline QpSolution solve(QpProblem problem, const QpOptions& opt = {}) {
  using detail::inf_norm;
  using Eigen::Index;
  using Eigen::MatrixXd;
  using Eigen::VectorXd;

  detail::normalize_shapes(problem);
  detail::require_convex(problem.P);
  const QpProblem& pr = problem;
  const Index n = pr.q.size(), p = pr.A.rows(), r = pr.C.rows(), m = p + r;
  const double inf = std::numeric_limits<double>::infinity();

  auto split = [&](const VectorXd& y, QpSolution& s) {
    s.ineq_dual = y.head(p).cwiseMax(0.0);
    s.eq_dual = y.tail(r);
  };

  if (opt.polish) {
    // Cheap first guess: rows violated at the origin.
    std::vector<char> active(static_cast<std::size_t>(p), 0);
    for (Index i = 0; i < p; ++i) active[static_cast<std::size_t>(i)] = pr.b[i] < 0.0;
    if (auto s = detail::polish(pr, active)) return *s;
  }

  MatrixXd P = pr.P, M(m, n);
  VectorXd q = pr.q, l(m), u(m);
  if (p) M.topRows(p) = pr.A, l.head(p).setConstant(-inf), u.head(p) = pr.b;
  if (r) M.bottomRows(r) = pr.C, l.tail(r) = pr.d, u.tail(r) = pr.d;
  const detail::Scaling sc = detail::equilibrate(P, q, M, l, u, opt.scaling_iter);

  VectorXd rho_vec(m);
  double rho = opt.rho;
  auto set_rho = [&] {
    for (Index i = 0; i < m; ++i) rho_vec[i] = i < p ? rho : 1e3 * rho;
  };
  set_rho();
  const double ridge = n ? opt.ridge * std::max(P.trace(), 0.0) / static_cast<double>(n) : 0.0;
  Eigen::LDLT<MatrixXd> ldlt;
  auto factor = [&] {
    MatrixXd K = P;
    K.diagonal().array() += opt.sigma + ridge;
    if (m) K += M.transpose() * rho_vec.asDiagonal() * M;
    ldlt.compute(K);
  };
  factor();

  VectorXd x = VectorXd::Zero(n), z = VectorXd::Zero(m), y = VectorXd::Zero(m);
  VectorXd xt(n), zt(m), zh(m), y_prev(m);
  const VectorXd Dinv = sc.D.cwiseInverse(), Einv = sc.E.cwiseInverse();

  auto unscaled_x = [&] { return VectorXd(sc.D.cwiseProduct(x)); };
  auto unscaled_y = [&] { return VectorXd(sc.E.cwiseProduct(y) / sc.c); };

  const double snap_tol = 1e-7 * (1.0 + inf_norm(pr.b));
  QpSolution best;
  int it = 0;
  int next_polish = 0;
  for (it = 1; it <= opt.max_iter; ++it) {
    y_prev = y;
    VectorXd rhs = opt.sigma * x - q;
    if (m) rhs += M.transpose() * (rho_vec.cwiseProduct(z) - y);
    xt = ldlt.solve(rhs);
    zt = M * xt;
    x = opt.alpha * xt + (1.0 - opt.alpha) * x;
    zh = opt.alpha * zt + (1.0 - opt.alpha) * z;
    z = (zh + y.cwiseQuotient(rho_vec)).cwiseMax(l).cwiseMin(u);
    y += rho_vec.cwiseProduct(zh - z);

    if (it % opt.check_every != 0 && it != opt.max_iter) continue;

    const VectorXd Mx = M * x;
    const VectorXd Px = P * x;
    const VectorXd Mty = m ? VectorXd(M.transpose() * y) : VectorXd::Zero(n);
    const double r_prim = m ? inf_norm(Einv.cwiseProduct(Mx - z)) : 0.0;
    const double r_dual = inf_norm(Dinv.cwiseProduct(Px + q + Mty)) / sc.c;
    const double prim_scale = std::max(inf_norm(Einv.cwiseProduct(Mx)), inf_norm(Einv.cwiseProduct(z)));
    const double dual_scale =
        std::max({inf_norm(Dinv.cwiseProduct(Px)), inf_norm(Dinv.cwiseProduct(Mty)), inf_norm(Dinv.cwiseProduct(q))}) /
        sc.c;

    // Primal infeasibility: dy -> certificate with M'dy = 0 and u'dy+ + l'dy- < 0.
    if (m) {
      VectorXd dy = sc.E.cwiseProduct(y - y_prev) / sc.c;
      for (Index i = 0; i < p; ++i) dy[i] = std::max(dy[i], 0.0);
      const double dyn = inf_norm(dy);
      if (dyn > 1e-30) {
        const double mt = inf_norm(pr.A.transpose() * dy.head(p) + pr.C.transpose() * dy.tail(r));
        const double support = pr.b.dot(dy.head(p)) + pr.d.dot(dy.tail(r));
        if (mt <= opt.eps_infeasible * dyn && support < -opt.eps_infeasible * dyn) {
          QpSolution s;
          s.x = unscaled_x();
          split(unscaled_y(), s);
          detail::evaluate(pr, s);
          s.iterations = it;
          s.status = QpStatus::Infeasible;
          s.certificate = dy / dyn;
          s.certificate_norm = mt / dyn;
          return s;
        }
      }
    }

    const bool loose = r_prim <= 1e-3 * (1.0 + prim_scale) && r_dual <= 1e-3 * (1.0 + dual_scale);
    if (opt.polish && loose && it >= next_polish) {
      const VectorXd xu = unscaled_x(), yu = unscaled_y();
      const VectorXd zu = Einv.cwiseProduct(z);
      std::vector<char> active(static_cast<std::size_t>(p), 0);
      for (Index i = 0; i < p; ++i) active[static_cast<std::size_t>(i)] = pr.b[i] - zu[i] < yu[i];
      if (auto s = detail::polish(pr, active)) {
        s->iterations = it;
        return *s;
      }
      next_polish = it + std::max(opt.check_every, it / 4);
    }

    if (r_prim <= opt.eps_abs + opt.eps_rel * prim_scale && r_dual <= opt.eps_abs + opt.eps_rel * dual_scale) {
      QpSolution s;
      s.x = unscaled_x();
      split(unscaled_y(), s);
      detail::evaluate(pr, s);
      detail::snap_to_active(pr, s, snap_tol);
      s.iterations = it;
      if (detail::meets_optimality(pr, s)) {
        s.status = QpStatus::Optimal;
        return s;
      }
    }

    // Residual balancing.
    if (m && r_prim > 0.0 && r_dual > 0.0) {
      const double ratio = (r_prim / (prim_scale + 1e-30)) / (r_dual / (dual_scale + 1e-30));
      const double next = std::clamp(rho * std::sqrt(ratio), 1e-6, 1e6);
      if (next > 5.0 * rho || next < 0.2 * rho) {
        rho = next;
        set_rho();
        factor();
      }
    }
  }

  best.x = unscaled_x();
  split(unscaled_y(), best);
  detail::evaluate(pr, best);
  detail::snap_to_active(pr, best, snap_tol);
  best.iterations = opt.max_iter;
  best.status = detail::meets_optimality(pr, best) ? QpStatus::Optimal : QpStatus::MaxIter;
  return best;
}

}  // namespace neb
