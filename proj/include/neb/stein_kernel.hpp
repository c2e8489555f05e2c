#pragma once

// RBF kernel, the discrete Stein difference matrices, and the kernelized Stein
// discrepancy (KSD) in its empirical (V-statistic) and population forms.
//
// For the scaled loss (k = 1) the Stein kernel is
//   kappa(u, v) = h(u)h(v)K(u,v) + h(u) D_v K(u,v) + h(v) D_u K(u,v) + D_uv K(u,v)
// and for the squared loss (k = 0)
//   kappa(u, v) = h(u)h(v)K(u,v) + h(u) v D_v K(u+1,v) + h(v) u D_u K(u,v+1)
//                 + u v D_uv K(u,v),
// with forward differences D_u f(u,v) = f(u+1,v) - f(u,v).
//
// Matrix form (entries scaled by 1/n^2, f = 1 for k = 1, f = y for k = 0):
//   M(h) = h'Kh + 2 (f'dK) h + f'd2K f
// where dK[i][j] = D_{y_i} K(y_i, y_j) (k = 1) or D_{y_i} K(y_i, y_j + 1)
// (k = 0). The linear term pairs h_j with the column sums of dK, which is what
// the kappa double sum produces.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "neb/bayes_rules.hpp"
#include "neb/dle_models.hpp"

namespace neb {

// MainText: exp(-(y-y')^2 / (2 lambda)). Appendix: exp(-(y-y')^2 / (2 lambda^2)),
// kept only so the self-test can demonstrate that a convention mix-up is caught.
enum class KernelConvention { MainText, Appendix };

inline double rbf(long long y, long long yp, double lambda,
                  KernelConvention conv = KernelConvention::MainText) {
  const double d = static_cast<double>(y - yp);
  const double scale = conv == KernelConvention::MainText ? lambda : lambda * lambda;
  return std::exp(-d * d / (2.0 * scale));
}

struct KernelOptions {
  // For bounded supports {0..m} under k = 1 the kernel is zero-extended past m
  // inside the difference operators; this keeps the Stein identity exact.
  std::optional<int> support_bound;
  KernelConvention convention = KernelConvention::MainText;
};

// Translation-invariant kernel backed by a table over gap values.
class GapKernel {
 public:
  GapKernel(double lambda, long long max_gap, const KernelOptions& opt = {})
      : bound_(opt.support_bound), table_(static_cast<std::size_t>(std::max(0LL, max_gap)) + 1) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::domain_error("bandwidth lambda must be > 0");
    for (std::size_t d = 0; d < table_.size(); ++d)
      table_[d] = rbf(static_cast<long long>(d), 0, lambda, opt.convention);
  }

  double operator()(long long u, long long v) const {
    if (bound_ && (u > *bound_ || v > *bound_)) return 0.0;
    const auto d = static_cast<std::size_t>(u > v ? u - v : v - u);
    return table_.at(d);
  }

  // D_u K(u, v)
  double du(long long u, long long v) const { return (*this)(u + 1, v) - (*this)(u, v); }
  // D_uv K(u, v)
  double duv(long long u, long long v) const {
    return (*this)(u + 1, v + 1) - (*this)(u + 1, v) - (*this)(u, v + 1) + (*this)(u, v);
  }

 private:
  std::optional<int> bound_;
  std::vector<double> table_;
};

namespace detail {

// Unscaled (K, dK, d2K) entries for one ordered pair.
struct PairTerms {
  double k, dk, d2k;
};

inline PairTerms pair_terms(const GapKernel& ker, long long u, long long v, int k) {
  return {ker(u, v), k == 1 ? ker.du(u, v) : ker.du(u, v + 1), ker.duv(u, v)};
}

inline long long span_of(const std::vector<int>& y) {
  if (y.empty()) return 0;
  auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  return static_cast<long long>(*hi) - *lo + 2;
}

inline void require_counts(const std::vector<int>& y) {
  for (int v : y)
    if (v < 0) throw std::domain_error("counts must be nonnegative");
}

}  // namespace detail

struct KernelSystem {
  int k = 1;
  double lambda = 0.0;
  std::vector<int> y;
  Eigen::MatrixXd K, dK, d2K;  // n x n, scaled by 1/n^2

  Eigen::VectorXd weights() const {
    Eigen::VectorXd f(static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i) f[static_cast<Eigen::Index>(i)] = k == 1 ? 1.0 : y[i];
    return f;
  }
};

inline KernelSystem build_kernel_system(const std::vector<int>& y, double lambda, int k,
                                        const KernelOptions& opt = {}) {
  require_loss_index(k);
  if (y.size() < 2) throw std::domain_error("kernel system needs n >= 2");
  detail::require_counts(y);
  const GapKernel ker(lambda, detail::span_of(y), opt);
  const auto n = static_cast<Eigen::Index>(y.size());
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  KernelSystem sys{k, lambda, y, Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto t = detail::pair_terms(ker, y[static_cast<std::size_t>(i)], y[static_cast<std::size_t>(j)], k);
      sys.K(i, j) = scale * t.k;
      sys.dK(i, j) = scale * t.dk;
      sys.d2K(i, j) = scale * t.d2k;
    }
  }
  return sys;
}

inline KernelSystem build_kernel_system(const CountSample& s, double lambda, int k) {
  KernelOptions opt;
  if (k == 1) opt.support_bound = s.model.support_max();
  return build_kernel_system(s.y, lambda, k, opt);
}

inline double empirical_ksd(const KernelSystem& sys, const Eigen::VectorXd& h) {
  if (h.size() != static_cast<Eigen::Index>(sys.y.size())) throw std::domain_error("h has the wrong length");
  const Eigen::VectorXd f = sys.weights();
  const Eigen::VectorXd lin = sys.dK.transpose() * f;
  return h.dot(sys.K * h) + 2.0 * lin.dot(h) + f.dot(sys.d2K * f);
}

// The same criterion after collapsing equal counts: one unknown g_d per
// distinct value u_d with multiplicity c_d, M(g) = g'Qg + 2 lin'g + constant.
struct ReducedKernelSystem {
  int k = 1;
  double lambda = 0.0;
  std::size_t n = 0;
  std::vector<int> values;
  std::vector<double> counts;
  Eigen::MatrixXd Q;
  Eigen::VectorXd lin;
  double constant = 0.0;

  double ksd(const Eigen::VectorXd& g) const { return g.dot(Q * g) + 2.0 * lin.dot(g) + constant; }
};

// Distinct sorted values and their multiplicities.
struct CountTable {
  std::vector<int> values;
  std::vector<double> counts;
  std::vector<std::size_t> group;  // observation index -> position in `values`
};

inline CountTable tabulate(const std::vector<int>& y) {
  CountTable t;
  t.values = y;
  std::sort(t.values.begin(), t.values.end());
  t.values.erase(std::unique(t.values.begin(), t.values.end()), t.values.end());
  t.counts.assign(t.values.size(), 0.0);
  t.group.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    auto pos = static_cast<std::size_t>(std::lower_bound(t.values.begin(), t.values.end(), y[i]) - t.values.begin());
    t.group[i] = pos;
    t.counts[pos] += 1.0;
  }
  return t;
}

inline ReducedKernelSystem build_reduced_system(const CountTable& table, double lambda, int k,
                                                const KernelOptions& opt = {}) {
  require_loss_index(k);
  detail::require_counts(table.values);
  std::size_t n = 0;
  for (double c : table.counts) n += static_cast<std::size_t>(c);
  const auto D = static_cast<Eigen::Index>(table.values.size());
  const GapKernel ker(lambda, detail::span_of(table.values), opt);
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  ReducedKernelSystem r{k, lambda, n, table.values, table.counts, Eigen::MatrixXd(D, D), Eigen::VectorXd::Zero(D), 0.0};
  for (Eigen::Index a = 0; a < D; ++a) {
    const long long u = table.values[static_cast<std::size_t>(a)];
    const double ca = table.counts[static_cast<std::size_t>(a)];
    const double fa = k == 1 ? 1.0 : static_cast<double>(u);
    for (Eigen::Index b = 0; b < D; ++b) {
      const long long v = table.values[static_cast<std::size_t>(b)];
      const double cb = table.counts[static_cast<std::size_t>(b)];
      const double fb = k == 1 ? 1.0 : static_cast<double>(v);
      const auto t = detail::pair_terms(ker, u, v, k);
      r.Q(a, b) = scale * ca * cb * t.k;
      r.lin[b] += scale * ca * cb * fa * t.dk;
      r.constant += scale * ca * cb * fa * fb * t.d2k;
    }
  }
  return r;
}

// kappa_lambda[h(u), h(v)](u, v) for loss index k.
inline double kappa(double hu, double hv, long long u, long long v, int k, const GapKernel& ker) {
  if (k == 1) return hu * hv * ker(u, v) + hu * (ker(u, v + 1) - ker(u, v)) + hv * ker.du(u, v) + ker.duv(u, v);
  const double du = static_cast<double>(u), dv = static_cast<double>(v);
  return hu * hv * ker(u, v) + hu * dv * (ker(u + 1, v + 1) - ker(u + 1, v)) + hv * du * ker.du(u, v + 1) +
         du * dv * ker.duv(u, v);
}

// sum_u sum_v (ht(u) - h0(u)) K(u,v) (ht(v) - h0(v)) p(u) p(v) over the table.
inline double population_ksd(const PmfTable& p, const std::vector<double>& h_tilde,
                             const std::vector<double>& h0, double lambda, const KernelOptions& opt = {}) {
  if (h_tilde.size() != p.size() || h0.size() != p.size()) throw std::domain_error("length mismatch");
  const GapKernel ker(lambda, static_cast<long long>(p.size()) + 1, opt);
  double s = 0.0;
  for (std::size_t u = 0; u < p.size(); ++u) {
    if (p[u] == 0.0) continue;
    for (std::size_t v = 0; v < p.size(); ++v) {
      if (p[v] == 0.0) continue;
      s += (h_tilde[u] - h0[u]) * ker(static_cast<long long>(u), static_cast<long long>(v)) * (h_tilde[v] - h0[v]) *
           p[u] * p[v];
    }
  }
  return s;
}

// E[kappa(Y, Y')] for Y, Y' iid from the table; free of the true h0.
inline double population_ksd_kappa(const PmfTable& p, const std::vector<double>& h_tilde, double lambda, int k,
                                   const KernelOptions& opt = {}) {
  require_loss_index(k);
  if (h_tilde.size() != p.size()) throw std::domain_error("length mismatch");
  const GapKernel ker(lambda, static_cast<long long>(p.size()) + 2, opt);
  double s = 0.0;
  for (std::size_t u = 0; u < p.size(); ++u) {
    if (p[u] == 0.0) continue;
    for (std::size_t v = 0; v < p.size(); ++v) {
      if (p[v] == 0.0) continue;
      s += kappa(h_tilde[u], h_tilde[v], static_cast<long long>(u), static_cast<long long>(v), k, ker) * p[u] * p[v];
    }
  }
  return s;
}

}  // namespace neb
