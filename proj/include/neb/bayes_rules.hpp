#pragma once

// Generalized Robbins' formula. Under loss theta^-k (theta - delta)^2 the Bayes
// rule is
//   delta_k(y) = (a_{y-k} / a_{y+1-k}) / w_k(y),  w_k(y) = p(y-k) / p(y+1-k),
// for y >= k and 0 for y < k, where p is the marginal pmf. The oracle below
// evaluates the same rule as a ratio of prior expectations instead.

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "neb/dle_models.hpp"

namespace neb {

inline void require_loss_index(int k) {
  if (k != 0 && k != 1) throw std::domain_error("loss index k must be 0 or 1");
}

// pmf values on {0, ..., size-1}. Entries past the end are unknown, not zero,
// unless the caller knows the support ends there.
struct PmfTable {
  std::vector<double> p;

  std::size_t size() const noexcept { return p.size(); }
  double operator[](std::size_t y) const { return p[y]; }
};

// Values indexed by count y; nullopt where the quantity is undefined.
struct PointwiseRule {
  int k = 0;
  std::vector<std::optional<double>> values;

  std::optional<double> at(long long y) const {
    if (y < 0 || static_cast<std::size_t>(y) >= values.size()) return std::nullopt;
    return values[static_cast<std::size_t>(y)];
  }
  std::size_t size() const noexcept { return values.size(); }
};

// w_k(y) = p(y-k) / p(y+1-k) for y >= k.
using RatioFunctional = PointwiseRule;
// y -> delta_k(y).
using BayesRule = PointwiseRule;

// Marginal p(y) = sum_j weight_j p(y | theta_j) on {0..y_max}.
inline PmfTable marginal_pmf(const ObservationModel& obs, const std::vector<PriorNode>& prior,
                             int y_max) {
  PmfTable t{std::vector<double>(static_cast<std::size_t>(y_max) + 1, 0.0)};
  for (const auto& node : prior) {
    for (int y = 0; y <= y_max; ++y) t.p[static_cast<std::size_t>(y)] += node.weight * obs.pmf(y, node.theta);
  }
  return t;
}

inline PmfTable marginal_pmf(const DleModel& model, const std::vector<PriorNode>& prior, int y_max) {
  return marginal_pmf(ObservationModel::single(model), prior, y_max);
}

inline RatioFunctional ratio_functional(const PmfTable& p, int k) {
  require_loss_index(k);
  RatioFunctional w{k, std::vector<std::optional<double>>(p.size())};
  for (std::size_t y = static_cast<std::size_t>(k); y < p.size(); ++y) {
    const std::size_t den = y + 1 - static_cast<std::size_t>(k);
    if (den >= p.size() || p[den] <= 0.0) continue;
    w.values[y] = p[y - static_cast<std::size_t>(k)] / p[den];
  }
  return w;
}

// a_{y-k} / a_{y+1-k}; +inf when a_{y+1-k} = 0 (top of a bounded support).
inline double coefficient_ratio(const DleModel& model, long long y, int k) {
  const double num = model.log_coef(y - k);
  const double den = model.log_coef(y + 1 - k);
  if (den == detail::kNegInf) return std::numeric_limits<double>::infinity();
  return std::exp(num - den);
}

inline BayesRule bayes_rule_from_marginal(const DleModel& model, const PmfTable& p, int k) {
  const RatioFunctional w = ratio_functional(p, k);
  BayesRule rule{k, std::vector<std::optional<double>>(p.size())};
  if (k == 1 && p.size() > 0) rule.values[0] = 0.0;
  for (std::size_t y = static_cast<std::size_t>(k); y < p.size(); ++y) {
    if (!w.values[y] || !(*w.values[y] > 0.0)) continue;
    const double r = coefficient_ratio(model, static_cast<long long>(y), k);
    if (!std::isfinite(r)) continue;
    rule.values[y] = r / *w.values[y];
  }
  return rule;
}

// delta_k(y) = E[p(y|theta) theta^{1-k}] / E[p(y|theta) theta^{-k}] over a
// finite weighted prior support, evaluated in log space.
inline BayesRule oracle_bayes(const ObservationModel& obs, const std::vector<PriorNode>& prior, int k,
                              int y_max) {
  require_loss_index(k);
  if (prior.empty()) throw std::domain_error("prior has empty support");
  const std::size_t parts = obs.parts.size();
  std::vector<double> log_theta(prior.size());
  std::vector<double> log_g(prior.size() * parts);
  for (std::size_t j = 0; j < prior.size(); ++j) {
    log_theta[j] = std::log(prior[j].theta);
    for (std::size_t q = 0; q < parts; ++q) log_g[j * parts + q] = obs.parts[q].second.log_normalizer(prior[j].theta);
  }
  BayesRule rule{k, std::vector<std::optional<double>>(static_cast<std::size_t>(y_max) + 1)};
  std::vector<double> lp(prior.size());
  for (int y = 0; y <= y_max; ++y) {
    if (y < k) {
      rule.values[static_cast<std::size_t>(y)] = 0.0;
      continue;
    }
    double top = detail::kNegInf;
    for (std::size_t j = 0; j < prior.size(); ++j) {
      double l = detail::kNegInf;
      for (std::size_t q = 0; q < parts; ++q) {
        const auto& [wq, m] = obs.parts[q];
        if (wq <= 0.0 || !m.in_support(y)) continue;
        l = detail::log_add(l, std::log(wq) + m.log_pmf_given(y, log_theta[j], log_g[j * parts + q]));
      }
      lp[j] = prior[j].weight > 0.0 ? l + std::log(prior[j].weight) - k * log_theta[j] : detail::kNegInf;
      top = std::max(top, lp[j]);
    }
    if (top == detail::kNegInf) continue;
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < prior.size(); ++j) {
      const double e = std::exp(lp[j] - top);
      num += e * prior[j].theta;
      den += e;
    }
    rule.values[static_cast<std::size_t>(y)] = num / den;
  }
  return rule;
}

inline BayesRule oracle_bayes(const DleModel& model, const std::vector<PriorNode>& prior, int k, int y_max) {
  return oracle_bayes(ObservationModel::single(model), prior, k, y_max);
}

inline BayesRule oracle_bayes(const DleModel& model, const PriorSpec& prior, int k, int y_max) {
  return oracle_bayes(model, discretize(prior), k, y_max);
}

}  // namespace neb
