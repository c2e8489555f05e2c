#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "neb/bayes_rules.hpp"

namespace neb {

// theta^-k (theta - delta)^2
inline double loss(double theta, double delta, int k) {
  require_loss_index(k);
  if (!(theta > 0.0)) throw std::domain_error("loss requires theta > 0");
  const double e = theta - delta;
  return k == 1 ? e * e / theta : e * e;
}

struct LossReport {
  int k = 1;
  std::string label;
  std::vector<double> losses;
  double compound = 0.0;
};

template <typename ThetaVec, typename DeltaVec>
LossReport compound_loss(const ThetaVec& theta, const DeltaVec& delta, int k, std::string label = {}) {
  const auto n = static_cast<std::size_t>(theta.size());
  if (static_cast<std::size_t>(delta.size()) != n) throw std::invalid_argument("theta and delta differ in length");
  if (n == 0) throw std::invalid_argument("compound loss of an empty vector");
  LossReport r{k, std::move(label), std::vector<double>(n), 0.0};
  double sum = 0.0, comp = 0.0;  // Kahan
  for (std::size_t i = 0; i < n; ++i) {
    r.losses[i] = loss(theta[i], delta[i], k);
    const double yv = r.losses[i] - comp;
    const double t = sum + yv;
    comp = (t - sum) - yv;
    sum = t;
  }
  r.compound = sum / static_cast<double>(n);
  return r;
}

}  // namespace neb
