#pragma once

// Simulation scenarios: a prior over theta, the model the counts are drawn
// from, and the model the estimator assumes. P3 and P4 draw from CMP-based
// models but are fit as Poisson.

#include <stdexcept>
#include <string>
#include <vector>

#include "neb/dle_models.hpp"

namespace neb {

struct ScenarioSpec {
  std::string id;
  PriorSpec prior;
  ObservationModel observation;
  DleModel fit_model;
  std::string description;
};

inline const std::vector<std::string>& scenario_ids() {
  static const std::vector<std::string> ids{"P1", "P2", "P3", "P4", "B1", "B2", "B3", "B4"};
  return ids;
}

inline ScenarioSpec scenario_p4(double nu = 0.8) {
  const DleModel cmp = DleModel::cmp(nu);
  return {"P4", PriorSpec(GridPrior{1.0, 5.0}), ObservationModel::single(cmp), DleModel::poisson(),
          "theta equi-spaced on [1,5]; Y ~ CMP(theta, " + std::to_string(nu) + "); fit as Poisson"};
}

inline ScenarioSpec scenario(const std::string& id) {
  const DleModel poi = DleModel::poisson();
  if (id == "P1")
    return {id, PriorSpec(UniformPrior{0.5, 15.0}), ObservationModel::single(poi), poi, "theta ~ Unif(0.5,15); Poisson"};
  if (id == "P2")
    return {id, PriorSpec::mixture({{0.75, GammaPrior{5.0, 1.0}}, {0.25, GammaPrior{10.0, 1.0}}}),
            ObservationModel::single(poi), poi, "theta ~ 0.75 Gamma(5,1) + 0.25 Gamma(10,1); Poisson"};
  if (id == "P3")
    return {id, PriorSpec::mixture({{0.5, PointMass{10.0}}, {0.5, GammaPrior{5.0, 2.0}}}),
            ObservationModel{{{0.8, poi}, {0.2, DleModel::cmp(0.8)}}}, poi,
            "theta ~ 0.5 delta(10) + 0.5 Gamma(5,2); Y ~ 0.8 Poi + 0.2 CMP(0.8); fit as Poisson"};
  if (id == "P4") return scenario_p4();
  if (id == "B1") {
    const DleModel b = DleModel::binomial(5);
    return {id, PriorSpec::mixture({{0.4, PointMass{1.0}}, {0.6, BetaOddsPrior{2.0, 5.0}}}),
            ObservationModel::single(b), b, "q ~ 0.4 delta(0.5) + 0.6 Beta(2,5); m = 5"};
  }
  if (id == "B2") {
    const DleModel b = DleModel::binomial(10);
    return {id, PriorSpec::mixture({{0.8, PointMass{0.5}}, {0.2, GammaPrior{1.0, 2.0}}}),
            ObservationModel::single(b), b, "theta ~ 0.8 delta(0.5) + 0.2 Gamma(1,2); m = 10"};
  }
  if (id == "B3") {
    const DleModel b = DleModel::binomial(5);
    return {id, PriorSpec(ChiSquarePrior{2.0}), ObservationModel::single(b), b, "theta ~ chi-square(2); m = 5"};
  }
  if (id == "B4") {
    const DleModel b = DleModel::binomial(10);
    return {id, PriorSpec::mixture({{0.5, BetaOddsPrior{1.0, 1.0}}, {0.5, BetaOddsPrior{1.0, 3.0}}}),
            ObservationModel::single(b), b, "q ~ 0.5 Beta(1,1) + 0.5 Beta(1,3); m = 10"};
  }
  std::string valid;
  for (const auto& s : scenario_ids()) valid += (valid.empty() ? "" : ", ") + s;
  throw std::invalid_argument("unknown scenario '" + id + "'; valid ids: " + valid);
}

}  // namespace neb
