#pragma once

// Robbins plug-in rule, and Monte-Carlo risk of the estimators on a scenario.
// Each replication draws theta and y once and scores every requested
// estimator on the same draws.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "neb/bandwidth_selector.hpp"
#include "neb/bayes_rules.hpp"
#include "neb/dle_models.hpp"
#include "neb/loss.hpp"
#include "neb/neb_estimator.hpp"
#include "neb/parallel.hpp"
#include "neb/scenarios.hpp"

namespace neb {

// ----------------------------------------------------------- plug-in rule ---

struct PluginRule {
  int k = 0;
  std::vector<double> delta;   // per coordinate
  std::vector<bool> undefined; // ratio had an empty count; delta set to 0
};

// delta(y) = (a_{y-k}/a_{y+1-k}) * f(y+1-k) / f(y-k) from frequencies f on
// {0..size-1}. Counts with f(y-k) = 0 or f(y+1-k) = 0 (or past the end) get 0.
inline PointwiseRule plugin_from_frequencies(const DleModel& model, const std::vector<double>& freq, int k,
                                             std::vector<bool>* undefined = nullptr) {
  require_loss_index(k);
  PointwiseRule rule{k, std::vector<std::optional<double>>(freq.size(), 0.0)};
  if (undefined) undefined->assign(freq.size(), false);
  for (std::size_t y = static_cast<std::size_t>(k); y < freq.size(); ++y) {
    const std::size_t den = y - static_cast<std::size_t>(k), num = den + 1;
    const double fn = num < freq.size() ? freq[num] : 0.0;
    const double r = coefficient_ratio(model, static_cast<long long>(y), k);
    if (freq[den] <= 0.0 || fn <= 0.0 || !std::isfinite(r)) {
      if (undefined) (*undefined)[y] = true;
      continue;
    }
    rule.values[y] = r * fn / freq[den];
  }
  return rule;
}

inline PluginRule robbins_plugin(const CountSample& sample, int k) {
  if (sample.y.empty()) throw std::invalid_argument("plug-in needs n >= 1");
  int ymax = 0;
  for (int v : sample.y) {
    if (!sample.model.in_support(v)) throw std::domain_error("count outside model support");
    ymax = std::max(ymax, v);
  }
  std::vector<double> freq(static_cast<std::size_t>(ymax) + 2, 0.0);
  const double inv = 1.0 / static_cast<double>(sample.y.size());
  for (int v : sample.y) freq[static_cast<std::size_t>(v)] += inv;
  std::vector<bool> undef;
  const PointwiseRule rule = plugin_from_frequencies(sample.model, freq, k, &undef);
  PluginRule out{k, std::vector<double>(sample.y.size()), std::vector<bool>(sample.y.size())};
  for (std::size_t i = 0; i < sample.y.size(); ++i) {
    const auto y = static_cast<std::size_t>(sample.y[i]);
    out.delta[i] = *rule.values[y];
    out.undefined[i] = undef[y];
  }
  return out;
}

// ------------------------------------------------------------ simulation ---

enum class Estimator { Neb, NebOracle, Robbins, OracleBayes };

inline const char* to_string(Estimator e) {
  switch (e) {
    case Estimator::Neb: return "NEB";
    case Estimator::NebOracle: return "NEB-OR";
    case Estimator::Robbins: return "Robbins";
    case Estimator::OracleBayes: return "Oracle-Bayes";
  }
  return "unknown";
}

inline Estimator parse_estimator(const std::string& s) {
  for (Estimator e : {Estimator::Neb, Estimator::NebOracle, Estimator::Robbins, Estimator::OracleBayes})
    if (s == to_string(e)) return e;
  if (s == "Robbins-plugin") return Estimator::Robbins;
  throw std::invalid_argument("unknown estimator '" + s + "'; valid: NEB, NEB-OR, Robbins, Oracle-Bayes");
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Seed of replication `rep` at sample size n; the stream (0 = theta, 1 = y)
// separates the two draws.
inline std::uint64_t rep_seed(std::uint64_t master, std::size_t n, std::size_t rep, unsigned stream) {
  std::uint64_t s = splitmix64(master);
  s = splitmix64(s ^ static_cast<std::uint64_t>(n));
  s = splitmix64(s ^ static_cast<std::uint64_t>(rep));
  return splitmix64(s ^ stream);
}

struct SimOptions {
  int k = 1;
  std::vector<double> grid = default_grid();
  FitOptions fit;
  unsigned threads = 1;
};

// Compound losses of the requested estimators on one replication; nullopt
// marks an estimator that failed on these draws.
struct RepOutcome {
  std::vector<std::optional<double>> loss;
  std::vector<std::string> errors;
  double lambda_hat = 0.0;
  double lambda_oracle = 0.0;
};

inline RepOutcome run_replication(const ScenarioSpec& sc, const std::vector<Estimator>& estimators, std::size_t n,
                                  std::uint64_t seed, std::size_t rep, const SimOptions& opt,
                                  const std::vector<PriorNode>* oracle_prior = nullptr) {
  RepOutcome out;
  out.loss.resize(estimators.size());
  out.errors.resize(estimators.size());
  const std::vector<double> theta = sample_theta(sc.prior, n, rep_seed(seed, n, rep, 0));
  const CountSample sample = sample_counts(sc.observation, theta, rep_seed(seed, n, rep, 1), sc.fit_model);

  std::optional<AreCurve> curve;
  std::string curve_error;
  auto need_curve = [&] {
    if (curve || !curve_error.empty()) return;
    try {
      BandwidthOptions bo{opt.fit, 1};
      curve = select_lambda(sample, opt.k, opt.grid, bo, &theta);
      out.lambda_hat = curve->lambda_hat;
      out.lambda_oracle = oracle_lambda(*curve).lambda;
    } catch (const std::exception& e) {
      curve_error = e.what();
    }
  };

  for (std::size_t j = 0; j < estimators.size(); ++j) {
    try {
      switch (estimators[j]) {
        case Estimator::Neb:
          need_curve();
          if (!curve) throw std::runtime_error(curve_error);
          out.loss[j] = (*curve->losses)[curve->index];
          break;
        case Estimator::NebOracle: {
          need_curve();
          if (!curve) throw std::runtime_error(curve_error);
          const auto& l = *curve->losses;
          out.loss[j] = l[detail::argmin_first(l)];
          break;
        }
        case Estimator::Robbins:
          out.loss[j] = compound_loss(theta, robbins_plugin(sample, opt.k).delta, opt.k).compound;
          break;
        case Estimator::OracleBayes: {
          std::vector<PriorNode> local;
          if (!oracle_prior) local = discretize(sc.prior, n);
          const auto& nodes = oracle_prior ? *oracle_prior : local;
          int ymax = 0;
          for (int v : sample.y) ymax = std::max(ymax, v);
          const BayesRule rule = oracle_bayes(sc.observation, nodes, opt.k, ymax);
          std::vector<double> delta(n);
          for (std::size_t i = 0; i < n; ++i) {
            const auto v = rule.at(sample.y[i]);
            if (!v) throw std::runtime_error("oracle rule undefined at y=" + std::to_string(sample.y[i]));
            delta[i] = *v;
          }
          out.loss[j] = compound_loss(theta, delta, opt.k).compound;
          break;
        }
      }
    } catch (const std::exception& e) {
      out.errors[j] = e.what();
    }
  }
  return out;
}

struct RiskEstimate {
  Estimator estimator = Estimator::Neb;
  double mean = 0.0;
  double se = 0.0;
  std::size_t reps = 0;
  std::size_t failures = 0;
  std::vector<double> losses;  // per successful replication, in order
  std::vector<std::string> errors;
};

namespace detail {

// Neumaier-compensated mean and standard error (sd / sqrt(reps)).
inline void summarize(RiskEstimate& r) {
  const std::size_t m = r.losses.size();
  if (m == 0) {
    r.mean = r.se = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  auto csum = [](const std::vector<double>& v, auto f) {
    double s = 0.0, c = 0.0;
    for (double x : v) {
      const double t = s + f(x);
      c += std::abs(s) >= std::abs(f(x)) ? (s - t) + f(x) : (f(x) - t) + s;
      s = t;
    }
    return s + c;
  };
  r.mean = csum(r.losses, [](double x) { return x; }) / static_cast<double>(m);
  if (m < 2) {
    r.se = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  const double mu = r.mean;
  const double ss = csum(r.losses, [mu](double x) { return (x - mu) * (x - mu); });
  r.se = std::sqrt(ss / static_cast<double>(m - 1)) / std::sqrt(static_cast<double>(m));
}

}  // namespace detail

struct RiskRun {
  std::vector<RiskEstimate> estimates;  // one per requested estimator
  std::vector<RepOutcome> replications;
};

inline RiskRun mc_risk_all(const std::vector<Estimator>& estimators, const ScenarioSpec& sc, std::size_t n,
                           std::size_t reps, std::uint64_t seed, const SimOptions& opt = {}) {
  if (reps < 2) throw std::invalid_argument("mc_risk needs reps >= 2");
  if (n < 2) throw std::invalid_argument("mc_risk needs n >= 2");
  std::vector<PriorNode> nodes;
  bool need_oracle = false;
  for (auto e : estimators) need_oracle |= e == Estimator::OracleBayes;
  if (need_oracle) nodes = discretize(sc.prior, n);

  RiskRun run;
  run.replications.resize(reps);
  parallel_for(reps, opt.threads, [&](std::size_t r) {
    run.replications[r] = run_replication(sc, estimators, n, seed, r, opt, need_oracle ? &nodes : nullptr);
  });
  for (std::size_t j = 0; j < estimators.size(); ++j) {
    RiskEstimate est;
    est.estimator = estimators[j];
    est.reps = reps;
    for (const auto& rep : run.replications) {
      if (rep.loss[j]) {
        est.losses.push_back(*rep.loss[j]);
      } else {
        ++est.failures;
        est.errors.push_back(rep.errors[j]);
      }
    }
    detail::summarize(est);
    run.estimates.push_back(std::move(est));
  }
  return run;
}

inline RiskEstimate mc_risk(Estimator estimator, const ScenarioSpec& sc, std::size_t n, std::size_t reps,
                            std::uint64_t seed, const SimOptions& opt = {}) {
  return mc_risk_all({estimator}, sc, n, reps, seed, opt).estimates.front();
}

}  // namespace neb
