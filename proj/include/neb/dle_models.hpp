#pragma once

// Discrete linear exponential (power series) family:
//   p(y | theta) = a_y theta^y / g(theta),  y = 0, 1, 2, ...
// with the Poisson, Binomial and Conway-Maxwell-Poisson members, priors on the
// natural parameter theta, and seeded samplers.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/uniform.hpp>
#include <boost/math/quadrature/gauss.hpp>

namespace neb {

enum class Family { Poisson, Binomial, Cmp };

struct FamilyParams {
  int trials = 0;          // Binomial m
  double dispersion = 1.0; // CMP nu
};

// A family member is described entirely by this table; adding, e.g., the
// negative Binomial means writing one more table and a factory.
struct FamilyTraits {
  Family tag;
  const char* name;
  double (*log_coef)(long long y, const FamilyParams&);
  double (*log_normalizer)(double theta, const FamilyParams&);
  std::optional<int> (*support_max)(const FamilyParams&);
};

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

inline double poisson_log_coef(long long y, const FamilyParams&) {
  return y < 0 ? kNegInf : -std::lgamma(static_cast<double>(y) + 1.0);
}
inline double poisson_log_normalizer(double theta, const FamilyParams&) { return theta; }
inline std::optional<int> unbounded(const FamilyParams&) { return std::nullopt; }

inline double binomial_log_coef(long long y, const FamilyParams& p) {
  if (y < 0 || y > p.trials) return kNegInf;
  const double m = p.trials;
  const double k = static_cast<double>(y);
  return std::lgamma(m + 1.0) - std::lgamma(k + 1.0) - std::lgamma(m - k + 1.0);
}
inline double binomial_log_normalizer(double theta, const FamilyParams& p) {
  return p.trials * std::log1p(theta);
}
inline std::optional<int> binomial_support(const FamilyParams& p) { return p.trials; }

inline double cmp_log_coef(long long y, const FamilyParams& p) {
  return y < 0 ? kNegInf : -p.dispersion * std::lgamma(static_cast<double>(y) + 1.0);
}

// g(theta) = sum_j theta^j (j!)^-nu, truncated once a (decreasing) term drops
// below 1e-16 of the running sum; at most 1e4 terms.
inline double cmp_log_normalizer(double theta, const FamilyParams& p) {
  const double log_theta = std::log(theta);
  double log_sum = 0.0;  // j = 0 term
  double prev = 0.0;
  const double rel = std::log(1e-16);
  for (int j = 1; j < 10000; ++j) {
    const double term = j * log_theta - p.dispersion * std::lgamma(j + 1.0);
    log_sum = log_add(log_sum, term);
    if (term < prev && term < log_sum + rel) break;
    prev = term;
  }
  return log_sum;
}

inline const FamilyTraits kPoisson{Family::Poisson, "poisson", &poisson_log_coef,
                                   &poisson_log_normalizer, &unbounded};
inline const FamilyTraits kBinomial{Family::Binomial, "binomial", &binomial_log_coef,
                                    &binomial_log_normalizer, &binomial_support};
inline const FamilyTraits kCmp{Family::Cmp, "cmp", &cmp_log_coef, &cmp_log_normalizer,
                               &unbounded};

inline void require_theta(double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta))
    throw std::domain_error("theta must be finite and > 0");
}

}  // namespace detail

class DleModel {
 public:
  static DleModel poisson() { return DleModel(&detail::kPoisson, {}); }
  static DleModel binomial(int trials) {
    if (trials < 1) throw std::domain_error("binomial trial count must be >= 1");
    return DleModel(&detail::kBinomial, {trials, 1.0});
  }
  static DleModel cmp(double nu) {
    if (!(nu > 0.0) || !std::isfinite(nu)) throw std::domain_error("CMP dispersion must be > 0");
    return DleModel(&detail::kCmp, {0, nu});
  }

  Family family() const noexcept { return traits_->tag; }
  int trials() const noexcept { return params_.trials; }
  double dispersion() const noexcept { return params_.dispersion; }
  std::optional<int> support_max() const { return traits_->support_max(params_); }

  bool in_support(long long y) const {
    if (y < 0) return false;
    auto hi = support_max();
    return !hi || y <= *hi;
  }

  // log a_y; -inf outside the support.
  double log_coef(long long y) const { return traits_->log_coef(y, params_); }
  double coef(long long y) const { return std::exp(log_coef(y)); }

  double log_normalizer(double theta) const {
    detail::require_theta(theta);
    return traits_->log_normalizer(theta, params_);
  }

  // Log pmf with a precomputed log g(theta); no argument checks.
  double log_pmf_given(long long y, double log_theta, double log_g) const {
    return log_coef(y) + static_cast<double>(y) * log_theta - log_g;
  }

  double log_pmf(long long y, double theta) const {
    if (!in_support(y)) throw std::domain_error("count outside model support");
    return log_pmf_given(y, std::log(theta), log_normalizer(theta));
  }

  double pmf(long long y, double theta) const { return std::exp(log_pmf(y, theta)); }

  std::string name() const {
    std::ostringstream os;
    os << traits_->name;
    if (family() == Family::Binomial) os << '(' << params_.trials << ')';
    if (family() == Family::Cmp) os << '(' << params_.dispersion << ')';
    return os.str();
  }

  friend bool operator==(const DleModel& a, const DleModel& b) {
    return a.traits_ == b.traits_ && a.params_.trials == b.params_.trials &&
           a.params_.dispersion == b.params_.dispersion;
  }

 private:
  DleModel(const FamilyTraits* t, FamilyParams p) : traits_(t), params_(p) {}
  const FamilyTraits* traits_;
  FamilyParams params_;
};

inline double pmf(const DleModel& model, long long y, double theta) { return model.pmf(y, theta); }

// Binomial pmf parameterized by the success probability q; converts to odds.
inline double binomial_pmf_q(const DleModel& model, long long y, double q) {
  if (model.family() != Family::Binomial) throw std::domain_error("not a binomial model");
  if (!(q > 0.0 && q < 1.0)) throw std::domain_error("q must lie in (0, 1)");
  return model.pmf(y, q / (1.0 - q));
}

// Weighted mixture of family members used only to generate data, e.g.
// 0.8 Poisson + 0.2 CMP(0.8). The fitted model is always a single member.
struct ObservationModel {
  std::vector<std::pair<double, DleModel>> parts;

  static ObservationModel single(DleModel m) { return {{{1.0, std::move(m)}}}; }

  double pmf(long long y, double theta) const {
    double s = 0.0;
    for (const auto& [w, m] : parts)
      if (m.in_support(y)) s += w * m.pmf(y, theta);
    return s;
  }

  std::optional<int> support_max() const {
    std::optional<int> hi;
    for (const auto& [w, m] : parts) {
      auto s = m.support_max();
      if (!s) return std::nullopt;
      hi = hi ? std::max(*hi, *s) : *s;
    }
    return hi;
  }
};

// ---------------------------------------------------------------- priors ---

struct PointMass {
  double at;
};
struct UniformPrior {
  double lo, hi;
};
// Shape-rate parameterization.
struct GammaPrior {
  double shape, rate;
};
// Beta(alpha, beta) on the success probability q, mapped to odds q/(1-q).
struct BetaOddsPrior {
  double alpha, beta;
};
struct ChiSquarePrior {
  double df;
};
// Deterministic equi-spaced theta vector over [lo, hi].
struct GridPrior {
  double lo, hi;
};

using PriorAtom =
    std::variant<PointMass, UniformPrior, GammaPrior, BetaOddsPrior, ChiSquarePrior, GridPrior>;

struct PriorComponent {
  double weight;
  PriorAtom atom;
};

// One weighted support point of a discretized prior.
struct PriorNode {
  double theta;
  double weight;
};

class PriorSpec {
 public:
  PriorSpec(PriorAtom atom) : parts_{{1.0, atom}} { validate(); }  // NOLINT(implicit)

  static PriorSpec mixture(std::vector<PriorComponent> parts) {
    PriorSpec p;
    p.parts_ = std::move(parts);
    p.validate();
    return p;
  }

  const std::vector<PriorComponent>& components() const noexcept { return parts_; }

  bool is_grid() const {
    return parts_.size() == 1 && std::holds_alternative<GridPrior>(parts_[0].atom);
  }

  void validate() const {
    if (parts_.empty()) throw std::domain_error("prior has no components");
    double total = 0.0;
    for (const auto& c : parts_) {
      if (!(c.weight >= 0.0) || !std::isfinite(c.weight))
        throw std::domain_error("mixture weights must be nonnegative");
      total += c.weight;
      std::visit([](const auto& a) { check_atom(a); }, c.atom);
      if (std::holds_alternative<GridPrior>(c.atom) && parts_.size() > 1)
        throw std::domain_error("a grid prior cannot be mixed");
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::domain_error("mixture weights must sum to 1");
  }

  // Analytic E[theta]; +inf when it does not exist.
  double mean() const {
    double m = 0.0;
    for (const auto& c : parts_) {
      if (c.weight == 0.0) continue;
      m += c.weight * std::visit([](const auto& a) { return atom_mean(a); }, c.atom);
    }
    return m;
  }

  std::string describe() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      if (i) os << " + ";
      if (parts_.size() > 1) os << parts_[i].weight << "*";
      std::visit([&os](const auto& a) { os << atom_name(a); }, parts_[i].atom);
    }
    return os.str();
  }

 private:
  PriorSpec() = default;

  static void check_atom(const PointMass& a) {
    if (!(a.at > 0.0) || !std::isfinite(a.at)) throw std::domain_error("point mass must be at theta > 0");
  }
  static void check_atom(const UniformPrior& a) {
    if (!(a.lo > 0.0 && a.hi > a.lo) || !std::isfinite(a.hi))
      throw std::domain_error("uniform prior needs 0 < lo < hi");
  }
  static void check_atom(const GammaPrior& a) {
    if (!(a.shape > 0.0 && a.rate > 0.0)) throw std::domain_error("gamma prior needs shape, rate > 0");
  }
  static void check_atom(const BetaOddsPrior& a) {
    if (!(a.alpha > 0.0 && a.beta > 0.0)) throw std::domain_error("beta prior needs alpha, beta > 0");
  }
  static void check_atom(const ChiSquarePrior& a) {
    if (!(a.df > 0.0)) throw std::domain_error("chi-square prior needs df > 0");
  }
  static void check_atom(const GridPrior& a) {
    if (!(a.lo > 0.0 && a.hi >= a.lo) || !std::isfinite(a.hi))
      throw std::domain_error("grid prior needs 0 < lo <= hi");
  }

  static double atom_mean(const PointMass& a) { return a.at; }
  static double atom_mean(const UniformPrior& a) { return 0.5 * (a.lo + a.hi); }
  static double atom_mean(const GammaPrior& a) { return a.shape / a.rate; }
  static double atom_mean(const BetaOddsPrior& a) {
    return a.beta > 1.0 ? a.alpha / (a.beta - 1.0) : std::numeric_limits<double>::infinity();
  }
  static double atom_mean(const ChiSquarePrior& a) { return a.df; }
  static double atom_mean(const GridPrior& a) { return 0.5 * (a.lo + a.hi); }

  static std::string atom_name(const PointMass& a) { return "delta{" + fmt(a.at) + "}"; }
  static std::string atom_name(const UniformPrior& a) { return "Unif(" + fmt(a.lo) + "," + fmt(a.hi) + ")"; }
  static std::string atom_name(const GammaPrior& a) { return "Gamma(" + fmt(a.shape) + "," + fmt(a.rate) + ")"; }
  static std::string atom_name(const BetaOddsPrior& a) {
    return "BetaOdds(" + fmt(a.alpha) + "," + fmt(a.beta) + ")";
  }
  static std::string atom_name(const ChiSquarePrior& a) { return "ChiSq(" + fmt(a.df) + ")"; }
  static std::string atom_name(const GridPrior& a) { return "Grid[" + fmt(a.lo) + "," + fmt(a.hi) + "]"; }
  static std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  }

  std::vector<PriorComponent> parts_;
};

namespace detail {

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i)
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

inline double draw_atom(const PointMass& a, std::mt19937_64&) { return a.at; }
inline double draw_atom(const UniformPrior& a, std::mt19937_64& g) {
  return std::uniform_real_distribution<double>(a.lo, a.hi)(g);
}
inline double draw_atom(const GammaPrior& a, std::mt19937_64& g) {
  for (;;) {
    double v = std::gamma_distribution<double>(a.shape, 1.0 / a.rate)(g);
    if (v > 0.0) return v;
  }
}
inline double draw_atom(const BetaOddsPrior& a, std::mt19937_64& g) {
  // q = X/(X+Y) with X~Gamma(alpha), Y~Gamma(beta), so q/(1-q) = X/Y.
  for (;;) {
    double x = std::gamma_distribution<double>(a.alpha, 1.0)(g);
    double y = std::gamma_distribution<double>(a.beta, 1.0)(g);
    double t = x / y;
    if (t > 0.0 && std::isfinite(t)) return t;
  }
}
inline double draw_atom(const ChiSquarePrior& a, std::mt19937_64& g) {
  for (;;) {
    double v = std::chi_squared_distribution<double>(a.df)(g);
    if (v > 0.0) return v;
  }
}
inline double draw_atom(const GridPrior&, std::mt19937_64&) {
  throw std::logic_error("grid prior is not sampled");
}

// Full 400-point Gauss-Legendre rule on [-1, 1].
inline const std::vector<std::pair<double, double>>& gauss_legendre_400() {
  static const std::vector<std::pair<double, double>> rule = [] {
    using G = boost::math::quadrature::gauss<double, 400>;
    const auto& x = G::abscissa();
    const auto& w = G::weights();
    std::vector<std::pair<double, double>> r;
    for (std::size_t i = 0; i < x.size(); ++i) {
      r.emplace_back(x[i], w[i]);
      if (x[i] != 0.0) r.emplace_back(-x[i], w[i]);
    }
    return r;
  }();
  return rule;
}

template <typename Dist>
std::vector<PriorNode> quadrature_nodes(const Dist& dist, double lo, double hi, bool to_odds) {
  std::vector<PriorNode> nodes;
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  double total = 0.0;
  for (auto [x, w] : gauss_legendre_400()) {
    const double t = mid + half * x;
    const double dens = boost::math::pdf(dist, t);
    const double theta = to_odds ? t / (1.0 - t) : t;
    if (!(theta > 0.0) || !std::isfinite(theta) || !(dens > 0.0)) continue;
    nodes.push_back({theta, w * dens});
    total += w * dens;
  }
  for (auto& n : nodes) n.weight /= total;
  return nodes;
}

constexpr double kTailMass = 1e-10;

inline std::vector<PriorNode> atom_nodes(const PointMass& a, std::size_t) { return {{a.at, 1.0}}; }
inline std::vector<PriorNode> atom_nodes(const UniformPrior& a, std::size_t) {
  return quadrature_nodes(boost::math::uniform_distribution<double>(a.lo, a.hi), a.lo, a.hi, false);
}
inline std::vector<PriorNode> atom_nodes(const GammaPrior& a, std::size_t) {
  boost::math::gamma_distribution<double> d(a.shape, 1.0 / a.rate);
  return quadrature_nodes(d, boost::math::quantile(d, 0.5 * kTailMass),
                          boost::math::quantile(boost::math::complement(d, 0.5 * kTailMass)), false);
}
inline std::vector<PriorNode> atom_nodes(const BetaOddsPrior& a, std::size_t) {
  boost::math::beta_distribution<double> d(a.alpha, a.beta);
  return quadrature_nodes(d, boost::math::quantile(d, 0.5 * kTailMass),
                          boost::math::quantile(boost::math::complement(d, 0.5 * kTailMass)), true);
}
inline std::vector<PriorNode> atom_nodes(const ChiSquarePrior& a, std::size_t) {
  boost::math::chi_squared_distribution<double> d(a.df);
  return quadrature_nodes(d, boost::math::quantile(d, 0.5 * kTailMass),
                          boost::math::quantile(boost::math::complement(d, 0.5 * kTailMass)), false);
}
inline std::vector<PriorNode> atom_nodes(const GridPrior& a, std::size_t n) {
  std::vector<PriorNode> nodes;
  for (double t : linspace(a.lo, a.hi, n)) nodes.push_back({t, 1.0 / static_cast<double>(n)});
  return nodes;
}

}  // namespace detail

// Finite weighted support approximating the prior: point masses exactly,
// continuous parts by 400-node Gauss-Legendre over all but 1e-10 of their
// mass, and a grid prior by its `grid_n` equi-spaced points.
inline std::vector<PriorNode> discretize(const PriorSpec& prior, std::size_t grid_n = 400) {
  std::vector<PriorNode> out;
  for (const auto& c : prior.components()) {
    if (c.weight == 0.0) continue;
    auto nodes = std::visit([&](const auto& a) { return detail::atom_nodes(a, grid_n); }, c.atom);
    for (auto& n : nodes) out.push_back({n.theta, n.weight * c.weight});
  }
  if (out.empty()) throw std::domain_error("prior has empty support");
  return out;
}

// n draws from the prior; the grid prior returns its equi-spaced vector.
inline std::vector<double> sample_theta(const PriorSpec& prior, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::domain_error("need n >= 1");
  prior.validate();
  if (prior.is_grid()) {
    const auto& g = std::get<GridPrior>(prior.components()[0].atom);
    return detail::linspace(g.lo, g.hi, n);
  }
  std::mt19937_64 gen(seed);
  const auto& parts = prior.components();
  std::vector<double> cumulative;
  double acc = 0.0;
  for (const auto& c : parts) cumulative.push_back(acc += c.weight);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> theta(n);
  for (auto& t : theta) {
    std::size_t which = 0;
    if (parts.size() > 1) {
      const double u = unit(gen) * acc;
      while (which + 1 < parts.size() && u >= cumulative[which]) ++which;
    }
    t = std::visit([&](const auto& a) { return detail::draw_atom(a, gen); }, parts[which].atom);
  }
  return theta;
}

// ---------------------------------------------------------------- samples --

struct CountSample {
  std::vector<int> y;
  DleModel model = DleModel::poisson();

  std::size_t size() const noexcept { return y.size(); }

  void validate() const {
    if (y.size() < 2) throw std::domain_error("a count sample needs n >= 2");
    for (int v : y)
      if (!model.in_support(v)) throw std::domain_error("count " + std::to_string(v) + " outside model support");
  }
};

inline CountSample make_sample(std::vector<int> y, DleModel model) {
  CountSample s{std::move(y), std::move(model)};
  s.validate();
  return s;
}

namespace detail {

inline int draw_count(const DleModel& m, double theta, std::mt19937_64& g) {
  switch (m.family()) {
    case Family::Poisson:
      return std::poisson_distribution<int>(theta)(g);
    case Family::Binomial:
      return std::binomial_distribution<int>(m.trials(), theta / (1.0 + theta))(g);
    case Family::Cmp:
    default: {
      // Inversion against the pmf table.
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(g);
      const double log_theta = std::log(theta);
      const double log_g = m.log_normalizer(theta);
      double cum = 0.0;
      int y = 0;
      for (; y < 100000; ++y) {
        cum += std::exp(m.log_pmf_given(y, log_theta, log_g));
        if (u < cum) break;
      }
      return y;
    }
  }
}

}  // namespace detail

// One independent draw per theta_i from a (possibly mixed) observation model.
// The returned sample is tagged with `fit_model`.
inline CountSample sample_counts(const ObservationModel& obs, const std::vector<double>& theta,
                                 std::uint64_t seed, const DleModel& fit_model) {
  for (double t : theta) detail::require_theta(t);
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<int> y(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    std::size_t which = 0;
    if (obs.parts.size() > 1) {
      double u = unit(gen), acc = 0.0;
      for (which = 0; which + 1 < obs.parts.size(); ++which) {
        acc += obs.parts[which].first;
        if (u < acc) break;
      }
    }
    y[i] = detail::draw_count(obs.parts[which].second, theta[i], gen);
  }
  return make_sample(std::move(y), fit_model);
}

inline CountSample sample_counts(const DleModel& model, const std::vector<double>& theta,
                                 std::uint64_t seed) {
  return sample_counts(ObservationModel::single(model), theta, seed, model);
}

}  // namespace neb
