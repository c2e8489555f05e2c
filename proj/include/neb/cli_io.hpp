#pragma once

// Run configuration, CSV input/output, manifests, and the estimate / simulate
// commands behind the `neb` tool.
//
// Config files are INI:
//   [run]        command, seed, threads, output
//   [model]      family, trials
//   [estimator]  k, lambda, grid_lo, grid_hi, grid_points, monotone, epsilon
//   [estimate]   input
//   [simulate]   scenario, n, reps, estimators, format

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <boost/version.hpp>
#include <json.hpp>

#include "neb/bandwidth_selector.hpp"
#include "neb/error.hpp"
#include "neb/eval_risk.hpp"
#include "neb/neb_estimator.hpp"
#include "neb/scenarios.hpp"
#include "neb/sim_harness.hpp"

namespace neb {

inline constexpr const char* kVersion = "1.0.0";

struct RunConfig {
  std::string command = "estimate";
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string output = ".";
  // model
  std::optional<std::string> family;  // poisson | binomial; inferred from the data when unset
  std::optional<int> trials;
  // estimator
  int k = 1;
  std::optional<double> lambda;  // fixed bandwidth; overrides the grid
  double grid_lo = 10.0;
  double grid_hi = 100.0;
  int grid_points = 10;
  bool monotone = true;
  double epsilon = 1e-6;
  // estimate
  std::string input;
  // simulate
  std::string scenario = "P1";
  std::vector<std::size_t> n{500};
  std::size_t reps = 50;
  std::vector<std::string> estimators{"NEB", "NEB-OR", "Robbins", "Oracle-Bayes"};
  std::string format = "csv";

  void validate() const {
    if (command != "estimate" && command != "simulate" && command != "selftest")
      throw UsageError("command must be estimate, simulate or selftest");
    if (k != 0 && k != 1) throw UsageError("k must be 0 or 1");
    if (grid_points < 1) throw UsageError("grid_points must be >= 1");
    if (grid_points > 1 && !(grid_lo < grid_hi)) throw UsageError("grid_lo must be < grid_hi");
    if (!(grid_lo > 0.0)) throw UsageError("grid_lo must be > 0");
    if (lambda && !(*lambda > 0.0)) throw UsageError("lambda must be > 0");
    if (!(epsilon > 0.0)) throw UsageError("epsilon must be > 0");
    if (threads < 1) throw UsageError("threads must be >= 1");
    if (family && *family != "poisson" && *family != "binomial")
      throw UsageError("family must be poisson or binomial");
    if (trials && *trials < 1) throw UsageError("trials must be >= 1");
    if (reps < 2) throw UsageError("reps must be >= 2");
    if (n.empty()) throw UsageError("n needs at least one value");
    for (auto v : n)
      if (v < 2) throw UsageError("every n must be >= 2");
    parse_table_format(format);
  }

  std::vector<double> grid() const {
    if (lambda) return {*lambda};
    return default_grid(grid_lo, grid_hi, static_cast<std::size_t>(grid_points));
  }

  FitOptions fit_options() const {
    FitOptions f;
    f.constraints.epsilon = epsilon;
    f.constraints.monotone = monotone;
    return f;
  }
};

// ------------------------------------------------------------ parsing ---

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

template <typename T>
std::optional<T> parse_number(const std::string& s) {
  T v{};
  const char* b = s.data();
  const char* e = b + s.size();
  if (b != e && *b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e || b == e) return std::nullopt;
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw UsageError(key + ": expected a boolean, got '" + s + "'");
}

template <typename T>
T require_number(const std::string& key, const std::string& s) {
  auto v = parse_number<T>(trim(s));
  if (!v) throw UsageError(key + ": cannot parse '" + s + "'");
  return *v;
}

}  // namespace detail

inline std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& part : detail::split(s, ',')) out.push_back(detail::require_number<std::size_t>(key, part));
  return out;
}

inline std::vector<std::string> parse_name_list(const std::string& s) {
  std::vector<std::string> out;
  for (const auto& part : detail::split(s, ','))
    if (!part.empty()) out.push_back(part);
  return out;
}

// Sets one "section.key" field from its text form.
inline void set_config_value(RunConfig& c, const std::string& key, const std::string& raw) {
  using detail::require_number;
  const std::string v = detail::trim(raw);
  if (key == "run.command") c.command = v;
  else if (key == "run.seed") c.seed = require_number<std::uint64_t>(key, v);
  else if (key == "run.threads") c.threads = require_number<unsigned>(key, v);
  else if (key == "run.output") c.output = v;
  else if (key == "model.family") c.family = v;
  else if (key == "model.trials") c.trials = require_number<int>(key, v);
  else if (key == "estimator.k") c.k = require_number<int>(key, v);
  else if (key == "estimator.lambda") c.lambda = require_number<double>(key, v);
  else if (key == "estimator.grid_lo") c.grid_lo = require_number<double>(key, v);
  else if (key == "estimator.grid_hi") c.grid_hi = require_number<double>(key, v);
  else if (key == "estimator.grid_points") c.grid_points = require_number<int>(key, v);
  else if (key == "estimator.monotone") c.monotone = detail::parse_bool(key, v);
  else if (key == "estimator.epsilon") c.epsilon = require_number<double>(key, v);
  else if (key == "estimate.input") c.input = v;
  else if (key == "simulate.scenario") c.scenario = v;
  else if (key == "simulate.n") c.n = parse_size_list(key, v);
  else if (key == "simulate.reps") c.reps = require_number<std::size_t>(key, v);
  else if (key == "simulate.estimators") c.estimators = parse_name_list(v);
  else if (key == "simulate.format") c.format = v;
  else throw UsageError("unknown config key '" + key + "'");
}

inline void load_config_file(RunConfig& c, const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw UsageError("config " + path + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw UsageError("config " + path + ": key '" + section + "' is outside a section");
    for (const auto& [key, value] : body) set_config_value(c, section + "." + key, value.get_value<std::string>());
  }
}

inline nlohmann::ordered_json config_to_json(const RunConfig& c) {
  using J = nlohmann::ordered_json;
  J j;
  j["command"] = c.command;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["output"] = c.output;
  j["family"] = c.family ? J(*c.family) : J(nullptr);
  j["trials"] = c.trials ? J(*c.trials) : J(nullptr);
  j["k"] = c.k;
  j["lambda"] = c.lambda ? J(*c.lambda) : J(nullptr);
  j["grid_lo"] = c.grid_lo;
  j["grid_hi"] = c.grid_hi;
  j["grid_points"] = c.grid_points;
  j["monotone"] = c.monotone;
  j["epsilon"] = c.epsilon;
  j["input"] = c.input;
  j["scenario"] = c.scenario;
  j["n"] = c.n;
  j["reps"] = c.reps;
  j["estimators"] = c.estimators;
  j["format"] = c.format;
  return j;
}

// ----------------------------------------------------------------- csv ---

struct CountInput {
  std::vector<int> y;
  std::vector<std::size_t> line;  // source line of each row
  std::optional<int> m;
  std::optional<std::vector<double>> theta;
};

inline CountInput read_counts_csv(std::istream& in) {
  std::string text;
  std::size_t lineno = 0;
  if (!std::getline(in, text)) throw DataError("input is empty; a header row with a 'y' column is required", 1);
  ++lineno;
  if (text.size() >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0) text.erase(0, 3);
  const auto header = detail::split(detail::trim(text), ',');
  auto col = [&](const char* name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto cy = col("y"), cm = col("m"), ct = col("theta");
  if (!cy) throw DataError("header has no 'y' column", 1);

  CountInput out;
  if (ct) out.theta.emplace();
  while (std::getline(in, text)) {
    ++lineno;
    if (detail::trim(text).empty()) continue;
    const auto f = detail::split(detail::trim(text), ',');
    if (f.size() != header.size())
      throw DataError("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()),
                      lineno);
    const auto y = detail::parse_number<int>(f[*cy]);
    if (!y || *y < 0) throw DataError("y must be a nonnegative integer, got '" + f[*cy] + "'", lineno);
    out.y.push_back(*y);
    out.line.push_back(lineno);
    if (cm) {
      const auto m = detail::parse_number<int>(f[*cm]);
      if (!m || *m < 1) throw DataError("m must be a positive integer, got '" + f[*cm] + "'", lineno);
      if (out.m && *out.m != *m) throw DataError("m must be constant across rows", lineno);
      out.m = *m;
      if (*y > *m) throw DataError("y exceeds m", lineno);
    }
    if (ct) {
      const auto t = detail::parse_number<double>(f[*ct]);
      if (!t || !(*t > 0.0)) throw DataError("theta must be a positive number, got '" + f[*ct] + "'", lineno);
      out.theta->push_back(*t);
    }
  }
  if (out.y.size() < 2) throw DataError("need at least two data rows", lineno);
  return out;
}

inline CountInput read_counts_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file '" + path + "'");
  return read_counts_csv(in);
}

inline DleModel resolve_model(const RunConfig& c, const CountInput& in) {
  std::string family = c.family.value_or(in.m ? "binomial" : "poisson");
  if (family == "poisson") {
    if (in.m) throw DataError("input has an 'm' column but the model family is poisson");
    return DleModel::poisson();
  }
  std::optional<int> m = in.m;
  if (c.trials) {
    if (m && *m != *c.trials) throw DataError("input m differs from the configured trials");
    m = c.trials;
  }
  if (!m) throw UsageError("binomial model needs trials (config model.trials or an 'm' column)");
  for (std::size_t i = 0; i < in.y.size(); ++i)
    if (in.y[i] > *m) throw DataError("y exceeds the number of trials", in.line[i]);
  return DleModel::binomial(*m);
}

struct EstimateRow {
  std::size_t index = 0;
  int y = 0;
  double h_hat = 0.0, w_hat = 0.0, delta = 0.0;
  std::string flag;
};

inline void write_estimates_csv(std::ostream& os, const ShrinkageSolution& s) {
  os << "index,y,h_hat,w_hat,delta,flag\n";
  for (std::size_t i = 0; i < s.y.size(); ++i) {
    const auto e = static_cast<Eigen::Index>(i);
    os << i << ',' << s.y[i] << ',' << format_full(s.h[e]) << ',' << format_full(s.w[e]) << ','
       << format_full(s.delta[e]) << ',' << flag_string(s.flags[i]) << '\n';
  }
}

inline std::vector<EstimateRow> read_estimates_csv(std::istream& in) {
  std::string text;
  std::getline(in, text);
  if (detail::trim(text) != "index,y,h_hat,w_hat,delta,flag") throw DataError("unexpected estimates header", 1);
  std::vector<EstimateRow> rows;
  std::size_t lineno = 1;
  auto num = [&](const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    auto v = detail::parse_number<double>(s);
    if (!v) throw DataError("bad number '" + s + "'", lineno);
    return *v;
  };
  while (std::getline(in, text)) {
    ++lineno;
    if (detail::trim(text).empty()) continue;
    const auto f = detail::split(detail::trim(text), ',');
    if (f.size() != 6) throw DataError("expected 6 fields", lineno);
    EstimateRow r;
    r.index = detail::require_number<std::size_t>("index", f[0]);
    r.y = detail::require_number<int>("y", f[1]);
    r.h_hat = num(f[2]);
    r.w_hat = num(f[3]);
    r.delta = num(f[4]);
    r.flag = f[5];
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void write_are_curve_csv(std::ostream& os, const AreCurve& c) {
  os << "lambda,are,loss_if_oracle\n";
  for (std::size_t i = 0; i < c.grid.size(); ++i) {
    os << format_full(c.grid[i]) << ',' << format_full(c.are[i]) << ',';
    if (c.losses) os << format_full((*c.losses)[i]);
    os << '\n';
  }
}

// ------------------------------------------------------------ commands ---

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
  os << content;
}

inline std::filesystem::path output_dir(const RunConfig& c) {
  std::filesystem::path dir(c.output);
  std::filesystem::create_directories(dir);
  return dir;
}

inline nlohmann::ordered_json diagnostics_json(const SolverDiagnostics& d) {
  return {{"status", to_string(d.status)},       {"iterations", d.iterations},
          {"ksd_objective", d.objective},        {"primal_residual", d.primal_residual},
          {"dual_residual", d.dual_residual},    {"polished", d.polished},
          {"distinct_counts", d.distinct},       {"inequality_rows", d.inequality_rows},
          {"equality_rows", d.equality_rows}};
}

}  // namespace detail

struct EstimateResult {
  AreCurve curve;
  DleModel model = DleModel::poisson();
  std::vector<std::string> files;
};

inline EstimateResult cmd_estimate(const RunConfig& c) {
  c.validate();
  if (c.input.empty()) throw UsageError("estimate needs an input CSV (--input)");
  const CountInput in = read_counts_csv(c.input);
  EstimateResult r;
  r.model = resolve_model(c, in);
  const CountSample sample{in.y, r.model};
  BandwidthOptions bo{c.fit_options(), c.threads};
  r.curve = select_lambda(sample, c.k, c.grid(), bo, in.theta ? &*in.theta : nullptr);
  const ShrinkageSolution& best = r.curve.selected();

  const auto dir = detail::output_dir(c);
  std::ostringstream est, curve;
  write_estimates_csv(est, best);
  write_are_curve_csv(curve, r.curve);
  detail::write_file(dir / "estimates.csv", est.str());
  detail::write_file(dir / "are_curve.csv", curve.str());

  nlohmann::ordered_json m;
  m["tool"] = "neb";
  m["version"] = kVersion;
  m["command"] = "estimate";
  m["config"] = config_to_json(c);
  m["model"] = r.model.name();
  m["n"] = sample.y.size();
  m["lambda_hat"] = r.curve.lambda_hat;
  m["are_min"] = r.curve.are[r.curve.index];
  if (r.curve.losses) m["lambda_oracle"] = oracle_lambda(r.curve).lambda;
  m["solver"] = detail::diagnostics_json(best.diagnostics);
  m["warnings"] = best.warnings;
  m["dependencies"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                     "." + std::to_string(EIGEN_MINOR_VERSION)},
                       {"boost", BOOST_LIB_VERSION}};
  m["outputs"] = {"estimates.csv", "are_curve.csv"};
  detail::write_file(dir / "manifest.json", m.dump(2) + "\n");
  r.files = {(dir / "estimates.csv").string(), (dir / "are_curve.csv").string(), (dir / "manifest.json").string()};
  return r;
}

struct SimulateResult {
  RiskTable table;
  std::vector<std::string> files;
};

inline SimulateResult cmd_simulate(const RunConfig& c) {
  c.validate();
  const ScenarioSpec sc = [&] {
    try {
      return scenario(c.scenario);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }();
  std::vector<Estimator> est;
  try {
    for (const auto& s : c.estimators) est.push_back(parse_estimator(s));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (std::find(est.begin(), est.end(), Estimator::Neb) == est.end())
    throw UsageError("estimators must include NEB (risk ratios are anchored on the NEB row)");

  SimOptions so;
  so.k = c.k;
  so.grid = c.grid();
  so.fit = c.fit_options();
  so.threads = c.threads;
  SimulateResult r;
  r.table = run_scenario(sc, c.k, c.n, c.reps, est, c.seed, so);

  const auto dir = detail::output_dir(c);
  const TableFormat fmt = parse_table_format(c.format);
  const std::string table_name = std::string("risk_table.") + extension(fmt);
  detail::write_file(dir / table_name, render_table(r.table, fmt));
  detail::write_file(dir / "series.csv", render_series(r.table));

  nlohmann::ordered_json m;
  m["tool"] = "neb";
  m["version"] = kVersion;
  m["command"] = "simulate";
  m["config"] = config_to_json(c);
  m["scenario"] = {{"id", sc.id}, {"description", sc.description}};
  m["outputs"] = {table_name, "series.csv"};
  detail::write_file(dir / "manifest.json", m.dump(2) + "\n");
  r.files = {(dir / table_name).string(), (dir / "series.csv").string(), (dir / "manifest.json").string()};
  return r;
}

}  // namespace neb
