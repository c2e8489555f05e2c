#pragma once

// Risk tables over growing n for one scenario, with ratios against the NEB
// row, and their csv / aligned-text / json renderings.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "neb/eval_risk.hpp"
#include "neb/scenarios.hpp"

namespace neb {

struct RiskCell {
  double risk = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  double ratio = std::numeric_limits<double>::quiet_NaN();  // risk / NEB risk at the same n
  std::size_t failures = 0;

  bool operator==(const RiskCell& o) const {
    auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
    return same(risk, o.risk) && same(se, o.se) && same(ratio, o.ratio) && failures == o.failures;
  }
};

struct RiskTable {
  std::string scenario;
  int k = 1;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> estimators;  // row labels
  std::vector<std::size_t> ns;          // columns
  std::vector<std::vector<RiskCell>> cells;  // [estimator][n]

  bool operator==(const RiskTable&) const = default;
};

inline RiskTable run_scenario(const ScenarioSpec& sc, int k, const std::vector<std::size_t>& ns, std::size_t reps,
                              const std::vector<Estimator>& estimators, std::uint64_t seed, SimOptions opt = {}) {
  std::size_t neb_row = estimators.size();
  for (std::size_t j = 0; j < estimators.size(); ++j)
    if (estimators[j] == Estimator::Neb) neb_row = j;
  if (neb_row == estimators.size()) throw std::invalid_argument("estimators must include NEB (ratios are NEB-anchored)");
  if (ns.empty()) throw std::invalid_argument("need at least one sample size");
  opt.k = k;

  RiskTable t;
  t.scenario = sc.id;
  t.k = k;
  t.reps = reps;
  t.seed = seed;
  t.ns = ns;
  for (auto e : estimators) t.estimators.push_back(to_string(e));
  t.cells.assign(estimators.size(), std::vector<RiskCell>(ns.size()));
  for (std::size_t c = 0; c < ns.size(); ++c) {
    const RiskRun run = mc_risk_all(estimators, sc, ns[c], reps, seed, opt);
    for (std::size_t j = 0; j < estimators.size(); ++j) {
      auto& cell = t.cells[j][c];
      cell.risk = run.estimates[j].mean;
      cell.se = run.estimates[j].se;
      cell.failures = run.estimates[j].failures;
    }
    const double base = t.cells[neb_row][c].risk;
    for (std::size_t j = 0; j < estimators.size(); ++j)
      t.cells[j][c].ratio = j == neb_row ? 1.0 : t.cells[j][c].risk / base;
  }
  return t;
}

// ---------------------------------------------------------------- render ---

enum class TableFormat { Csv, Text, Json };

inline TableFormat parse_table_format(const std::string& s) {
  if (s == "csv") return TableFormat::Csv;
  if (s == "text" || s == "txt") return TableFormat::Text;
  if (s == "json") return TableFormat::Json;
  throw std::invalid_argument("unknown table format '" + s + "'; valid: csv, text, json");
}

inline const char* extension(TableFormat f) {
  switch (f) {
    case TableFormat::Csv: return "csv";
    case TableFormat::Text: return "txt";
    case TableFormat::Json: return "json";
  }
  return "txt";
}

// Full round-trip precision.
inline std::string format_full(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Two decimals. printf converts the exact binary value and rounds half to
// even, so 1.0349 -> "1.03".
inline std::string format_ratio(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string format_short(double v, int digits = 4) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline nlohmann::ordered_json to_json(const RiskTable& t) {
  auto num = [](double v) { return std::isnan(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v); };
  nlohmann::ordered_json j;
  j["scenario"] = t.scenario;
  j["k"] = t.k;
  j["reps"] = t.reps;
  j["seed"] = t.seed;
  j["estimators"] = t.estimators;
  j["n"] = t.ns;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t e = 0; e < t.estimators.size(); ++e) {
    auto row = nlohmann::ordered_json::array();
    for (const auto& c : t.cells[e])
      row.push_back({{"risk", num(c.risk)}, {"se", num(c.se)}, {"ratio", num(c.ratio)}, {"failures", c.failures}});
    rows.push_back(std::move(row));
  }
  j["cells"] = std::move(rows);
  return j;
}

inline RiskTable table_from_json(const nlohmann::ordered_json& j) {
  auto num = [](const nlohmann::ordered_json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  RiskTable t;
  t.scenario = j.at("scenario").get<std::string>();
  t.k = j.at("k").get<int>();
  t.reps = j.at("reps").get<std::size_t>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.estimators = j.at("estimators").get<std::vector<std::string>>();
  t.ns = j.at("n").get<std::vector<std::size_t>>();
  for (const auto& row : j.at("cells")) {
    std::vector<RiskCell> r;
    for (const auto& c : row)
      r.push_back({num(c.at("risk")), num(c.at("se")), num(c.at("ratio")), c.at("failures").get<std::size_t>()});
    t.cells.push_back(std::move(r));
  }
  if (t.cells.size() != t.estimators.size()) throw std::invalid_argument("risk table json: row count mismatch");
  return t;
}

inline std::string render_table(const RiskTable& t, TableFormat f) {
  std::ostringstream os;
  switch (f) {
    case TableFormat::Csv:
      os << "scenario,k,estimator,n,reps,risk,se,ratio,ratio_2dp,failures\n";
      for (std::size_t e = 0; e < t.estimators.size(); ++e)
        for (std::size_t c = 0; c < t.ns.size(); ++c) {
          const auto& cell = t.cells[e][c];
          os << t.scenario << ',' << t.k << ',' << t.estimators[e] << ',' << t.ns[c] << ',' << t.reps << ','
             << format_full(cell.risk) << ',' << format_full(cell.se) << ',' << format_full(cell.ratio) << ','
             << format_ratio(cell.ratio) << ',' << cell.failures << '\n';
        }
      break;
    case TableFormat::Text: {
      os << "scenario " << t.scenario << ", k=" << t.k << ", reps=" << t.reps << ", seed=" << t.seed << "\n";
      std::size_t w0 = 12;
      for (const auto& e : t.estimators) w0 = std::max(w0, e.size() + 2);
      auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s.insert(0, w - s.size(), ' ');
        return s;
      };
      os << "risk ratio vs NEB\n" << std::string(w0, ' ');
      for (auto n : t.ns) os << pad("n=" + std::to_string(n), 10);
      os << '\n';
      for (std::size_t e = 0; e < t.estimators.size(); ++e) {
        os << t.estimators[e] << std::string(w0 - t.estimators[e].size(), ' ');
        for (const auto& c : t.cells[e]) os << pad(format_ratio(c.ratio), 10);
        os << '\n';
      }
      os << "risk (se)\n" << std::string(w0, ' ');
      for (auto n : t.ns) os << pad("n=" + std::to_string(n), 22);
      os << '\n';
      for (std::size_t e = 0; e < t.estimators.size(); ++e) {
        os << t.estimators[e] << std::string(w0 - t.estimators[e].size(), ' ');
        for (const auto& c : t.cells[e]) os << pad(format_short(c.risk) + " (" + format_short(c.se, 2) + ")", 22);
        os << '\n';
      }
      break;
    }
    case TableFormat::Json:
      os << to_json(t).dump(2) << '\n';
      break;
  }
  return os.str();
}

// Figure-style series: one row per n, one risk column per estimator.
inline std::string render_series(const RiskTable& t) {
  std::ostringstream os;
  os << "n";
  for (const auto& e : t.estimators) os << ',' << e;
  os << '\n';
  for (std::size_t c = 0; c < t.ns.size(); ++c) {
    os << t.ns[c];
    for (std::size_t e = 0; e < t.estimators.size(); ++e) os << ',' << format_full(t.cells[e][c].risk);
    os << '\n';
  }
  return os.str();
}

}  // namespace neb
