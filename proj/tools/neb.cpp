// neb: nonparametric empirical Bayes shrinkage for count data.
//
//   neb estimate --input counts.csv [--k 1] [--lambda 20 | --grid-lo 10 --grid-hi 100 --grid-points 10]
//   neb simulate --scenario P1 --n 500,1000 --reps 50 [--format csv|text|json]
//   neb selftest [--inject-fault kernel-convention]
//
// Any command accepts --config file.ini; flags given on the command line win.
// Exit codes: 0 ok, 1 validation or selftest failure, 2 usage error, 3 data error.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "neb/cli_io.hpp"
#include "neb/selftest.hpp"

namespace {

struct Flags {
  std::string config;
  std::string seed, threads, output, family, trials, k, lambda, grid_lo, grid_hi, grid_points, monotone, epsilon;
  std::string input, scenario, n, reps, estimators, format;
  std::string fault;
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "INI config file");
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--threads", f.threads, "worker threads for parallel sections");
  app->add_option("--output,-o", f.output, "output directory");
  app->add_option("--family", f.family, "poisson | binomial");
  app->add_option("--trials,-m", f.trials, "binomial trial count m");
  app->add_option("--k", f.k, "loss index: 1 scaled squared error, 0 squared error");
  app->add_option("--lambda", f.lambda, "fixed kernel bandwidth");
  app->add_option("--grid-lo", f.grid_lo, "bandwidth grid lower end");
  app->add_option("--grid-hi", f.grid_hi, "bandwidth grid upper end");
  app->add_option("--grid-points", f.grid_points, "number of grid points");
  app->add_option("--monotone", f.monotone, "enforce monotone estimates (true|false)");
  app->add_option("--epsilon", f.epsilon, "positivity margin");
}

// Applies the flags that were actually given, after the config file.
void apply(neb::RunConfig& c, CLI::App* app, const Flags& f) {
  const std::pair<const char*, const std::string*> map[] = {
      {"run.seed", &f.seed},           {"run.threads", &f.threads},         {"run.output", &f.output},
      {"model.family", &f.family},     {"model.trials", &f.trials},         {"estimator.k", &f.k},
      {"estimator.lambda", &f.lambda}, {"estimator.grid_lo", &f.grid_lo},   {"estimator.grid_hi", &f.grid_hi},
      {"estimator.grid_points", &f.grid_points},                            {"estimator.monotone", &f.monotone},
      {"estimator.epsilon", &f.epsilon},                                    {"estimate.input", &f.input},
      {"simulate.scenario", &f.scenario}, {"simulate.n", &f.n},             {"simulate.reps", &f.reps},
      {"simulate.estimators", &f.estimators},                               {"simulate.format", &f.format},
  };
  static const std::pair<const char*, const char*> flag_of[] = {
      {"run.seed", "--seed"},           {"run.threads", "--threads"},         {"run.output", "--output"},
      {"model.family", "--family"},     {"model.trials", "--trials"},         {"estimator.k", "--k"},
      {"estimator.lambda", "--lambda"}, {"estimator.grid_lo", "--grid-lo"},   {"estimator.grid_hi", "--grid-hi"},
      {"estimator.grid_points", "--grid-points"},                             {"estimator.monotone", "--monotone"},
      {"estimator.epsilon", "--epsilon"},                                     {"estimate.input", "--input"},
      {"simulate.scenario", "--scenario"}, {"simulate.n", "--n"},             {"simulate.reps", "--reps"},
      {"simulate.estimators", "--estimators"},                                {"simulate.format", "--format"},
  };
  for (std::size_t i = 0; i < std::size(map); ++i) {
    CLI::Option* opt = nullptr;
    try {
      opt = app->get_option(flag_of[i].second);
    } catch (const CLI::OptionNotFound&) {
      continue;
    }
    if (opt->count() > 0) neb::set_config_value(c, map[i].first, *map[i].second);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonparametric empirical Bayes shrinkage for count data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", neb::kVersion);
  Flags f;

  auto* est = app.add_subcommand("estimate", "fit NEB shrinkage estimates to a CSV of counts");
  add_common(est, f);
  est->add_option("--input,-i", f.input, "CSV with a 'y' column (optional 'm', 'theta')");

  auto* sim = app.add_subcommand("simulate", "Monte-Carlo risk table for a scenario");
  add_common(sim, f);
  sim->add_option("--scenario", f.scenario, "P1..P4, B1..B4");
  sim->add_option("--n", f.n, "comma-separated sample sizes");
  sim->add_option("--reps", f.reps, "Monte-Carlo replications");
  sim->add_option("--estimators", f.estimators, "comma-separated: NEB,NEB-OR,Robbins,Oracle-Bayes");
  sim->add_option("--format", f.format, "csv | text | json");

  auto* self = app.add_subcommand("selftest", "fast internal consistency checks");
  self->add_option("--inject-fault", f.fault, "debug hook: kernel-convention");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (self->parsed()) {
      neb::Fault fault = neb::Fault::None;
      if (f.fault == "kernel-convention") fault = neb::Fault::KernelConvention;
      else if (!f.fault.empty()) throw neb::UsageError("unknown fault '" + f.fault + "'");
      return neb::report_selftest(neb::run_selftest(fault), std::cout) ? 0 : 1;
    }
    CLI::App* sub = est->parsed() ? est : sim;
    neb::RunConfig c;
    if (!f.config.empty()) neb::load_config_file(c, f.config);
    c.command = sub->get_name();
    apply(c, sub, f);
    if (c.command == "estimate") {
      const auto r = neb::cmd_estimate(c);
      std::cout << "lambda_hat=" << neb::format_full(r.curve.lambda_hat) << '\n';
      for (const auto& w : r.curve.selected().warnings) std::cerr << "warning: " << w << '\n';
      for (const auto& p : r.files) std::cout << "wrote " << p << '\n';
    } else {
      const auto r = neb::cmd_simulate(c);
      std::cout << neb::render_table(r.table, neb::TableFormat::Text);
      for (const auto& p : r.files) std::cout << "wrote " << p << '\n';
    }
    return 0;
  } catch (const neb::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
