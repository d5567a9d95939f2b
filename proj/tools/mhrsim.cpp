#include "mhrsim/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo laboratory for PS-based marginal hazard ratio estimation "
               "under non-informative censoring"};
  app.require_subcommand(1);

  std::string run_config;
  long replicates = 0;
  int threads = -1;
  auto* run = app.add_subcommand("run", "run a scenario grid and write estimates/metrics CSVs");
  run->add_option("config", run_config, "run config file")->required();
  run->add_option("--replicates", replicates, "override replicate count for quick runs");
  run->add_option("--threads", threads, "override thread count");

  std::string curve_config;
  auto* curve = app.add_subcommand("curve", "generate rolling HR curve data for one cohort");
  curve->add_option("config", curve_config, "curve config file")->required();

  std::string metrics_csv;
  std::vector<std::string> filters;
  auto* tables = app.add_subcommand("tables", "print metrics.csv as formatted text tables");
  tables->add_option("metrics", metrics_csv, "metrics.csv path")->required();
  tables->add_option("--filter", filters, "key=value row filter (repeatable)");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return mhrsim::cmd_run(run_config, replicates, threads);
  if (curve->parsed()) return mhrsim::cmd_curve(curve_config);
  if (tables->parsed()) {
    std::map<std::string, std::string> filter;
    for (const std::string& f : filters) {
      const auto eq = f.find('=');
      if (eq == std::string::npos) {
        std::cerr << "mhrsim tables: --filter expects key=value\n";
        return mhrsim::kExitConfigError;
      }
      filter[f.substr(0, eq)] = f.substr(eq + 1);
    }
    return mhrsim::cmd_tables(metrics_csv, filter);
  }
  return 0;
}
