#include "mhrsim/cli.hpp"

#include "mhrsim/config.hpp"
#include "mhrsim/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace mhrsim {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fmt2(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

int resolve_threads(int config_threads, int override_threads) {
  if (override_threads >= 0) return override_threads;
  if (const char* env = std::getenv("MHRSIM_THREADS")) {
    try {
      return std::stoi(env);
    } catch (...) {
      std::cerr << "mhrsim: ignoring bad MHRSIM_THREADS value\n";
    }
  }
  return config_threads;
}

}  // namespace

int cmd_run(const std::string& config_path, long replicates_override, int threads_override) {
  RunConfig rc;
  std::vector<Scenario> scenarios;
  try {
    rc = RunConfig::from_file(config_path);
    if (replicates_override > 0) rc.grid.replicates = replicates_override;
    scenarios = grid_expand(rc.grid);
  } catch (const std::exception& e) {
    std::cerr << "mhrsim run: " << e.what() << "\n";
    return kExitConfigError;
  }
  const int threads = resolve_threads(rc.threads, threads_override);

  std::error_code ec;
  std::filesystem::create_directories(rc.output_dir, ec);
  std::ofstream est_out(rc.output_dir + "/estimates.csv", std::ios::trunc);
  std::ofstream met_out(rc.output_dir + "/metrics.csv", std::ios::trunc);
  if (!est_out || !met_out) {
    std::cerr << "mhrsim run: cannot write to output directory " << rc.output_dir << "\n";
    return kExitOutputError;
  }

  try {
    AlphaStarCache cache(rc.calib_cache);
    std::vector<double> targets;
    for (const auto& s : scenarios) {
      if (std::find(targets.begin(), targets.end(), s.target_mhr) == targets.end())
        targets.push_back(s.target_mhr);
    }
    std::map<double, double> alpha_star;
    for (double t : targets) {
      std::cerr << "mhrsim run: calibrating alpha* for MHR " << t << "..." << std::flush;
      alpha_star[t] = cache.get_or_calibrate(t, rc.grid.dgp, rc.calib_n, rc.calib_tol);
      std::cerr << " " << alpha_star[t] << "\n";
    }

    est_out << "scenario_id,replicate,method,mhr_hat,ci_lo,ci_hi,converged\n";
    met_out << "scenario_id,setting,n,mhr_true,censor_dist,censor_rate,method,"
               "bias,sd,rmse,rel_bias,coverage,n_failed\n";

    for (auto& s : scenarios) {
      s.dgp.alpha_star = alpha_star[s.target_mhr];
      s.dgp.alpha = std::log(s.target_mhr);
      std::cerr << "mhrsim run: scenario " << (s.scenario_id + 1) << "/" << scenarios.size()
                << " (" << setting_name(s.setting) << " n=" << s.n << " mhr=" << s.target_mhr
                << " " << censor_dist_name(s.censor_dist) << " pi=" << s.censor_rate << ")\n";

      std::vector<ReplicateResult> reps;
      const ScenarioMetrics sm = run_scenario(s, threads, &reps);

      for (const auto& rep : reps) {
        for (const auto& rec : rep.records) {
          est_out << s.scenario_id << ',' << rep.replicate_id << ',' << method_name(rec.method)
                  << ',' << fmt(rec.mhr_hat) << ',' << fmt(rec.ci_lo) << ',' << fmt(rec.ci_hi)
                  << ',' << (rec.converged ? 1 : 0) << '\n';
        }
      }
      for (std::size_t m = 0; m < kAllMethods.size(); ++m) {
        const auto& mm = sm.per_method[m];
        met_out << s.scenario_id << ',' << setting_name(s.setting) << ',' << s.n << ','
                << fmt(s.target_mhr) << ',' << censor_dist_name(s.censor_dist) << ','
                << fmt(s.censor_rate) << ',' << method_name(kAllMethods[m]) << ','
                << fmt(mm.bias) << ',' << fmt(mm.sd) << ',' << fmt(mm.rmse) << ','
                << fmt(mm.rel_bias) << ',' << fmt(mm.coverage) << ',' << sm.n_failed << '\n';
      }
      if (!sm.usable)
        std::cerr << "mhrsim run: scenario " << s.scenario_id << " unusable ("
                  << sm.n_failed << " failed replicates)\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "mhrsim run: " << e.what() << "\n";
    return kExitConfigError;
  }
  return kExitOk;
}

int cmd_curve(const std::string& config_path) {
  CurveConfig cc;
  try {
    cc = CurveConfig::from_file(config_path);
    for (const std::string& name : cc.curves) {
      if (name != "marginal_unweighted" && name != "conditional_unweighted" &&
          name != "marginal_psweighted")
        throw std::runtime_error("config: unknown curve '" + name + "'");
    }
  } catch (const std::exception& e) {
    std::cerr << "mhrsim curve: " << e.what() << "\n";
    return kExitConfigError;
  }

  std::error_code ec;
  std::filesystem::create_directories(cc.output_dir, ec);
  std::ofstream out(cc.output_dir + "/curves.csv", std::ios::trunc);
  if (!out) {
    std::cerr << "mhrsim curve: cannot write to output directory " << cc.output_dir << "\n";
    return kExitOutputError;
  }

  try {
    AlphaStarCache cache(cc.calib_cache);
    DgpParams dgp = cc.dgp;
    dgp.alpha_star = cache.get_or_calibrate(cc.mhr, dgp, cc.calib_n, cc.calib_tol);
    dgp.alpha = std::log(cc.mhr);
    std::cerr << "mhrsim curve: alpha* = " << dgp.alpha_star << " for MHR " << cc.mhr << "\n";

    RngStream rng(cc.master_seed, 0, 0);
    Cohort cohort = make_cohort(cc.setting, cc.n, dgp, rng);
    if (cc.censor_dist != CensorDist::none) {
      std::vector<double> taus(cohort.n());
      for (long i = 0; i < cohort.n(); ++i) taus[i] = tau_of(cohort.lp[i], dgp.lambda, dgp.eta);
      const double theta =
          solve_theta(taus, cc.censor_rate, dgp.eta, cc.censor_dist, cc.theta_method);
      const CensorPlan plan{cc.censor_dist, theta, cc.censor_rate, dgp.eta};
      apply_censoring(cohort, draw_censoring(plan, cohort.n(), rng));
    }

    CoxOptions opt;
    opt.ties = cc.ties;
    out << "curve,fraction,hr_estimate\n";
    for (const std::string& name : cc.curves) {
      Eigen::VectorXd w = Eigen::VectorXd::Ones(cohort.n());
      CurveMode mode = CurveMode::marginal;
      if (name == "conditional_unweighted") {
        mode = CurveMode::conditional;
      } else if (name == "marginal_psweighted") {
        w = cc.setting == Setting::counterfactual
                ? Eigen::VectorXd::Ones(cohort.n())  // PS constant: unweighted
                : iptw_weights(fit_ps(cohort), cohort.Z);
      }
      const auto points =
          hr_curve(cohort.T, cohort.D, cohort.Z, cohort.X, w, cc.grid, mode, cc.axis, opt);
      for (const auto& pt : points) {
        if (!pt.ok) {
          std::cerr << "mhrsim curve: " << name << " fraction " << pt.fraction
                    << " unreachable, omitted\n";
          continue;
        }
        out << name << ',' << fmt(pt.fraction) << ',' << fmt(pt.hr) << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "mhrsim curve: " << e.what() << "\n";
    return kExitConfigError;
  }
  return kExitOk;
}

int cmd_tables(const std::string& metrics_csv, const std::map<std::string, std::string>& filter) {
  std::ifstream in(metrics_csv);
  if (!in) {
    std::cerr << "mhrsim tables: cannot open " << metrics_csv << "\n";
    return kExitConfigError;
  }
  std::string header;
  if (!std::getline(in, header)) {
    std::cerr << "mhrsim tables: empty file\n";
    return kExitConfigError;
  }
  const std::vector<std::string> cols = split_csv_line(header);
  auto col_of = [&](const std::string& name) {
    const auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end())
      throw std::runtime_error("metrics csv is missing column '" + name + "'");
    return static_cast<std::size_t>(it - cols.begin());
  };

  try {
    const std::size_t c_setting = col_of("setting"), c_n = col_of("n"),
                      c_mhr = col_of("mhr_true"), c_dist = col_of("censor_dist"),
                      c_rate = col_of("censor_rate"), c_method = col_of("method"),
                      c_bias = col_of("bias"), c_sd = col_of("sd"), c_rmse = col_of("rmse"),
                      c_rel = col_of("rel_bias"), c_cov = col_of("coverage");

    struct Row {
      std::vector<std::string> f;
    };
    std::vector<Row> rows;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      Row r{split_csv_line(line)};
      if (r.f.size() < cols.size()) continue;
      bool keep = true;
      for (const auto& [k, v] : filter) {
        const std::size_t c = col_of(k);
        if (r.f[c] != v) {
          keep = false;
          break;
        }
      }
      if (keep) rows.push_back(std::move(r));
    }

    // group rows by table key in first-appearance order
    std::vector<std::string> group_keys;
    std::map<std::string, std::vector<const Row*>> groups;
    for (const auto& r : rows) {
      const std::string key =
          r.f[c_setting] + "|" + r.f[c_n] + "|" + r.f[c_mhr] + "|" + r.f[c_dist];
      if (!groups.count(key)) group_keys.push_back(key);
      groups[key].push_back(&r);
    }

    for (const std::string& key : group_keys) {
      const auto& grp = groups[key];
      std::printf("# setting=%s n=%s mhr_true=%s censor_dist=%s\n",
                  grp.front()->f[c_setting].c_str(), grp.front()->f[c_n].c_str(),
                  grp.front()->f[c_mhr].c_str(), grp.front()->f[c_dist].c_str());
      std::printf("%-12s %9s %8s %8s %8s %9s %9s\n", "Method", "Censoring", "Bias", "SD",
                  "RMSE", "Rel.Bias", "Coverage");

      std::vector<double> rates;
      for (const Row* r : grp) {
        const double rate = std::stod(r->f[c_rate]);
        if (std::find(rates.begin(), rates.end(), rate) == rates.end()) rates.push_back(rate);
      }
      std::sort(rates.begin(), rates.end());

      for (double rate : rates) {
        for (Method m : kAllMethods) {
          for (const Row* r : grp) {
            if (std::stod(r->f[c_rate]) != rate || r->f[c_method] != method_name(m)) continue;
            std::printf("%-12s %9s %8s %8s %8s %9s %9s\n", r->f[c_method].c_str(),
                        fmt2(rate).c_str(), fmt2(std::stod(r->f[c_bias])).c_str(),
                        fmt2(std::stod(r->f[c_sd])).c_str(),
                        fmt2(std::stod(r->f[c_rmse])).c_str(),
                        fmt2(std::stod(r->f[c_rel])).c_str(),
                        fmt2(std::stod(r->f[c_cov])).c_str());
          }
        }
      }
      std::printf("\n");
    }
  } catch (const std::exception& e) {
    std::cerr << "mhrsim tables: " << e.what() << "\n";
    return kExitConfigError;
  }
  return kExitOk;
}

}  // namespace mhrsim
