#pragma once

#include "mhrsim/coxfit.hpp"
#include "mhrsim/simharness.hpp"

#include <map>
#include <string>
#include <vector>

namespace mhrsim {

// Flat "key = value" text config; '#' starts a comment, list values are
// comma-separated, numeric lists also accept lo:hi:step ranges.
class KvConfig {
 public:
  static KvConfig parse_file(const std::string& path);
  static KvConfig parse_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;

 private:
  std::map<std::string, std::string> values_;
};

Setting parse_setting(const std::string& s);
CensorDist parse_censor_dist(const std::string& s);
ThetaMethod parse_theta_method(const std::string& s);
Ties parse_ties(const std::string& s);
const char* setting_name(Setting s);
const char* censor_dist_name(CensorDist d);

// Batch-run configuration for `mhrsim run`.
struct RunConfig {
  GridSpec grid;
  std::string output_dir = "out";
  int threads = 0;  // 0 = hardware concurrency
  long calib_n = 1000000;
  double calib_tol = 0.005;
  std::string calib_cache;  // defaults to <output_dir>/alpha_star_cache.txt

  static RunConfig from_file(const std::string& path);
};

// Single-cohort figure configuration for `mhrsim curve`.
struct CurveConfig {
  Setting setting = Setting::counterfactual;
  long n = 50000;
  double mhr = 2.0;
  CensorDist censor_dist = CensorDist::none;
  double censor_rate = 0.0;
  std::vector<double> grid;
  std::vector<std::string> curves;  // marginal_unweighted, conditional_unweighted,
                                    // marginal_psweighted
  CurveAxis axis = CurveAxis::event_fraction;
  std::uint64_t master_seed = 1;
  std::string output_dir = "out";
  DgpParams dgp = DgpParams::defaults();
  ThetaMethod theta_method = ThetaMethod::kde_quadrature;
  Ties ties = Ties::efron;
  long calib_n = 1000000;
  double calib_tol = 0.005;
  std::string calib_cache;

  static CurveConfig from_file(const std::string& path);
};

}  // namespace mhrsim
