#pragma once

#include "mhrsim/numkit.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mhrsim {

inline constexpr int kNumCovariates = 10;

// Data-generating parameters. zeta drives treatment assignment,
// beta the outcome; event times are Weibull(eta) with rate lambda*exp(LP).
struct DgpParams {
  Eigen::VectorXd zeta;
  Eigen::VectorXd beta;
  double lambda = 0.00002;
  double eta = 2.0;
  double alpha_star = std::numeric_limits<double>::quiet_NaN();  // conditional log-HR
  double alpha = std::numeric_limits<double>::quiet_NaN();       // target marginal log-HR

  static DgpParams defaults();
};

enum class Setting { observational, counterfactual };

struct Cohort {
  Setting setting = Setting::observational;
  Eigen::MatrixXd X;  // n x 10
  std::vector<int> Z;
  Eigen::VectorXd true_ps;
  Eigen::VectorXd lp;
  Eigen::VectorXd Y;  // latent event time
  Eigen::VectorXd C;  // censoring time, +inf when uncensored
  Eigen::VectorXd T;  // observed min(Y, C)
  std::vector<int> D;

  long n() const { return static_cast<long>(Z.size()); }
};

// Columns 1,3,5,6,8,9 Bernoulli(0.5); columns 2,4,7,10 standard normal.
Eigen::MatrixXd gen_covariates(long n, RngStream& rng);

// Inverse-logit of zeta'X, no intercept.
Eigen::VectorXd true_ps(const Eigen::MatrixXd& X, const Eigen::VectorXd& zeta);

std::vector<int> assign_treatment(const Eigen::VectorXd& ps, RngStream& rng);

// Weibull inversion Y = (-log(u) / (lambda*exp(lp)))^(1/eta).
double gen_event_time(double lp, double lambda, double eta, RngStream& rng);

// Builds an observational (Z ~ Bernoulli(true PS)) or counterfactual cohort
// (n/2 subjects each entered under both regimes, paired rows 2i/2i+1).
// params.alpha_star must be set. Y is populated, censoring left open.
Cohort make_cohort(Setting setting, long n, const DgpParams& params, RngStream& rng);

// Bisection for the conditional log-HR that yields the target marginal HR on
// a large uncensored counterfactual sample (calib_n pairs), using a fixed
// dedicated seed and common random numbers across candidate values.
double calibrate_alpha_star(double target_mhr, const DgpParams& params,
                            long calib_n = 1000000, double tol = 0.005);

// Text-file cache of calibrated alpha* values keyed by the target MHR and the
// full DGP parameterization (one "key_hash alpha_star calib_n tol" record per
// line). Lookups miss when any keyed quantity differs.
class AlphaStarCache {
 public:
  explicit AlphaStarCache(std::string path);

  bool lookup(double target_mhr, const DgpParams& params, long calib_n, double tol,
              double* alpha_star) const;
  void store(double target_mhr, const DgpParams& params, long calib_n, double tol,
             double alpha_star);

  // Cached value or a fresh calibration persisted for the next run.
  double get_or_calibrate(double target_mhr, const DgpParams& params,
                          long calib_n = 1000000, double tol = 0.005);

 private:
  struct Entry {
    std::string key;
    double alpha_star;
    long calib_n;
    double tol;
  };
  std::string path_;
  std::vector<Entry> entries_;

  static std::string key_of(double target_mhr, const DgpParams& params, long calib_n,
                            double tol);
  void save() const;
};

}  // namespace mhrsim
