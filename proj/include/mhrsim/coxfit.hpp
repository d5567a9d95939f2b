#pragma once

#include <Eigen/Dense>

#include <limits>
#include <vector>

namespace mhrsim {

enum class Ties { efron, breslow };

// Weighted Cox partial-likelihood fit. One entry per covariate column.
struct CoxEstimate {
  Eigen::VectorXd log_hr;
  Eigen::VectorXd naive_se;
  Eigen::VectorXd robust_se;
  bool converged = false;
  bool diverged = false;  // monotone likelihood
  int iterations = 0;
  long n_events = 0;
  Ties ties = Ties::efron;
  double loglik = std::numeric_limits<double>::quiet_NaN();
  double max_abs_score = std::numeric_limits<double>::infinity();
};

struct CoxOptions {
  Ties ties = Ties::efron;
  double tol = 1e-9;          // score sup-norm
  double rel_ll_tol = 1e-12;  // secondary stall guard
  int max_iter = 50;
  bool robust = true;  // sandwich variance from weighted score residuals
};

// Newton-Raphson with step-halving on the case-weighted partial likelihood.
// Subjects censored at an event time are kept in that risk set (event before
// censoring). Throws on zero events or empty data; monotone-likelihood
// divergence is flagged, not thrown.
CoxEstimate cox_weighted(const Eigen::VectorXd& time, const std::vector<int>& status,
                         const Eigen::MatrixXd& covars, const Eigen::VectorXd& weights,
                         const CoxOptions& opt = {});

struct CoxDerivatives {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd info;  // negative Hessian
};

// Weighted partial likelihood with analytic derivatives at an arbitrary
// coefficient value; diagnostics hook for derivative checks.
CoxDerivatives cox_loglik(const Eigen::VectorXd& time, const std::vector<int>& status,
                          const Eigen::MatrixXd& covars, const Eigen::VectorXd& weights,
                          const Eigen::VectorXd& beta, Ties ties = Ties::efron);

struct HrInterval {
  double lo = 0.0;
  double hi = 0.0;
};

// Wald interval on the hazard-ratio scale from the robust SE.
HrInterval wald_ci(const CoxEstimate& est, double level = 0.95, int coef_index = 0);

enum class CurveMode { marginal, conditional };
enum class CurveAxis { event_fraction, resolved_fraction };

struct HrCurvePoint {
  double fraction = 0.0;
  double hr = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
};

// Rolling HR estimates: for each grid fraction q, administratively censor the
// cohort at the time when ceil(q*n) subjects have had an event
// (event_fraction) or have had an event or been censored (resolved_fraction),
// then refit. marginal uses treatment only, conditional treatment plus X.
// Unreachable fractions come back with ok=false.
std::vector<HrCurvePoint> hr_curve(const Eigen::VectorXd& time, const std::vector<int>& status,
                                   const std::vector<int>& treatment, const Eigen::MatrixXd& X,
                                   const Eigen::VectorXd& weights, const std::vector<double>& grid,
                                   CurveMode mode, CurveAxis axis, const CoxOptions& opt = {});

}  // namespace mhrsim
