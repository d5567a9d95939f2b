#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

namespace mhrsim {

// Result of a logistic regression fit, coefficients on the log-odds scale.
struct GlmFit {
  Eigen::VectorXd coef;
  bool converged = false;
  int iterations = 0;
  double max_abs_score = std::numeric_limits<double>::infinity();
};

// Maximum-likelihood logistic regression by iteratively reweighted least
// squares with step-halving. `design` is the full design matrix (add the
// intercept column yourself); response entries must be 0 or 1.
// Throws on rank-deficient design and on detected complete separation
// (coefficient walking past 30 on the log-odds scale). Plain non-convergence
// after max_iter is reported through the flag, not thrown.
GlmFit logistic_irls(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                     double tol = 1e-8, int max_iter = 50);

// Lower incomplete gamma integral_0^x t^{s-1} e^{-t} dt for s > 0, x >= 0.
// Series expansion below s+1, continued fraction above.
double lower_inc_gamma(double s, double x);

// Brent's method on [lo, hi]; f(lo) and f(hi) must bracket a root.
// Returns x once the bracket width drops below xtol or |f(x)| <= ftol.
double brent_root(const std::function<double(double)>& f, double lo, double hi,
                  double xtol, double ftol = 0.0);

// Gaussian kernel density estimate. Default bandwidth is Silverman's
// rule of thumb, 0.9 * min(sd, IQR/1.34) * n^(-1/5).
class GaussianKde {
 public:
  explicit GaussianKde(std::vector<double> sample, double bandwidth = 0.0);

  double operator()(double x) const;
  std::vector<double> evaluate(const std::vector<double>& xs) const;

  double bandwidth() const { return bw_; }
  // Grid bounds used for quadrature against this density.
  double support_lo() const { return sorted_.front() - 5.0 * bw_; }
  double support_hi() const { return sorted_.back() + 5.0 * bw_; }

 private:
  std::vector<double> sorted_;
  double bw_;
};

// Standard normal quantile (inverse CDF), accurate to ~1e-14.
double normal_quantile(double p);

// Standard normal CDF.
double normal_cdf(double x);

// Deterministic counter-based random stream. The (master_seed, scenario_id,
// replicate_id) triple is hashed into the starting counter of a SplitMix64
// sequence, so identical triples replay identical draws and distinct
// replicates get independent streams without shared state.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t scenario_id,
            std::uint64_t replicate_id);

  std::uint64_t next_u64();
  // Strictly inside (0,1): 53-bit mantissa offset by half an ulp.
  double uniform();
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t scenario_id() const { return scenario_id_; }
  std::uint64_t replicate_id() const { return replicate_id_; }

 private:
  std::uint64_t master_seed_;
  std::uint64_t scenario_id_;
  std::uint64_t replicate_id_;
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mhrsim
