#include "mhrsim/synthcohort.hpp"

#include "mhrsim/coxfit.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mhrsim {

namespace {

// Bernoulli covariate columns (0-based): X1, X3, X5, X6, X8, X9.
constexpr bool kIsBinaryCol[kNumCovariates] = {true,  false, true,  false, true,
                                               true,  false, true,  true,  false};

constexpr std::uint64_t kCalibrationSeed = 0x4D485253494D2101ull;

}  // namespace

DgpParams DgpParams::defaults() {
  DgpParams p;
  p.zeta.resize(kNumCovariates);
  p.zeta << 0.8, -0.25, 0.6, -0.4, -0.8, -0.5, 0.7, 0.0, 0.0, 0.0;
  p.beta.resize(kNumCovariates);
  p.beta << 0.3, -0.36, -0.73, -0.2, 0.0, 0.0, 0.0, 0.71, -0.19, 0.26;
  return p;
}

Eigen::MatrixXd gen_covariates(long n, RngStream& rng) {
  if (n < 1) throw std::invalid_argument("gen_covariates: n must be >= 1");
  Eigen::MatrixXd X(n, kNumCovariates);
  for (long i = 0; i < n; ++i) {
    for (int j = 0; j < kNumCovariates; ++j) {
      X(i, j) = kIsBinaryCol[j] ? (rng.bernoulli(0.5) ? 1.0 : 0.0) : rng.normal();
    }
  }
  return X;
}

Eigen::VectorXd true_ps(const Eigen::MatrixXd& X, const Eigen::VectorXd& zeta) {
  if (X.cols() != zeta.size()) throw std::invalid_argument("true_ps: dimension mismatch");
  const Eigen::VectorXd logit = X * zeta;
  return (1.0 / (1.0 + (-logit.array()).exp())).matrix();
}

std::vector<int> assign_treatment(const Eigen::VectorXd& ps, RngStream& rng) {
  std::vector<int> z(ps.size());
  for (Eigen::Index i = 0; i < ps.size(); ++i) z[i] = rng.bernoulli(ps[i]) ? 1 : 0;
  return z;
}

double gen_event_time(double lp, double lambda, double eta, RngStream& rng) {
  if (!(lambda > 0.0) || !(eta > 0.0))
    throw std::invalid_argument("gen_event_time: lambda and eta must be > 0");
  const double u = rng.uniform();
  return std::pow(-std::log(u) / (lambda * std::exp(lp)), 1.0 / eta);
}

Cohort make_cohort(Setting setting, long n, const DgpParams& params, RngStream& rng) {
  if (n < 1) throw std::invalid_argument("make_cohort: n must be >= 1");
  if (!std::isfinite(params.alpha_star))
    throw std::invalid_argument("make_cohort: alpha_star is not calibrated");

  Cohort c;
  c.setting = setting;
  const double inf = std::numeric_limits<double>::infinity();

  if (setting == Setting::counterfactual) {
    if (n % 2 != 0) throw std::invalid_argument("make_cohort: counterfactual n must be even");
    const long m = n / 2;
    const Eigen::MatrixXd Xs = gen_covariates(m, rng);
    c.X.resize(n, kNumCovariates);
    c.Z.resize(n);
    c.true_ps = Eigen::VectorXd::Constant(n, 0.5);
    c.lp.resize(n);
    c.Y.resize(n);
    for (long s = 0; s < m; ++s) {
      const double bx = Xs.row(s) * params.beta;
      for (int arm = 0; arm < 2; ++arm) {
        const long i = 2 * s + arm;
        const int z = arm == 0 ? 1 : 0;
        c.X.row(i) = Xs.row(s);
        c.Z[i] = z;
        c.lp[i] = params.alpha_star * z + bx;
        c.Y[i] = gen_event_time(c.lp[i], params.lambda, params.eta, rng);
      }
    }
  } else {
    c.X = gen_covariates(n, rng);
    c.true_ps = true_ps(c.X, params.zeta);
    c.Z = assign_treatment(c.true_ps, rng);
    c.lp.resize(n);
    c.Y.resize(n);
    const Eigen::VectorXd bx = c.X * params.beta;
    for (long i = 0; i < n; ++i) {
      c.lp[i] = params.alpha_star * c.Z[i] + bx[i];
      c.Y[i] = gen_event_time(c.lp[i], params.lambda, params.eta, rng);
    }
  }
  c.C = Eigen::VectorXd::Constant(n, inf);
  c.T = c.Y;
  c.D.assign(n, 1);
  return c;
}

namespace {

// Marginal log-HR on an uncensored counterfactual sample built from shared
// draws: pairs (bx_i, u1_i, u0_i) with event times recomputed per candidate.
double marginal_loghr(double alpha_star, const std::vector<double>& bx,
                      const std::vector<double>& u1, const std::vector<double>& u0,
                      const DgpParams& params) {
  const long m = static_cast<long>(bx.size());
  const long n = 2 * m;
  Eigen::VectorXd time(n);
  std::vector<int> status(n, 1);
  Eigen::MatrixXd z(n, 1);
  const double inv_eta = 1.0 / params.eta;
  for (long s = 0; s < m; ++s) {
    time[2 * s] =
        std::pow(-std::log(u1[s]) / (params.lambda * std::exp(alpha_star + bx[s])), inv_eta);
    z(2 * s, 0) = 1.0;
    time[2 * s + 1] =
        std::pow(-std::log(u0[s]) / (params.lambda * std::exp(bx[s])), inv_eta);
    z(2 * s + 1, 0) = 0.0;
  }
  CoxOptions opt;
  opt.robust = false;
  const CoxEstimate est =
      cox_weighted(time, status, z, Eigen::VectorXd::Ones(n), opt);
  if (!est.converged) throw std::runtime_error("calibrate_alpha_star: marginal fit failed");
  return est.log_hr[0];
}

}  // namespace

double calibrate_alpha_star(double target_mhr, const DgpParams& params, long calib_n,
                            double tol) {
  if (!(target_mhr > 0.0)) throw std::invalid_argument("calibrate_alpha_star: target must be > 0");
  if (calib_n < 100) throw std::invalid_argument("calibrate_alpha_star: calib_n too small");
  if (target_mhr == 1.0) return 0.0;

  RngStream rng(kCalibrationSeed, 0, 0);
  std::vector<double> bx(calib_n), u1(calib_n), u0(calib_n);
  for (long s = 0; s < calib_n; ++s) {
    double acc = 0.0;
    for (int j = 0; j < kNumCovariates; ++j) {
      const double xj = kIsBinaryCol[j] ? (rng.bernoulli(0.5) ? 1.0 : 0.0) : rng.normal();
      acc += params.beta[j] * xj;
    }
    bx[s] = acc;
    u1[s] = rng.uniform();
    u0[s] = rng.uniform();
  }

  auto gap = [&](double a) {
    return std::exp(marginal_loghr(a, bx, u1, u0, params)) - target_mhr;
  };

  // Attenuation (|alpha| <= |alpha*|) puts alpha* between log(target) and
  // 3*log(target); widen the far end if the sample disagrees.
  const double lt = std::log(target_mhr);
  double near = 0.0, far = 3.0 * lt;
  double g_near = gap(near);
  double g_far = gap(far);
  for (int widen = 0; widen < 6 && g_near * g_far > 0.0; ++widen) {
    far *= 2.0;
    g_far = gap(far);
  }
  if (g_near * g_far > 0.0)
    throw std::runtime_error("calibrate_alpha_star: bisection bracket failure");

  double lo = std::min(near, far), hi = std::max(near, far);
  double g_lo = lo == near ? g_near : g_far;
  for (int iter = 0; iter < 100; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double g_mid = gap(mid);
    if (std::abs(g_mid) < tol) return mid;
    if ((g_mid > 0.0) == (g_lo > 0.0)) {
      lo = mid;
      g_lo = g_mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-10) return 0.5 * (lo + hi);
  }
  throw std::runtime_error("calibrate_alpha_star: tolerance not reached");
}

AlphaStarCache::AlphaStarCache(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    Entry e{"", 0.0, 0, 0.0};
    if (ss >> e.key >> e.alpha_star >> e.calib_n >> e.tol) entries_.push_back(std::move(e));
  }
}

std::string AlphaStarCache::key_of(double target_mhr, const DgpParams& params, long calib_n,
                                   double tol) {
  std::ostringstream ss;
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g|", v);
    ss << buf;
  };
  put(target_mhr);
  for (Eigen::Index j = 0; j < params.zeta.size(); ++j) put(params.zeta[j]);
  for (Eigen::Index j = 0; j < params.beta.size(); ++j) put(params.beta[j]);
  put(params.lambda);
  put(params.eta);
  ss << calib_n << '|';
  put(tol);
  // FNV-1a over the canonical key string
  std::uint64_t h = 1469598103934665603ull;
  for (char ch : ss.str()) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ull;
  }
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool AlphaStarCache::lookup(double target_mhr, const DgpParams& params, long calib_n,
                            double tol, double* alpha_star) const {
  const std::string key = key_of(target_mhr, params, calib_n, tol);
  for (const auto& e : entries_) {
    if (e.key == key) {
      *alpha_star = e.alpha_star;
      return true;
    }
  }
  return false;
}

void AlphaStarCache::store(double target_mhr, const DgpParams& params, long calib_n,
                           double tol, double alpha_star) {
  entries_.push_back({key_of(target_mhr, params, calib_n, tol), alpha_star, calib_n, tol});
  save();
}

double AlphaStarCache::get_or_calibrate(double target_mhr, const DgpParams& params,
                                        long calib_n, double tol) {
  double a = 0.0;
  if (lookup(target_mhr, params, calib_n, tol, &a)) return a;
  a = calibrate_alpha_star(target_mhr, params, calib_n, tol);
  store(target_mhr, params, calib_n, tol, a);
  return a;
}

void AlphaStarCache::save() const {
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw std::runtime_error("AlphaStarCache: cannot write " + path_);
  char buf[64];
  for (const auto& e : entries_) {
    std::snprintf(buf, sizeof buf, "%.17g", e.alpha_star);
    out << e.key << ' ' << buf << ' ' << e.calib_n << ' ' << e.tol << '\n';
  }
}

}  // namespace mhrsim
