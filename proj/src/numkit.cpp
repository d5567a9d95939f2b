#include "mhrsim/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mhrsim {

namespace {

double bernoulli_loglik(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
  // sum y*eta - log(1 + exp(eta)), with the usual overflow-safe log1p form
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double e = eta[i];
    const double log1pe = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    ll += y[i] * e - log1pe;
  }
  return ll;
}

}  // namespace

GlmFit logistic_irls(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                     double tol, int max_iter) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  if (response.size() != n) throw std::invalid_argument("logistic_irls: response length mismatch");
  if (n < p) throw std::invalid_argument("logistic_irls: fewer rows than columns");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (response[i] != 0.0 && response[i] != 1.0)
      throw std::invalid_argument("logistic_irls: response must be 0/1");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < p) throw std::runtime_error("logistic_irls: rank-deficient design");

  GlmFit fit;
  fit.coef = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  double ll = bernoulli_loglik(eta, response);

  // a saturated fit reproduces the response exactly: the MLE sits at infinity
  // and the score criterion alone would declare victory on the way there
  auto separated = [&](const Eigen::VectorXd& prob) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (response[i] == 1.0 ? prob[i] <= 1.0 - 1e-8 : prob[i] >= 1e-8) return false;
    }
    return true;
  };

  for (int iter = 1; iter <= max_iter; ++iter) {
    fit.iterations = iter;
    const Eigen::VectorXd prob = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
    const Eigen::VectorXd score = design.transpose() * (response - prob);
    fit.max_abs_score = score.lpNorm<Eigen::Infinity>();
    if (fit.max_abs_score < tol) {
      if (separated(prob)) throw std::runtime_error("logistic_irls: complete separation detected");
      fit.converged = true;
      return fit;
    }
    Eigen::VectorXd w = (prob.array() * (1.0 - prob.array())).cwiseMax(1e-10).matrix();
    const Eigen::MatrixXd info = design.transpose() * w.asDiagonal() * design;
    const Eigen::VectorXd delta = info.ldlt().solve(score);

    double step = 1.0;
    Eigen::VectorXd coef_new;
    Eigen::VectorXd eta_new;
    double ll_new;
    for (int h = 0; h < 30; ++h) {
      coef_new = fit.coef + step * delta;
      eta_new = design * coef_new;
      ll_new = bernoulli_loglik(eta_new, response);
      if (ll_new >= ll - 1e-10 * (std::abs(ll) + 1.0)) break;
      step *= 0.5;
    }
    fit.coef = coef_new;
    eta = eta_new;
    ll = ll_new;

    if (fit.coef.lpNorm<Eigen::Infinity>() > 30.0)
      throw std::runtime_error("logistic_irls: complete separation detected");
  }

  const Eigen::VectorXd prob = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
  fit.max_abs_score = (design.transpose() * (response - prob)).lpNorm<Eigen::Infinity>();
  fit.converged = fit.max_abs_score < tol;
  return fit;
}

namespace {

// Normalized P(s,x) by series, valid for x < s+1.
double gamma_p_series(double s, double x) {
  double ap = s;
  double del = 1.0 / s;
  double sum = del;
  for (int k = 0; k < 1000; ++k) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-17) break;
  }
  return sum * std::exp(-x + s * std::log(x) - std::lgamma(s));
}

// Normalized Q(s,x) by modified Lentz continued fraction, x >= s+1.
double gamma_q_cf(double s, double x) {
  const double tiny = std::numeric_limits<double>::min() / 1e-30;
  double b = x + 1.0 - s;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 1000; ++i) {
    const double an = -i * (i - s);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + s * std::log(x) - std::lgamma(s)) * h;
}

}  // namespace

double lower_inc_gamma(double s, double x) {
  if (!(s > 0.0)) throw std::invalid_argument("lower_inc_gamma: s must be > 0");
  if (!(x >= 0.0)) throw std::invalid_argument("lower_inc_gamma: x must be >= 0");
  if (x == 0.0) return 0.0;
  const double g = std::tgamma(s);
  if (std::isinf(x)) return g;
  if (x < s + 1.0) return gamma_p_series(s, x) * g;
  return (1.0 - gamma_q_cf(s, x)) * g;
}

double brent_root(const std::function<double(double)>& f, double lo, double hi,
                  double xtol, double ftol) {
  double a = lo, b = hi;
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if (fa * fb > 0.0) throw std::invalid_argument("brent_root: no sign change on bracket");

  double c = a, fc = fa;
  double d = b - a, e = d;
  for (int iter = 0; iter < 200; ++iter) {
    if (std::abs(fc) < std::abs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * xtol;
    const double xm = 0.5 * (c - b);
    if (std::abs(xm) <= tol1 || fb == 0.0 || std::abs(fb) <= ftol) return b;
    if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
      // inverse quadratic / secant step
      const double s = fb / fa;
      double p, q;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        const double qq = fa / fc;
        const double r = fb / fc;
        p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
        q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += (std::abs(d) > tol1) ? d : (xm > 0 ? tol1 : -tol1);
    fb = f(b);
    if ((fb > 0) == (fc > 0)) {
      c = a;
      fc = fa;
      d = b - a;
      e = d;
    }
  }
  return b;
}

GaussianKde::GaussianKde(std::vector<double> sample, double bandwidth)
    : sorted_(std::move(sample)) {
  if (sorted_.size() < 2) throw std::invalid_argument("GaussianKde: need at least 2 points");
  for (double v : sorted_) {
    if (!std::isfinite(v)) throw std::invalid_argument("GaussianKde: non-finite sample value");
  }
  std::sort(sorted_.begin(), sorted_.end());
  const auto n = static_cast<double>(sorted_.size());

  if (bandwidth > 0.0) {
    bw_ = bandwidth;
    return;
  }
  double mean = 0.0;
  for (double v : sorted_) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : sorted_) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));

  auto quantile = [&](double p) {
    const double h = (n - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted_.size() - 1);
    return sorted_[lo] + (h - std::floor(h)) * (sorted_[hi] - sorted_[lo]);
  };
  const double iqr = quantile(0.75) - quantile(0.25);

  double scale = std::min(sd, iqr / 1.34);
  if (scale <= 0.0) scale = sd;
  if (scale <= 0.0) throw std::invalid_argument("GaussianKde: zero-variance sample");
  bw_ = 0.9 * scale * std::pow(n, -0.2);
}

double GaussianKde::operator()(double x) const {
  static const double inv_sqrt2pi = 0.3989422804014327;
  // kernels beyond 8 bandwidths contribute < 1e-15 of the mass
  const auto lo = std::lower_bound(sorted_.begin(), sorted_.end(), x - 8.0 * bw_);
  const auto hi = std::upper_bound(lo, sorted_.end(), x + 8.0 * bw_);
  double acc = 0.0;
  for (auto it = lo; it != hi; ++it) {
    const double z = (x - *it) / bw_;
    acc += std::exp(-0.5 * z * z);
  }
  return acc * inv_sqrt2pi / (bw_ * static_cast<double>(sorted_.size()));
}

std::vector<double> GaussianKde::evaluate(const std::vector<double>& xs) const {
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = (*this)(xs[i]);
  return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p outside (0,1)");
  // Acklam's rational approximation, then two Newton polish steps.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int k = 0; k < 2; ++k) {
    const double err = normal_cdf(x) - p;
    const double pdf = std::exp(-0.5 * x * x) * 0.3989422804014327;
    if (pdf <= 0.0) break;
    x -= err / pdf;
  }
  return x;
}

namespace {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t scenario_id,
                     std::uint64_t replicate_id)
    : master_seed_(master_seed), scenario_id_(scenario_id), replicate_id_(replicate_id) {
  std::uint64_t h = mix64(master_seed + 0x9E3779B97F4A7C15ull);
  h = mix64(h ^ (scenario_id + 0xD1B54A32D192ED03ull));
  h = mix64(h ^ (replicate_id + 0x8CB92BA72F3D8DD7ull));
  state_ = h;
}

std::uint64_t RngStream::next_u64() {
  state_ += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double RngStream::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

}  // namespace mhrsim
