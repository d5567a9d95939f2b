#include "mhrsim/censorcal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mhrsim {

double tau_of(double lp, double lambda, double eta) {
  if (!(lambda > 0.0) || !(eta > 0.0))
    throw std::invalid_argument("tau_of: lambda and eta must be > 0");
  return std::pow(lambda * std::exp(lp), -1.0 / eta);
}

double p_censor(double tau, double eta, double theta, CensorDist dist) {
  if (dist == CensorDist::none) throw std::invalid_argument("p_censor: no censoring distribution");
  if (!(tau > 0.0) || !(theta > 0.0))
    throw std::invalid_argument("p_censor: tau and theta must be > 0");
  const double ratio = theta / tau;
  if (dist == CensorDist::weibull) return 1.0 / (1.0 + std::pow(ratio, eta));
  const double x = std::pow(ratio, eta);
  return tau / (eta * theta) * lower_inc_gamma(1.0 / eta, x);
}

double solve_theta(const std::vector<double>& tau_sample, double pi, double eta,
                   CensorDist dist, ThetaMethod method, double gtol) {
  if (tau_sample.empty()) throw std::invalid_argument("solve_theta: empty tau sample");
  if (!(pi > 0.0 && pi < 1.0)) throw std::invalid_argument("solve_theta: pi must be in (0,1)");
  if (dist == CensorDist::none) throw std::invalid_argument("solve_theta: dist must not be none");

  std::function<double(double)> gamma_fn;
  std::vector<double> grid, dens;
  double step = 0.0;

  // a degenerate tau sample has a point-mass density; fall back to averaging
  const auto [mn, mx] = std::minmax_element(tau_sample.begin(), tau_sample.end());
  if (tau_sample.size() < 2 || *mn == *mx) method = ThetaMethod::sample_average;

  if (method == ThetaMethod::kde_quadrature) {
    // density values on the grid do not depend on theta, so evaluate once
    const GaussianKde kde(tau_sample);
    constexpr int kPoints = 512;
    const double lo = std::max(kde.support_lo(), 1e-12);
    const double hi = kde.support_hi();
    step = (hi - lo) / (kPoints - 1);
    grid.resize(kPoints);
    for (int i = 0; i < kPoints; ++i) grid[i] = lo + step * i;
    dens = kde.evaluate(grid);
    gamma_fn = [&, step](double theta) {
      double acc = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v = dens[i] * p_censor(grid[i], eta, theta, dist);
        acc += (i == 0 || i + 1 == grid.size()) ? 0.5 * v : v;
      }
      return acc * step - pi;
    };
  } else {
    gamma_fn = [&](double theta) {
      double acc = 0.0;
      for (double t : tau_sample) acc += p_censor(t, eta, theta, dist);
      return acc / static_cast<double>(tau_sample.size()) - pi;
    };
  }

  std::vector<double> tmp(tau_sample);
  std::nth_element(tmp.begin(), tmp.begin() + tmp.size() / 2, tmp.end());
  const double med = tmp[tmp.size() / 2];
  double lo = 1e-6 * med, hi = 1e6 * med;
  double g_lo = gamma_fn(lo), g_hi = gamma_fn(hi);
  for (int widen = 0; widen < 8 && g_lo * g_hi > 0.0; ++widen) {
    lo *= 0.1;
    hi *= 10.0;
    g_lo = gamma_fn(lo);
    g_hi = gamma_fn(hi);
  }
  if (g_lo * g_hi > 0.0) throw std::runtime_error("solve_theta: bracket failure");
  return brent_root(gamma_fn, lo, hi, 1e-9 * med, gtol);
}

Eigen::VectorXd draw_censoring(const CensorPlan& plan, long n, RngStream& rng) {
  if (plan.dist == CensorDist::none)
    throw std::invalid_argument("draw_censoring: plan has no censoring distribution");
  if (!(plan.theta > 0.0)) throw std::invalid_argument("draw_censoring: theta must be > 0");
  Eigen::VectorXd c(n);
  if (plan.dist == CensorDist::uniform) {
    for (long i = 0; i < n; ++i) c[i] = plan.theta * rng.uniform();
  } else {
    const double inv_eta = 1.0 / plan.eta;
    for (long i = 0; i < n; ++i)
      c[i] = plan.theta * std::pow(-std::log(rng.uniform()), inv_eta);
  }
  return c;
}

void apply_censoring(Cohort& cohort, const Eigen::VectorXd& C) {
  if (C.size() != cohort.n()) throw std::invalid_argument("apply_censoring: length mismatch");
  cohort.C = C;
  for (long i = 0; i < cohort.n(); ++i) {
    if (cohort.Y[i] <= C[i]) {
      cohort.T[i] = cohort.Y[i];
      cohort.D[i] = 1;
    } else {
      cohort.T[i] = C[i];
      cohort.D[i] = 0;
    }
  }
}

double true_event_prob(double tau, const CensorPlan& plan) {
  if (plan.dist == CensorDist::none) return 1.0;
  return 1.0 - p_censor(tau, plan.eta, plan.theta, plan.dist);
}

}  // namespace mhrsim
