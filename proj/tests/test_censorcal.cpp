#include "mhrsim/censorcal.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace mhrsim;

TEST_CASE("tau_of matches the event-time scale") {
  const double lambda = 0.00002, eta = 2.0;
  const double tau0 = tau_of(0.0, lambda, eta);
  CHECK(tau0 == doctest::Approx(223.6068).epsilon(1e-6));

  // survival at t = tau is exp(-1)
  CHECK(std::exp(-lambda * std::exp(0.0) * tau0 * tau0) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

  double prev = tau_of(-2.0, lambda, eta);
  for (double lp = -1.5; lp <= 2.0; lp += 0.5) {
    const double t = tau_of(lp, lambda, eta);
    CHECK(t < prev);
    prev = t;
  }
  CHECK_THROWS(tau_of(0.0, -1.0, eta));
}

TEST_CASE("p_censor weibull closed forms") {
  CHECK(p_censor(100.0, 2.0, 100.0, CensorDist::weibull) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p_censor(100.0, 2.0, 1e9, CensorDist::weibull) < 1e-10);
  CHECK_THROWS(p_censor(100.0, 2.0, 100.0, CensorDist::none));
  CHECK_THROWS(p_censor(-1.0, 2.0, 1.0, CensorDist::weibull));
}

TEST_CASE("p_censor uniform vs erf reduction and Monte Carlo oracle") {
  // eta = 2 reduces to (tau/(2 theta)) * sqrt(pi) * erf(theta/tau)
  for (double ratio : {0.25, 0.5, 1.0, 2.0, 5.0}) {
    const double tau = 150.0, theta = ratio * tau;
    const double closed = tau / (2.0 * theta) * std::sqrt(M_PI) * std::erf(theta / tau);
    CHECK(p_censor(tau, 2.0, theta, CensorDist::uniform) ==
          doctest::Approx(closed).epsilon(1e-10));
  }
  CHECK(p_censor(100.0, 2.0, 100.0, CensorDist::uniform) ==
        doctest::Approx(0.74682).epsilon(1e-4));

  // Monte Carlo Pr(C < Y) with paired draws
  RngStream rng(555, 0, 0);
  const double tau = 180.0, theta = 140.0;
  const long n = 10000000;
  long censored = 0;
  for (long i = 0; i < n; ++i) {
    const double c = theta * rng.uniform();
    const double y = tau * std::sqrt(-std::log(rng.uniform()));
    censored += (c < y) ? 1 : 0;
  }
  const double emp = static_cast<double>(censored) / n;
  CHECK(std::abs(emp - p_censor(tau, 2.0, theta, CensorDist::uniform)) < 0.001);
}

TEST_CASE("p_censor monotone decreasing in theta; complement identity") {
  for (CensorDist dist : {CensorDist::uniform, CensorDist::weibull}) {
    double prev = 1.0;
    for (double theta = 20.0; theta <= 2000.0; theta *= 1.6) {
      const double p = p_censor(150.0, 2.0, theta, dist);
      CHECK(p < prev);
      prev = p;

      CensorPlan plan{dist, theta, 0.5, 2.0};
      CHECK(p + true_event_prob(150.0, plan) == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
  CensorPlan none{CensorDist::none, 0.0, 0.0, 2.0};
  CHECK(true_event_prob(123.0, none) == 1.0);
}

TEST_CASE("solve_theta identities and round trip") {
  // all tau equal, weibull, pi = 0.5 -> theta = tau
  const std::vector<double> flat(100, 250.0);
  CHECK(solve_theta(flat, 0.5, 2.0, CensorDist::weibull) ==
        doctest::Approx(250.0).epsilon(1e-6));

  // realized censoring fraction on a fresh draw approaches pi
  RngStream rng(777, 0, 0);
  const long n = 20000;
  std::vector<double> taus(n);
  for (double& t : taus) t = 150.0 * std::exp(0.4 * rng.normal());
  for (CensorDist dist : {CensorDist::uniform, CensorDist::weibull}) {
    for (double pi : {0.3, 0.7}) {
      const double theta = solve_theta(taus, pi, 2.0, dist, ThetaMethod::kde_quadrature);
      long censored = 0;
      for (long i = 0; i < n; ++i) {
        const double y = taus[i] * std::sqrt(-std::log(rng.uniform()));
        const double c = dist == CensorDist::uniform
                             ? theta * rng.uniform()
                             : theta * std::sqrt(-std::log(rng.uniform()));
        censored += (c < y) ? 1 : 0;
      }
      CHECK(std::abs(static_cast<double>(censored) / n - pi) < 0.015);
    }
  }

  // the two evaluation methods agree closely on a cohort-sized sample
  std::vector<double> tau6000(taus.begin(), taus.begin() + 6000);
  for (double pi : {0.2, 0.5, 0.8}) {
    const double t1 =
        solve_theta(tau6000, pi, 2.0, CensorDist::uniform, ThetaMethod::sample_average);
    const double t2 =
        solve_theta(tau6000, pi, 2.0, CensorDist::uniform, ThetaMethod::kde_quadrature);
    CHECK(std::abs(t1 - t2) / t1 < 0.02);
  }

  CHECK_THROWS(solve_theta(flat, 0.0, 2.0, CensorDist::weibull));
  CHECK_THROWS(solve_theta({}, 0.5, 2.0, CensorDist::weibull));
  CHECK_THROWS(solve_theta(flat, 0.5, 2.0, CensorDist::none));
}

TEST_CASE("draw_censoring distributions") {
  RngStream rng(888, 0, 0);
  const CensorPlan uni{CensorDist::uniform, 10.0, 0.5, 2.0};
  const Eigen::VectorXd cu = draw_censoring(uni, 10000, rng);
  CHECK(cu.minCoeff() > 0.0);
  CHECK(cu.maxCoeff() < 10.0);
  CHECK(std::abs(cu.mean() - 5.0) < 0.1);

  const CensorPlan wei{CensorDist::weibull, 200.0, 0.5, 2.0};
  const Eigen::VectorXd cw = draw_censoring(wei, 100000, rng);
  const double surv_at_theta =
      (cw.array() > 200.0).cast<double>().sum() / static_cast<double>(cw.size());
  CHECK(std::abs(surv_at_theta - std::exp(-1.0)) < 0.01);

  const CensorPlan none{CensorDist::none, 0.0, 0.0, 2.0};
  CHECK_THROWS(draw_censoring(none, 10, rng));
}

TEST_CASE("apply_censoring definition and uncensored edge") {
  DgpParams p = DgpParams::defaults();
  p.alpha_star = 0.0;

  Cohort c;
  c.Z = {1, 0};
  c.Y.resize(2);
  c.Y << 1.0, 5.0;
  c.T = c.Y;
  c.D = {1, 1};
  c.C = Eigen::VectorXd::Constant(2, std::numeric_limits<double>::infinity());
  c.X = Eigen::MatrixXd::Zero(2, 10);
  c.lp = Eigen::VectorXd::Zero(2);
  c.true_ps = Eigen::VectorXd::Constant(2, 0.5);

  Eigen::VectorXd cc(2);
  cc << 2.0, 3.0;
  apply_censoring(c, cc);
  CHECK(c.T[0] == 1.0);
  CHECK(c.D[0] == 1);
  CHECK(c.T[1] == 3.0);
  CHECK(c.D[1] == 0);

  apply_censoring(c, Eigen::VectorXd::Constant(2, std::numeric_limits<double>::infinity()));
  CHECK(c.D[0] == 1);
  CHECK(c.D[1] == 1);

  CHECK_THROWS(apply_censoring(c, Eigen::VectorXd::Ones(3)));
}

TEST_CASE("solve_theta round trip on a DGP cohort") {
  DgpParams p = DgpParams::defaults();
  p.alpha_star = 0.4;
  RngStream rng(999, 0, 0);
  const Cohort c = make_cohort(Setting::observational, 20000, p, rng);
  std::vector<double> taus(c.n());
  for (long i = 0; i < c.n(); ++i) taus[i] = tau_of(c.lp[i], p.lambda, p.eta);

  const double pi = 0.6;
  const double theta = solve_theta(taus, pi, p.eta, CensorDist::uniform);
  Cohort cc = c;
  const CensorPlan plan{CensorDist::uniform, theta, pi, p.eta};
  apply_censoring(cc, draw_censoring(plan, cc.n(), rng));
  long events = 0;
  for (int d : cc.D) events += d;
  const double realized = 1.0 - static_cast<double>(events) / cc.n();
  CHECK(std::abs(realized - pi) < 0.015);

  // true event probability matches the realized event share among subjects
  // with similar tau (coarse stratification)
  std::vector<long> idx(cc.n());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](long a, long b) { return taus[a] < taus[b]; });
  const long stratum = cc.n() / 10;
  for (int s : {1, 5, 8}) {
    double p_sum = 0.0, d_sum = 0.0;
    for (long k = s * stratum; k < (s + 1) * stratum; ++k) {
      p_sum += true_event_prob(taus[idx[k]], plan);
      d_sum += cc.D[idx[k]];
    }
    CHECK(std::abs(p_sum / stratum - d_sum / stratum) < 0.03);
  }
}
