#pragma once

#include "mhrsim/numkit.hpp"
#include "mhrsim/synthcohort.hpp"

#include <vector>

namespace mhrsim {

enum class CensorDist { none, uniform, weibull };

// A resolved censoring mechanism: distribution, scale theta solved for the
// target proportion pi, and the Weibull shape shared with the DGP.
struct CensorPlan {
  CensorDist dist = CensorDist::none;
  double theta = 0.0;
  double pi = 0.0;
  double eta = 2.0;
};

// Weibull scale of a subject's event time: S(t) = exp(-(t/tau)^eta),
// tau = (lambda * exp(lp))^(-1/eta).
double tau_of(double lp, double lambda, double eta);

// Pr(C < Y) for a subject with event scale tau.
// Uniform(0,theta): (tau/(eta*theta)) * ligamma(1/eta, (theta/tau)^eta);
// Weibull(eta,theta): 1 / (1 + (theta/tau)^eta).
double p_censor(double tau, double eta, double theta, CensorDist dist);

enum class ThetaMethod { sample_average, kde_quadrature };

// Solves gamma(theta|pi) = 0 where gamma is the mean censoring probability
// over the tau sample minus pi, either directly over the sample or by
// 512-point trapezoid quadrature against a Gaussian KDE of tau.
double solve_theta(const std::vector<double>& tau_sample, double pi, double eta,
                   CensorDist dist, ThetaMethod method = ThetaMethod::kde_quadrature,
                   double gtol = 1e-6);

Eigen::VectorXd draw_censoring(const CensorPlan& plan, long n, RngStream& rng);

// Populates T = min(Y, C) and D = 1{Y <= C}.
void apply_censoring(Cohort& cohort, const Eigen::VectorXd& C);

// True conditional event probability Pr(D=1 | Z, X) = 1 - Pr(C < Y); 1 when
// there is no censoring.
double true_event_prob(double tau, const CensorPlan& plan);

}  // namespace mhrsim
