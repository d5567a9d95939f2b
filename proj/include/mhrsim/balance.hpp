#pragma once

#include "mhrsim/synthcohort.hpp"

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

namespace mhrsim {

enum class Method { IPTW, IPTW_PEW1, IPTW_PEW2, PSM, PSM_PEW1, PSM_PEW2 };

inline constexpr std::array<Method, 6> kAllMethods = {
    Method::IPTW, Method::IPTW_PEW1, Method::IPTW_PEW2,
    Method::PSM,  Method::PSM_PEW1,  Method::PSM_PEW2};

const char* method_name(Method m);

struct WeightSet {
  Method method = Method::IPTW;
  Eigen::VectorXd w;
};

struct FullMatchResult {
  std::vector<int> stratum_of;     // subject -> stratum id, 0..n_strata-1
  std::vector<int> n_treated;      // per stratum
  std::vector<int> n_control;     // per stratum
  double p_z = 0.0;               // marginal treated fraction
  double total_distance = 0.0;    // sum of within-stratum treated-control |PS| gaps
  int n_strata = 0;
};

// Logistic PS model: Z on intercept + X1..X10. Fitted probabilities are
// clipped to [1e-6, 1-1e-6] so downstream weights stay finite.
Eigen::VectorXd fit_ps(const Cohort& cohort);

// Eq-style total-population weights: Z/ps + (1-Z)/(1-ps).
Eigen::VectorXd iptw_weights(const Eigen::VectorXd& ps, const std::vector<int>& Z);

// Optimal full matching on |PS| distance: partitions subjects into strata
// with at least one treated and one control each, minimizing the total of
// treated-control PS distances over all within-stratum pairs. Solved exactly
// as a minimum-cost network flow (reduced to a minimum-weight edge cover).
FullMatchResult full_match(const Eigen::VectorXd& ps, const std::vector<int>& Z);

// Stratum weights: treated p_z*(n1+n0)/n1, control (1-p_z)*(n1+n0)/n0.
Eigen::VectorXd full_match_weights(const FullMatchResult& match, const std::vector<int>& Z);

// The full-matching objective for an arbitrary stratum assignment, summed in
// a canonical order so equal partitions produce bit-equal totals.
double full_match_objective(const Eigen::VectorXd& ps, const std::vector<int>& Z,
                            const std::vector<int>& stratum_of);

// Logistic event-probability model: D on intercept + Z + X1..X10, unweighted.
// Degenerate all-event / no-event data yields a constant clipped vector and
// sets *degenerate.
Eigen::VectorXd fit_event_prob(const Cohort& cohort, bool* degenerate = nullptr);

// PE modification: elementwise product of PS weights with Pr(D=1|Z,X).
Eigen::VectorXd pe_modify(const Eigen::VectorXd& w_ps, const Eigen::VectorXd& p_event);

}  // namespace mhrsim
