#include "mhrsim/simharness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace mhrsim {

void validate_scenario(const Scenario& s) {
  if (s.n < 2) throw std::invalid_argument("scenario: n must be >= 2");
  if (s.setting == Setting::counterfactual && s.n % 2 != 0)
    throw std::invalid_argument("scenario: counterfactual n must be even");
  if (!(s.target_mhr > 0.0)) throw std::invalid_argument("scenario: target MHR must be > 0");
  if (s.replicates < 1) throw std::invalid_argument("scenario: replicates must be >= 1");
  if (!(s.censor_rate >= 0.0 && s.censor_rate <= 0.95))
    throw std::invalid_argument("scenario: censor rate must be in [0, 0.95]");
  if ((s.censor_dist == CensorDist::none) != (s.censor_rate == 0.0))
    throw std::invalid_argument("scenario: dist=none exactly when censor rate is 0");
}

ReplicateResult run_replicate(const Scenario& scenario, long replicate_id) {
  ReplicateResult out;
  out.replicate_id = replicate_id;
  for (std::size_t m = 0; m < kAllMethods.size(); ++m) out.records[m].method = kAllMethods[m];

  try {
    validate_scenario(scenario);
    if (!std::isfinite(scenario.dgp.alpha_star))
      throw std::invalid_argument("run_replicate: alpha_star not calibrated");

    RngStream rng(scenario.master_seed, static_cast<std::uint64_t>(scenario.scenario_id),
                  static_cast<std::uint64_t>(replicate_id));
    Cohort cohort = make_cohort(scenario.setting, scenario.n, scenario.dgp, rng);
    const long n = cohort.n();

    CensorPlan plan{CensorDist::none, 0.0, 0.0, scenario.dgp.eta};
    Eigen::VectorXd p_true = Eigen::VectorXd::Ones(n);
    if (scenario.censor_dist != CensorDist::none) {
      std::vector<double> taus(n);
      for (long i = 0; i < n; ++i)
        taus[i] = tau_of(cohort.lp[i], scenario.dgp.lambda, scenario.dgp.eta);
      const double theta = solve_theta(taus, scenario.censor_rate, scenario.dgp.eta,
                                       scenario.censor_dist, scenario.theta_method);
      plan = CensorPlan{scenario.censor_dist, theta, scenario.censor_rate, scenario.dgp.eta};
      out.theta = theta;
      apply_censoring(cohort, draw_censoring(plan, n, rng));
      for (long i = 0; i < n; ++i) p_true[i] = true_event_prob(taus[i], plan);
    }
    long events = 0;
    for (int d : cohort.D) events += d;
    out.realized_censoring = 1.0 - static_cast<double>(events) / static_cast<double>(n);

    // PS weights; in the counterfactual setting the PS is constant and both
    // IPTW and PSM reduce to unit weights
    Eigen::VectorXd w_iptw, w_psm;
    if (scenario.setting == Setting::counterfactual) {
      w_iptw = Eigen::VectorXd::Ones(n);
      w_psm = Eigen::VectorXd::Ones(n);
    } else {
      const Eigen::VectorXd ps = fit_ps(cohort);
      w_iptw = iptw_weights(ps, cohort.Z);
      const FullMatchResult match = full_match(ps, cohort.Z);
      w_psm = full_match_weights(match, cohort.Z);
    }
    const Eigen::VectorXd p_est = fit_event_prob(cohort);

    std::array<Eigen::VectorXd, 6> weights;
    weights[0] = w_iptw;
    weights[1] = pe_modify(w_iptw, p_true);
    weights[2] = pe_modify(w_iptw, p_est);
    weights[3] = w_psm;
    weights[4] = pe_modify(w_psm, p_true);
    weights[5] = pe_modify(w_psm, p_est);

    Eigen::MatrixXd zmat(n, 1);
    for (long i = 0; i < n; ++i) zmat(i, 0) = cohort.Z[i];
    CoxOptions opt;
    opt.ties = scenario.ties;

    for (std::size_t m = 0; m < weights.size(); ++m) {
      const CoxEstimate est = cox_weighted(cohort.T, cohort.D, zmat, weights[m], opt);
      auto& rec = out.records[m];
      rec.converged = est.converged;
      if (!est.converged) {
        out.failed = true;
        out.fail_reason = std::string(method_name(rec.method)) + " fit did not converge";
        continue;
      }
      rec.mhr_hat = std::exp(est.log_hr[0]);
      const HrInterval ci = wald_ci(est, 0.95);
      rec.ci_lo = ci.lo;
      rec.ci_hi = ci.hi;
    }
  } catch (const std::exception& e) {
    out.failed = true;
    out.fail_reason = e.what();
  }
  return out;
}

MethodMetrics summarize(const std::vector<double>& mhr_estimates,
                        const std::vector<std::pair<double, double>>& cis, double true_mhr) {
  const auto r = static_cast<long>(mhr_estimates.size());
  if (r < 2) throw std::invalid_argument("summarize: need at least 2 estimates");
  if (cis.size() != mhr_estimates.size())
    throw std::invalid_argument("summarize: ci count mismatch");

  MethodMetrics m;
  m.n_used = r;
  double sum = 0.0;
  for (double v : mhr_estimates) sum += v;
  m.mhr_bar = sum / static_cast<double>(r);
  m.bias = m.mhr_bar - true_mhr;

  double ss = 0.0;
  for (double v : mhr_estimates) ss += (v - m.mhr_bar) * (v - m.mhr_bar);
  m.sd = std::sqrt(ss / static_cast<double>(r - 1));
  m.rmse = std::sqrt(m.bias * m.bias + m.sd * m.sd);
  m.rel_bias = m.bias / true_mhr;

  long covered = 0;
  for (const auto& [lo, hi] : cis) covered += (lo <= true_mhr && true_mhr <= hi) ? 1 : 0;
  m.coverage = static_cast<double>(covered) / static_cast<double>(r);
  return m;
}

std::vector<Scenario> grid_expand(const GridSpec& spec) {
  if (spec.settings.empty() || spec.sample_sizes.empty() || spec.mhrs.empty() ||
      spec.censor_dists.empty() || spec.censor_rates.empty())
    throw std::invalid_argument("grid_expand: empty factor list");

  std::vector<Scenario> out;
  int id = 0;
  auto push = [&](Setting setting, long n, double mhr, CensorDist dist, double rate) {
    Scenario s;
    s.setting = setting;
    s.n = n;
    s.target_mhr = mhr;
    s.censor_dist = dist;
    s.censor_rate = rate;
    s.replicates = spec.replicates;
    s.master_seed = spec.master_seed;
    s.scenario_id = id++;
    s.dgp = spec.dgp;
    s.theta_method = spec.theta_method;
    s.ties = spec.ties;
    validate_scenario(s);
    out.push_back(std::move(s));
  };

  for (Setting setting : spec.settings)
    for (long n : spec.sample_sizes)
      for (double mhr : spec.mhrs) {
        bool zero_done = false;
        for (CensorDist dist : spec.censor_dists)
          for (double rate : spec.censor_rates) {
            if (rate == 0.0) {
              if (!zero_done) push(setting, n, mhr, CensorDist::none, 0.0);
              zero_done = true;
            } else {
              push(setting, n, mhr, dist, rate);
            }
          }
      }
  return out;
}

ScenarioMetrics run_scenario(const Scenario& scenario, int threads,
                             std::vector<ReplicateResult>* replicates_out) {
  validate_scenario(scenario);
  const long r = scenario.replicates;
  std::vector<ReplicateResult> results(r);

  int nthreads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  nthreads = std::max(1, std::min<int>(nthreads, static_cast<int>(r)));

  if (nthreads == 1) {
    for (long i = 0; i < r; ++i) results[i] = run_replicate(scenario, i);
  } else {
    std::atomic<long> next{0};
    auto worker = [&] {
      for (;;) {
        const long i = next.fetch_add(1);
        if (i >= r) return;
        results[i] = run_replicate(scenario, i);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ScenarioMetrics sm;
  for (const auto& res : results) sm.n_failed += res.failed ? 1 : 0;
  if (2 * sm.n_failed > r) sm.usable = false;

  for (std::size_t m = 0; m < kAllMethods.size(); ++m) {
    std::vector<double> est;
    std::vector<std::pair<double, double>> cis;
    est.reserve(r);
    cis.reserve(r);
    for (const auto& res : results) {
      if (res.failed) continue;
      est.push_back(res.records[m].mhr_hat);
      cis.emplace_back(res.records[m].ci_lo, res.records[m].ci_hi);
    }
    if (est.size() >= 2) {
      sm.per_method[m] = summarize(est, cis, scenario.target_mhr);
    } else {
      sm.usable = false;
    }
  }
  if (replicates_out) *replicates_out = std::move(results);
  return sm;
}

}  // namespace mhrsim
