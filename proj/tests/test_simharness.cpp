#include "mhrsim/simharness.hpp"

#include <doctest.h>

#include <cmath>

using namespace mhrsim;

namespace {

Scenario basic_scenario(Setting setting, long n, double mhr, double alpha_star,
                        CensorDist dist, double rate, long replicates) {
  Scenario s;
  s.setting = setting;
  s.n = n;
  s.target_mhr = mhr;
  s.censor_dist = dist;
  s.censor_rate = rate;
  s.replicates = replicates;
  s.master_seed = 20240801;
  s.scenario_id = 7;
  s.dgp = DgpParams::defaults();
  s.dgp.alpha_star = alpha_star;
  s.dgp.alpha = std::log(mhr);
  return s;
}

}  // namespace

TEST_CASE("summarize hand-checked arithmetic") {
  const std::vector<std::pair<double, double>> cis = {
      {1.5, 2.5}, {1.5, 2.5}, {2.2, 2.8}};
  const MethodMetrics m = summarize({1.9, 2.0, 2.1}, cis, 2.0);
  CHECK(m.mhr_bar == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(m.bias == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(m.sd == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(m.rmse == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(m.rel_bias == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(m.coverage == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  // the appendix arithmetic: bias 0.14 with sd 0.05 gives rmse 0.1487
  const MethodMetrics t = summarize({2.09, 2.14, 2.19}, cis, 2.0);
  CHECK(t.bias == doctest::Approx(0.14).epsilon(1e-12));
  CHECK(t.sd == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(t.rmse == doctest::Approx(std::sqrt(0.14 * 0.14 + 0.05 * 0.05)).epsilon(1e-12));
  CHECK(t.rmse * t.rmse - (t.bias * t.bias + t.sd * t.sd) < 1e-12);

  const MethodMetrics z = summarize({2.0, 2.0, 2.0}, cis, 2.0);
  CHECK(z.bias == 0.0);
  CHECK(z.sd == 0.0);

  CHECK_THROWS(summarize({2.0}, {{1.0, 3.0}}, 2.0));
}

TEST_CASE("run_replicate is deterministic and records all six methods") {
  const Scenario s =
      basic_scenario(Setting::counterfactual, 400, 1.0, 0.0, CensorDist::uniform, 0.4, 1);
  const ReplicateResult a = run_replicate(s, 3);
  const ReplicateResult b = run_replicate(s, 3);
  REQUIRE_FALSE(a.failed);
  for (int m = 0; m < 6; ++m) {
    CHECK(a.records[m].mhr_hat == b.records[m].mhr_hat);
    CHECK(a.records[m].ci_lo == b.records[m].ci_lo);
    CHECK(a.records[m].ci_hi == b.records[m].ci_hi);
    CHECK(a.records[m].converged);
  }
  CHECK(a.theta == b.theta);
  CHECK(std::abs(a.realized_censoring - 0.4) < 0.1);

  const ReplicateResult c = run_replicate(s, 4);
  CHECK(c.records[0].mhr_hat != a.records[0].mhr_hat);
}

TEST_CASE("uncensored counterfactual: IPTW record equals the unweighted fit") {
  const Scenario s =
      basic_scenario(Setting::counterfactual, 600, 1.0, 0.0, CensorDist::none, 0.0, 1);
  const ReplicateResult r = run_replicate(s, 11);
  REQUIRE_FALSE(r.failed);

  RngStream rng(s.master_seed, s.scenario_id, 11);
  const Cohort cohort = make_cohort(s.setting, s.n, s.dgp, rng);
  Eigen::MatrixXd z(cohort.n(), 1);
  for (long i = 0; i < cohort.n(); ++i) z(i, 0) = cohort.Z[i];
  const CoxEstimate est =
      cox_weighted(cohort.T, cohort.D, z, Eigen::VectorXd::Ones(cohort.n()));
  REQUIRE(est.converged);
  CHECK(r.records[0].mhr_hat == std::exp(est.log_hr[0]));

  // IPTW and PSM coincide replicate-by-replicate in the counterfactual setting
  CHECK(r.records[0].mhr_hat == r.records[3].mhr_hat);
  CHECK(r.records[1].mhr_hat == r.records[4].mhr_hat);
  CHECK(r.records[2].mhr_hat == r.records[5].mhr_hat);
}

TEST_CASE("run_replicate reports failures instead of throwing") {
  Scenario s =
      basic_scenario(Setting::counterfactual, 400, 1.0, 0.0, CensorDist::uniform, 0.4, 1);
  s.dgp.alpha_star = std::numeric_limits<double>::quiet_NaN();
  const ReplicateResult r = run_replicate(s, 0);
  CHECK(r.failed);
  CHECK_FALSE(r.fail_reason.empty());
}

TEST_CASE("grid_expand produces the full factorial grid") {
  GridSpec g;
  g.settings = {Setting::counterfactual};
  g.sample_sizes = {2000, 6000, 10000};
  g.mhrs = {0.5, 0.8, 1.0, 1.25, 2.0};
  g.censor_dists = {CensorDist::uniform, CensorDist::weibull};
  g.censor_rates = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  g.replicates = 2;
  const std::vector<Scenario> grid = grid_expand(g);
  CHECK(grid.size() == 270);
  for (std::size_t i = 0; i < grid.size(); ++i)
    CHECK(grid[i].scenario_id == static_cast<int>(i));

  // ids are stable across re-expansion
  const std::vector<Scenario> again = grid_expand(g);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(again[i].n == grid[i].n);
    CHECK(again[i].target_mhr == grid[i].target_mhr);
    CHECK(again[i].censor_rate == grid[i].censor_rate);
    CHECK(again[i].censor_dist == grid[i].censor_dist);
  }

  GridSpec one;
  one.settings = {Setting::observational};
  one.sample_sizes = {500};
  one.mhrs = {1.0};
  one.censor_dists = {CensorDist::uniform};
  one.censor_rates = {0.3};
  CHECK(grid_expand(one).size() == 1);

  // censoring rate 0 collapses to dist none once, not per distribution
  GridSpec zero = one;
  zero.censor_rates = {0.0, 0.3};
  zero.censor_dists = {CensorDist::uniform, CensorDist::weibull};
  const auto zg = grid_expand(zero);
  CHECK(zg.size() == 3);
  CHECK(zg[0].censor_dist == CensorDist::none);

  GridSpec empty = one;
  empty.mhrs = {};
  CHECK_THROWS(grid_expand(empty));
}

TEST_CASE("run_scenario aggregates and parallel equals serial") {
  Scenario s =
      basic_scenario(Setting::counterfactual, 300, 1.0, 0.0, CensorDist::uniform, 0.3, 8);

  std::vector<ReplicateResult> serial_reps, parallel_reps;
  const ScenarioMetrics serial = run_scenario(s, 1, &serial_reps);
  const ScenarioMetrics parallel = run_scenario(s, 2, &parallel_reps);

  CHECK(serial.n_failed == 0);
  CHECK(serial.usable);
  for (int m = 0; m < 6; ++m) {
    CHECK(serial.per_method[m].bias == parallel.per_method[m].bias);
    CHECK(serial.per_method[m].sd == parallel.per_method[m].sd);
    CHECK(serial.per_method[m].coverage == parallel.per_method[m].coverage);
    CHECK(serial.per_method[m].n_used == 8);

    const auto& mm = serial.per_method[m];
    CHECK(std::abs(mm.rmse * mm.rmse - mm.bias * mm.bias - mm.sd * mm.sd) < 1e-12);
    CHECK(mm.coverage >= 0.0);
    CHECK(mm.coverage <= 1.0);
  }
  for (long i = 0; i < 8; ++i)
    CHECK(serial_reps[i].records[0].mhr_hat == parallel_reps[i].records[0].mhr_hat);

  // degenerate two-replicate run still reports
  s.replicates = 2;
  const ScenarioMetrics tiny = run_scenario(s, 1);
  CHECK(tiny.per_method[0].n_used == 2);
}

TEST_CASE("scenario validation rejects bad cells") {
  Scenario s =
      basic_scenario(Setting::counterfactual, 300, 1.0, 0.0, CensorDist::uniform, 0.3, 4);
  Scenario bad = s;
  bad.censor_rate = 0.99;
  CHECK_THROWS(validate_scenario(bad));
  bad = s;
  bad.censor_rate = 0.0;  // dist stays uniform
  CHECK_THROWS(validate_scenario(bad));
  bad = s;
  bad.censor_dist = CensorDist::none;  // rate stays 0.3
  CHECK_THROWS(validate_scenario(bad));
  bad = s;
  bad.replicates = 0;
  CHECK_THROWS(validate_scenario(bad));
  bad = s;
  bad.n = 301;
  CHECK_THROWS(validate_scenario(bad));
}
