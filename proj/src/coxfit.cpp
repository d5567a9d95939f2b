#include "mhrsim/coxfit.hpp"

#include "mhrsim/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mhrsim {

namespace {

struct EventGroup {
  double time;
  long first;  // offset into the descending order array
  long count;  // subjects sharing this time (events and censorings)
  long d;      // events at this time
};

// Accumulated per event time during the final pass, for score residuals.
struct EventTimeSums {
  double time = 0.0;
  double a = 0.0;           // sum_k dLambda_k
  Eigen::VectorXd b;        // sum_k dLambda_k * xbar_k
  double a_event = 0.0;     // sum_k (1 - k/d) dLambda_k
  Eigen::VectorXd b_event;  // sum_k (1 - k/d) dLambda_k * xbar_k
  Eigen::VectorXd mean_xbar;
};

struct LikResult {
  double loglik;
  Eigen::VectorXd score;
  Eigen::MatrixXd info;
};

// One descending sweep over the risk sets. When `times_out` is non-null the
// per-event-time aggregates needed for score residuals are recorded.
LikResult partial_lik(const Eigen::MatrixXd& x, const Eigen::VectorXd& eta,
                      const Eigen::VectorXd& weights, const std::vector<int>& status,
                      const std::vector<long>& ord, const std::vector<EventGroup>& groups,
                      Ties ties, std::vector<EventTimeSums>* times_out) {
  const Eigen::Index q = x.cols();
  LikResult res{0.0, Eigen::VectorXd::Zero(q), Eigen::MatrixXd::Zero(q, q)};

  // compensated summation: at millions of rows the plain running sum carries
  // enough rounding noise to confuse the step-halving comparison
  double comp = 0.0;
  auto add_ll = [&](double v) {
    const double y = v - comp;
    const double t = res.loglik + y;
    comp = (t - res.loglik) - y;
    res.loglik = t;
  };
  Eigen::VectorXd score_comp = Eigen::VectorXd::Zero(q);
  auto add_score = [&](const Eigen::VectorXd& v) {
    for (Eigen::Index j = 0; j < q; ++j) {
      const double y = v[j] - score_comp[j];
      const double t = res.score[j] + y;
      score_comp[j] = (t - res.score[j]) - y;
      res.score[j] = t;
    }
  };

  const Eigen::VectorXd riskw = (weights.array() * eta.array().exp()).matrix();

  // the risk sums also get compensated adds: their drift re-enters the score
  // through xbar and sets the reachable score floor on large cohorts
  double s0 = 0.0, s0_comp = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(q), s1_comp = Eigen::VectorXd::Zero(q);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(q, q);

  auto add_risk = [&](double rw, const Eigen::RowVectorXd& xi) {
    double y = rw - s0_comp;
    double t = s0 + y;
    s0_comp = (t - s0) - y;
    s0 = t;
    for (Eigen::Index j = 0; j < q; ++j) {
      y = rw * xi[j] - s1_comp[j];
      t = s1[j] + y;
      s1_comp[j] = (t - s1[j]) - y;
      s1[j] = t;
    }
  };

  Eigen::VectorXd s1e(q), xb(q), sum_wx(q);

  for (const auto& g : groups) {
    // everyone tied at this time enters the risk set before events are scored
    double s0e = 0.0;
    s1e.setZero();
    Eigen::MatrixXd s2e = Eigen::MatrixXd::Zero(q, q);
    double sum_w = 0.0, sum_weta = 0.0;
    sum_wx.setZero();
    for (long k = 0; k < g.count; ++k) {
      const long i = ord[g.first + k];
      const double rw = riskw[i];
      add_risk(rw, x.row(i));
      s2.noalias() += rw * (x.row(i).transpose() * x.row(i));
      if (status[i]) {
        sum_w += weights[i];
        sum_weta += weights[i] * eta[i];
        sum_wx.noalias() += weights[i] * x.row(i).transpose();
        s0e += rw;
        s1e.noalias() += rw * x.row(i).transpose();
        s2e.noalias() += rw * (x.row(i).transpose() * x.row(i));
      }
    }
    if (g.d == 0) continue;

    add_ll(sum_weta);
    add_score(sum_wx);

    EventTimeSums ts;
    if (times_out) {
      ts.time = g.time;
      ts.a = 0.0;
      ts.b = Eigen::VectorXd::Zero(q);
      ts.a_event = 0.0;
      ts.b_event = Eigen::VectorXd::Zero(q);
      ts.mean_xbar = Eigen::VectorXd::Zero(q);
    }

    if (ties == Ties::breslow || g.d == 1) {
      xb = s1 / s0;
      add_ll(-sum_w * std::log(s0));
      add_score(-sum_w * xb);
      res.info.noalias() += sum_w * (s2 / s0 - xb * xb.transpose());
      if (times_out) {
        const double dl = sum_w / s0;
        ts.a = dl;
        ts.b = dl * xb;
        ts.a_event = dl;
        ts.b_event = ts.b;
        ts.mean_xbar = xb;
      }
    } else {
      const double wtave = sum_w / static_cast<double>(g.d);
      for (long k = 0; k < g.d; ++k) {
        const double f = static_cast<double>(k) / static_cast<double>(g.d);
        const double s0k = s0 - f * s0e;
        xb = (s1 - f * s1e) / s0k;
        add_ll(-wtave * std::log(s0k));
        add_score(-wtave * xb);
        res.info.noalias() += wtave * ((s2 - f * s2e) / s0k - xb * xb.transpose());
        if (times_out) {
          const double dl = wtave / s0k;
          ts.a += dl;
          ts.b.noalias() += dl * xb;
          ts.a_event += (1.0 - f) * dl;
          ts.b_event.noalias() += (1.0 - f) * dl * xb;
          ts.mean_xbar.noalias() += xb / static_cast<double>(g.d);
        }
      }
    }
    if (times_out) times_out->push_back(std::move(ts));
  }
  return res;
}

std::vector<long> time_order(const Eigen::VectorXd& time) {
  std::vector<long> ord(time.size());
  std::iota(ord.begin(), ord.end(), 0);
  std::sort(ord.begin(), ord.end(), [&](long a, long b) {
    if (time[a] != time[b]) return time[a] > time[b];
    return a < b;
  });
  return ord;
}

std::vector<EventGroup> tie_groups(const Eigen::VectorXd& time, const std::vector<int>& status,
                                   const std::vector<long>& ord) {
  std::vector<EventGroup> groups;
  const long n = static_cast<long>(ord.size());
  for (long i = 0; i < n;) {
    long j = i;
    long d = 0;
    while (j < n && time[ord[j]] == time[ord[i]]) {
      d += status[ord[j]] ? 1 : 0;
      ++j;
    }
    groups.push_back({time[ord[i]], i, j - i, d});
    i = j;
  }
  return groups;
}

}  // namespace

CoxDerivatives cox_loglik(const Eigen::VectorXd& time, const std::vector<int>& status,
                          const Eigen::MatrixXd& covars, const Eigen::VectorXd& weights,
                          const Eigen::VectorXd& beta, Ties ties) {
  if (beta.size() != covars.cols()) throw std::invalid_argument("cox_loglik: beta size mismatch");
  const std::vector<long> ord = time_order(time);
  const std::vector<EventGroup> groups = tie_groups(time, status, ord);
  const Eigen::VectorXd eta = covars * beta;
  const LikResult r = partial_lik(covars, eta, weights, status, ord, groups, ties, nullptr);
  return {r.loglik, r.score, r.info};
}

CoxEstimate cox_weighted(const Eigen::VectorXd& time, const std::vector<int>& status,
                         const Eigen::MatrixXd& covars, const Eigen::VectorXd& weights,
                         const CoxOptions& opt) {
  const Eigen::Index n = time.size();
  const Eigen::Index q = covars.cols();
  if (n < 2) throw std::invalid_argument("cox_weighted: need at least 2 subjects");
  if (static_cast<Eigen::Index>(status.size()) != n || covars.rows() != n ||
      weights.size() != n)
    throw std::invalid_argument("cox_weighted: input length mismatch");
  long n_events = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(weights[i] > 0.0)) throw std::invalid_argument("cox_weighted: weights must be > 0");
    n_events += status[i] ? 1 : 0;
  }
  if (n_events == 0) throw std::invalid_argument("cox_weighted: no events");

  // centering keeps exp(eta) in range; estimates are shift-invariant
  Eigen::MatrixXd x = covars;
  const Eigen::RowVectorXd center = x.colwise().mean();
  x.rowwise() -= center;

  const std::vector<long> ord = time_order(time);
  const std::vector<EventGroup> groups = tie_groups(time, status, ord);

  CoxEstimate est;
  est.ties = opt.ties;
  est.n_events = n_events;
  est.log_hr = Eigen::VectorXd::Zero(q);

  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  LikResult cur = partial_lik(x, eta, weights, status, ord, groups, opt.ties, nullptr);
  est.loglik = cur.loglik;
  Eigen::MatrixXd last_info = cur.info;

  for (int iter = 1; iter <= opt.max_iter; ++iter) {
    est.iterations = iter;
    est.max_abs_score = cur.score.lpNorm<Eigen::Infinity>();
    if (est.max_abs_score < opt.tol) {
      est.converged = true;
      break;
    }
    const Eigen::VectorXd delta = cur.info.ldlt().solve(cur.score);
    if (!delta.allFinite()) {
      est.diverged = true;
      break;
    }

    double step = 1.0;
    Eigen::VectorXd beta_new;
    LikResult next;
    bool improved = false;
    for (int h = 0; h < 30; ++h) {
      beta_new = est.log_hr + step * delta;
      eta = x * beta_new;
      next = partial_lik(x, eta, weights, status, ord, groups, opt.ties, nullptr);
      if (std::isfinite(next.loglik) &&
          next.loglik >= cur.loglik - opt.rel_ll_tol * std::abs(cur.loglik)) {
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;  // stalled short of the score tolerance

    est.log_hr = beta_new;
    cur = std::move(next);
    est.loglik = cur.loglik;
    last_info = cur.info;

    // monotone likelihood walks the coefficient off to infinity while the
    // score decays; 15 on the log-HR scale is far past any plausible fit
    if (est.log_hr.lpNorm<Eigen::Infinity>() > 15.0) {
      est.diverged = true;
      break;
    }
  }
  if (!est.converged && !est.diverged) {
    est.max_abs_score = cur.score.lpNorm<Eigen::Infinity>();
    est.converged = est.max_abs_score < opt.tol;
  }

  const Eigen::MatrixXd info_inv =
      last_info.ldlt().solve(Eigen::MatrixXd::Identity(q, q));
  est.naive_se = info_inv.diagonal().cwiseMax(0.0).cwiseSqrt();

  if (opt.robust && est.converged) {
    // weighted score residuals, sub-risk sets centered per tie method
    eta = x * est.log_hr;
    std::vector<EventTimeSums> etimes;
    partial_lik(x, eta, weights, status, ord, groups, opt.ties, &etimes);
    std::reverse(etimes.begin(), etimes.end());  // ascending in time

    std::vector<double> cum_a(etimes.size() + 1, 0.0);
    std::vector<Eigen::VectorXd> cum_b(etimes.size() + 1, Eigen::VectorXd::Zero(q));
    for (std::size_t j = 0; j < etimes.size(); ++j) {
      cum_a[j + 1] = cum_a[j] + etimes[j].a;
      cum_b[j + 1] = cum_b[j] + etimes[j].b;
    }

    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(q, q);
    Eigen::VectorXd r(q);
    for (Eigen::Index i = 0; i < n; ++i) {
      // last event time <= T_i
      const auto it = std::upper_bound(
          etimes.begin(), etimes.end(), time[i],
          [](double t, const EventTimeSums& e) { return t < e.time; });
      const auto j = static_cast<std::size_t>(it - etimes.begin());
      const double expeta = std::exp(eta[i]);
      if (status[i]) {
        const EventTimeSums& own = etimes[j - 1];  // T_i is an event time
        r = x.row(i).transpose() - own.mean_xbar;
        r.noalias() -=
            expeta * ((cum_a[j - 1] + own.a_event) * x.row(i).transpose() -
                      (cum_b[j - 1] + own.b_event));
      } else {
        r = -expeta * (cum_a[j] * x.row(i).transpose() - cum_b[j]);
      }
      r *= weights[i];
      meat.noalias() += r * r.transpose();
    }
    const Eigen::MatrixXd robust = info_inv * meat * info_inv;
    est.robust_se = robust.diagonal().cwiseMax(0.0).cwiseSqrt();
  } else {
    est.robust_se = Eigen::VectorXd::Constant(q, std::numeric_limits<double>::quiet_NaN());
  }
  return est;
}

HrInterval wald_ci(const CoxEstimate& est, double level, int coef_index) {
  if (!est.converged) throw std::runtime_error("wald_ci: estimate did not converge");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("wald_ci: bad level");
  const double z = normal_quantile(0.5 + level / 2.0);
  const double b = est.log_hr[coef_index];
  const double se = est.robust_se[coef_index];
  return {std::exp(b - z * se), std::exp(b + z * se)};
}

std::vector<HrCurvePoint> hr_curve(const Eigen::VectorXd& time, const std::vector<int>& status,
                                   const std::vector<int>& treatment, const Eigen::MatrixXd& X,
                                   const Eigen::VectorXd& weights, const std::vector<double>& grid,
                                   CurveMode mode, CurveAxis axis, const CoxOptions& opt) {
  const Eigen::Index n = time.size();
  if (n == 0 || grid.empty()) throw std::invalid_argument("hr_curve: empty input");
  for (double qf : grid) {
    if (!(qf > 0.0 && qf <= 1.0)) throw std::invalid_argument("hr_curve: fractions must be in (0,1]");
  }

  std::vector<double> marks;
  marks.reserve(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (axis == CurveAxis::resolved_fraction || status[i]) marks.push_back(time[i]);
  }
  std::sort(marks.begin(), marks.end());

  Eigen::MatrixXd design;
  if (mode == CurveMode::marginal) {
    design.resize(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) design(i, 0) = treatment[i];
  } else {
    design.resize(n, 1 + X.cols());
    for (Eigen::Index i = 0; i < n; ++i) design(i, 0) = treatment[i];
    design.rightCols(X.cols()) = X;
  }

  CoxOptions fit_opt = opt;
  fit_opt.robust = false;

  std::vector<HrCurvePoint> out;
  out.reserve(grid.size());
  Eigen::VectorXd t_cut(n);
  std::vector<int> d_cut(n);
  for (double qf : grid) {
    HrCurvePoint pt;
    pt.fraction = qf;
    const auto k = static_cast<long>(std::ceil(qf * static_cast<double>(n) - 1e-9));
    const long need = std::max<long>(k, 1);
    if (need > static_cast<long>(marks.size())) {
      out.push_back(pt);  // unreachable fraction
      continue;
    }
    const double tq = marks[need - 1];
    for (Eigen::Index i = 0; i < n; ++i) {
      if (time[i] <= tq) {
        t_cut[i] = time[i];
        d_cut[i] = status[i];
      } else {
        t_cut[i] = tq;
        d_cut[i] = 0;
      }
    }
    try {
      const CoxEstimate est = cox_weighted(t_cut, d_cut, design, weights, fit_opt);
      if (est.converged) {
        pt.hr = std::exp(est.log_hr[0]);
        pt.ok = true;
      }
    } catch (const std::exception&) {
      // leave the point flagged as not ok
    }
    out.push_back(pt);
  }
  return out;
}

}  // namespace mhrsim
