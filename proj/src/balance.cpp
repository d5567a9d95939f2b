#include "mhrsim/balance.hpp"

#include "mhrsim/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>

namespace mhrsim {

const char* method_name(Method m) {
  switch (m) {
    case Method::IPTW: return "IPTW";
    case Method::IPTW_PEW1: return "IPTW_PEW1";
    case Method::IPTW_PEW2: return "IPTW_PEW2";
    case Method::PSM: return "PSM";
    case Method::PSM_PEW1: return "PSM_PEW1";
    case Method::PSM_PEW2: return "PSM_PEW2";
  }
  return "?";
}

namespace {

constexpr double kProbClip = 1e-6;

Eigen::VectorXd clipped_probs(const Eigen::MatrixXd& design, const Eigen::VectorXd& coef) {
  const Eigen::VectorXd eta = design * coef;
  Eigen::VectorXd p = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
  return p.cwiseMax(kProbClip).cwiseMin(1.0 - kProbClip);
}

}  // namespace

Eigen::VectorXd fit_ps(const Cohort& cohort) {
  const long n = cohort.n();
  long nt = 0;
  for (int z : cohort.Z) nt += z;
  if (nt == 0 || nt == n)
    throw std::invalid_argument("fit_ps: need both treatment groups present");

  Eigen::MatrixXd design(n, 1 + kNumCovariates);
  design.col(0).setOnes();
  design.rightCols(kNumCovariates) = cohort.X;
  Eigen::VectorXd z(n);
  for (long i = 0; i < n; ++i) z[i] = cohort.Z[i];

  const GlmFit fit = logistic_irls(design, z);
  if (!fit.converged) throw std::runtime_error("fit_ps: PS model did not converge");
  return clipped_probs(design, fit.coef);
}

Eigen::VectorXd iptw_weights(const Eigen::VectorXd& ps, const std::vector<int>& Z) {
  if (ps.size() != static_cast<Eigen::Index>(Z.size()))
    throw std::invalid_argument("iptw_weights: length mismatch");
  Eigen::VectorXd w(ps.size());
  for (Eigen::Index i = 0; i < ps.size(); ++i) {
    if (!(ps[i] > 0.0 && ps[i] < 1.0))
      throw std::invalid_argument("iptw_weights: ps must lie in (0,1)");
    w[i] = Z[i] ? 1.0 / ps[i] : 1.0 / (1.0 - ps[i]);
  }
  return w;
}

namespace {

// Min-cost-flow machinery for the matching step of full_match. The
// minimum-weight edge cover behind optimal full matching reduces to a
// free-size min-cost bipartite matching over reduced costs
//   d~(t,c) = d(t,c) - m(t) - m(c),
// m(v) being the distance from v to its nearest opposite-group PS. Only
// arcs with d~ <= 0 can appear in an optimal matching, which keeps the
// network sparse for continuous PS data.
struct FlowGraph {
  struct Arc {
    int to;
    int cap;
    double cost;
    int rev;  // index of the reverse arc in adj[to]
  };
  std::vector<std::vector<Arc>> adj;
  explicit FlowGraph(int n) : adj(n) {}

  void add(int u, int v, int cap, double cost) {
    adj[u].push_back({v, cap, cost, static_cast<int>(adj[v].size())});
    adj[v].push_back({u, 0, -cost, static_cast<int>(adj[u].size()) - 1});
  }
};

// Successive shortest augmenting paths with Johnson potentials; augments
// while the marginal path cost stays negative.
void min_cost_matching(FlowGraph& g, int src, int sink) {
  const int n = static_cast<int>(g.adj.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> pot(n, 0.0);

  // initial potentials on the layered source->treated->control->sink DAG
  {
    std::vector<double> dist(n, inf);
    dist[src] = 0.0;
    // relax in layer order: arcs only point forward before any flow exists
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::swap(order[0], order[src]);
    for (int pass = 0; pass < 3; ++pass) {  // three layers deep
      for (int u : order) {
        if (dist[u] == inf) continue;
        for (const auto& a : g.adj[u]) {
          if (a.cap > 0 && dist[u] + a.cost < dist[a.to]) dist[a.to] = dist[u] + a.cost;
        }
      }
    }
    for (int v = 0; v < n; ++v) pot[v] = dist[v] == inf ? 0.0 : dist[v];
  }

  std::vector<double> dist(n);
  std::vector<int> prev_node(n), prev_arc(n);
  using Item = std::pair<double, int>;
  while (true) {
    std::fill(dist.begin(), dist.end(), inf);
    dist[src] = 0.0;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    heap.push({0.0, src});
    while (!heap.empty()) {
      const auto [d, u] = heap.top();
      heap.pop();
      if (d > dist[u]) continue;
      for (std::size_t k = 0; k < g.adj[u].size(); ++k) {
        const auto& a = g.adj[u][k];
        if (a.cap <= 0) continue;
        const double rc = std::max(0.0, a.cost + pot[u] - pot[a.to]);
        if (dist[u] + rc < dist[a.to]) {
          dist[a.to] = dist[u] + rc;
          prev_node[a.to] = u;
          prev_arc[a.to] = static_cast<int>(k);
          heap.push({dist[a.to], a.to});
        }
      }
    }
    if (dist[sink] == inf) break;
    const double path_cost = dist[sink] + pot[sink] - pot[src];
    if (!(path_cost < 0.0)) break;
    for (int v = 0; v < n; ++v) {
      if (dist[v] < inf) pot[v] += dist[v];
    }
    for (int v = sink; v != src; v = prev_node[v]) {
      auto& a = g.adj[prev_node[v]][prev_arc[v]];
      a.cap -= 1;
      g.adj[v][a.rev].cap += 1;
    }
  }
}

struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

FullMatchResult full_match(const Eigen::VectorXd& ps, const std::vector<int>& Z) {
  const long n = ps.size();
  if (n != static_cast<long>(Z.size())) throw std::invalid_argument("full_match: length mismatch");
  std::vector<int> tidx, cidx;
  for (long i = 0; i < n; ++i) (Z[i] ? tidx : cidx).push_back(static_cast<int>(i));
  const int nt = static_cast<int>(tidx.size());
  const int nc = static_cast<int>(cidx.size());
  if (nt == 0 || nc == 0) throw std::invalid_argument("full_match: a treatment group is empty");

  auto by_ps = [&](int a, int b) { return ps[a] != ps[b] ? ps[a] < ps[b] : a < b; };
  std::sort(tidx.begin(), tidx.end(), by_ps);
  std::sort(cidx.begin(), cidx.end(), by_ps);
  std::vector<double> tp(nt), cp(nc);
  for (int a = 0; a < nt; ++a) tp[a] = ps[tidx[a]];
  for (int b = 0; b < nc; ++b) cp[b] = ps[cidx[b]];

  // nearest opposite neighbour (distance + sorted position), index tie-broken
  auto nearest = [](const std::vector<double>& own, int a, const std::vector<double>& opp,
                    const std::vector<int>& opp_idx) {
    const auto it = std::lower_bound(opp.begin(), opp.end(), own[a]);
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (int k : {static_cast<int>(it - opp.begin()) - 1, static_cast<int>(it - opp.begin())}) {
      if (k < 0 || k >= static_cast<int>(opp.size())) continue;
      const double d = std::abs(own[a] - opp[k]);
      if (d < bd || (d == bd && best >= 0 && opp_idx[k] < opp_idx[best])) {
        bd = d;
        best = k;
      }
    }
    return std::pair<int, double>{best, bd};
  };
  std::vector<double> mt(nt), mc(nc);
  std::vector<int> near_t(nt), near_c(nc);
  for (int a = 0; a < nt; ++a) std::tie(near_t[a], mt[a]) = nearest(tp, a, cp, cidx);
  for (int b = 0; b < nc; ++b) std::tie(near_c[b], mc[b]) = nearest(cp, b, tp, tidx);

  struct Edge {
    int t, c;  // subject indices
    double cost;
  };
  std::vector<Edge> cover;

  const double span = std::max(tp.back(), cp.back()) - std::min(tp.front(), cp.front());
  if (span == 0.0) {
    // all PS identical: any pairing is optimal at zero distance
    for (int k = 0; k < std::max(nt, nc); ++k)
      cover.push_back({tidx[std::min(k, nt - 1)], cidx[std::min(k, nc - 1)], 0.0});
  } else {
    // candidate arcs with nonpositive reduced cost, via prefix/suffix max
    // of mc so each walk stops as soon as no further pair can qualify
    std::vector<double> pref(nc), suf(nc);
    pref[0] = mc[0];
    for (int b = 1; b < nc; ++b) pref[b] = std::max(pref[b - 1], mc[b]);
    suf[nc - 1] = mc[nc - 1];
    for (int b = nc - 2; b >= 0; --b) suf[b] = std::max(suf[b + 1], mc[b]);

    struct Cand {
      int a, b;
      double d;
    };
    std::vector<Cand> cands;
    for (int a = 0; a < nt; ++a) {
      const auto pos =
          static_cast<int>(std::lower_bound(cp.begin(), cp.end(), tp[a]) - cp.begin());
      for (int b = pos - 1; b >= 0; --b) {
        const double d = tp[a] - cp[b];
        if (d > mt[a] + pref[b]) break;
        if (d <= mt[a] + mc[b]) cands.push_back({a, b, d});
      }
      for (int b = pos; b < nc; ++b) {
        const double d = cp[b] - tp[a];
        if (d > mt[a] + suf[b]) break;
        if (d <= mt[a] + mc[b]) cands.push_back({a, b, d});
      }
    }

    const int src = 0, sink = nt + nc + 1;
    FlowGraph g(nt + nc + 2);
    for (int a = 0; a < nt; ++a) g.add(src, 1 + a, 1, 0.0);
    for (const auto& cd : cands)
      g.add(1 + cd.a, 1 + nt + cd.b, 1, cd.d - mt[cd.a] - mc[cd.b]);
    for (int b = 0; b < nc; ++b) g.add(1 + nt + b, sink, 1, 0.0);
    min_cost_matching(g, src, sink);

    std::vector<bool> t_matched(nt, false), c_matched(nc, false);
    for (int a = 0; a < nt; ++a) {
      for (const auto& arc : g.adj[1 + a]) {
        if (arc.to >= 1 + nt && arc.to < 1 + nt + nc && arc.cap == 0 &&
            g.adj[arc.to][arc.rev].cap == 1) {
          const int b = arc.to - 1 - nt;
          t_matched[a] = c_matched[b] = true;
          cover.push_back({tidx[a], cidx[b], std::abs(tp[a] - cp[b])});
        }
      }
    }
    for (int a = 0; a < nt; ++a)
      if (!t_matched[a]) cover.push_back({tidx[a], cidx[near_t[a]], mt[a]});
    for (int b = 0; b < nc; ++b)
      if (!c_matched[b]) cover.push_back({tidx[near_c[b]], cidx[b], mc[b]});
  }

  // dedupe (two singletons can attach to each other from both sides)
  std::sort(cover.begin(), cover.end(), [](const Edge& x, const Edge& y) {
    return std::tie(x.t, x.c) < std::tie(y.t, y.c);
  });
  cover.erase(std::unique(cover.begin(), cover.end(),
                          [](const Edge& x, const Edge& y) { return x.t == y.t && x.c == y.c; }),
              cover.end());

  // drop edges whose endpoints are both covered elsewhere; what is left is a
  // union of stars, i.e. valid strata
  std::vector<int> deg(n, 0);
  for (const auto& e : cover) {
    ++deg[e.t];
    ++deg[e.c];
  }
  std::vector<int> order(cover.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    if (cover[i].cost != cover[j].cost) return cover[i].cost > cover[j].cost;
    return std::tie(cover[i].t, cover[i].c) < std::tie(cover[j].t, cover[j].c);
  });
  std::vector<bool> removed(cover.size(), false);
  for (int k : order) {
    if (deg[cover[k].t] >= 2 && deg[cover[k].c] >= 2) {
      removed[k] = true;
      --deg[cover[k].t];
      --deg[cover[k].c];
    }
  }

  DisjointSet dsu(static_cast<int>(n));
  for (std::size_t k = 0; k < cover.size(); ++k)
    if (!removed[k]) dsu.unite(cover[k].t, cover[k].c);

  FullMatchResult res;
  res.stratum_of.assign(n, -1);
  std::vector<int> root_to_id(n, -1);
  for (long i = 0; i < n; ++i) {
    const int r = dsu.find(static_cast<int>(i));
    if (root_to_id[r] < 0) {
      root_to_id[r] = res.n_strata++;
      res.n_treated.push_back(0);
      res.n_control.push_back(0);
    }
    res.stratum_of[i] = root_to_id[r];
    (Z[i] ? res.n_treated : res.n_control)[res.stratum_of[i]] += 1;
  }
  for (int s = 0; s < res.n_strata; ++s) {
    if (res.n_treated[s] < 1 || res.n_control[s] < 1)
      throw std::logic_error("full_match: stratum missing a group");
  }
  res.p_z = static_cast<double>(nt) / static_cast<double>(n);
  res.total_distance = full_match_objective(ps, Z, res.stratum_of);
  return res;
}

Eigen::VectorXd full_match_weights(const FullMatchResult& match, const std::vector<int>& Z) {
  const auto n = static_cast<long>(Z.size());
  if (static_cast<long>(match.stratum_of.size()) != n)
    throw std::invalid_argument("full_match_weights: length mismatch");
  Eigen::VectorXd w(n);
  for (long i = 0; i < n; ++i) {
    const int s = match.stratum_of[i];
    const double size = match.n_treated[s] + match.n_control[s];
    w[i] = Z[i] ? match.p_z * size / match.n_treated[s]
                : (1.0 - match.p_z) * size / match.n_control[s];
  }
  return w;
}

double full_match_objective(const Eigen::VectorXd& ps, const std::vector<int>& Z,
                            const std::vector<int>& stratum_of) {
  int n_strata = 0;
  for (int s : stratum_of) n_strata = std::max(n_strata, s + 1);
  std::vector<std::vector<int>> treated(n_strata), control(n_strata);
  for (std::size_t i = 0; i < stratum_of.size(); ++i)
    (Z[i] ? treated : control)[stratum_of[i]].push_back(static_cast<int>(i));

  std::vector<double> addends;
  for (int s = 0; s < n_strata; ++s) {
    for (int t : treated[s])
      for (int c : control[s]) addends.push_back(std::abs(ps[t] - ps[c]));
  }
  std::sort(addends.begin(), addends.end());
  double total = 0.0;
  for (double a : addends) total += a;
  return total;
}

Eigen::VectorXd fit_event_prob(const Cohort& cohort, bool* degenerate) {
  const long n = cohort.n();
  long n_events = 0;
  for (int d : cohort.D) n_events += d;
  if (degenerate) *degenerate = false;
  if (n_events == 0 || n_events == n) {
    if (degenerate) *degenerate = true;
    const double p = n_events == 0 ? kProbClip : 1.0 - kProbClip;
    return Eigen::VectorXd::Constant(n, p);
  }

  Eigen::MatrixXd design(n, 2 + kNumCovariates);
  design.col(0).setOnes();
  for (long i = 0; i < n; ++i) design(i, 1) = cohort.Z[i];
  design.rightCols(kNumCovariates) = cohort.X;
  Eigen::VectorXd d(n);
  for (long i = 0; i < n; ++i) d[i] = cohort.D[i];

  const GlmFit fit = logistic_irls(design, d);
  if (!fit.converged) throw std::runtime_error("fit_event_prob: model did not converge");
  return clipped_probs(design, fit.coef);
}

Eigen::VectorXd pe_modify(const Eigen::VectorXd& w_ps, const Eigen::VectorXd& p_event) {
  if (w_ps.size() != p_event.size()) throw std::invalid_argument("pe_modify: length mismatch");
  for (Eigen::Index i = 0; i < p_event.size(); ++i) {
    if (!(p_event[i] > 0.0 && p_event[i] <= 1.0))
      throw std::invalid_argument("pe_modify: event probabilities must be in (0,1]");
  }
  return (w_ps.array() * p_event.array()).matrix();
}

}  // namespace mhrsim
