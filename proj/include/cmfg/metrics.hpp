#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "cmfg/error.hpp"
#include "cmfg/geometry.hpp"
#include "cmfg/mfg.hpp"

namespace cmfg {

// SumOfNorms: |Δx| + |Δv|, the default; Euclidean: |(Δx, Δv)|.
enum class GroundMetric { SumOfNorms, Euclidean };

template <int Dim>
double ground_distance(const State<Dim>& a, const State<Dim>& b, GroundMetric g = GroundMetric::SumOfNorms) {
  if (g == GroundMetric::Euclidean) return std::sqrt((a.x - b.x).squaredNorm() + (a.v - b.v).squaredNorm());
  return (a.x - b.x).norm() + (a.v - b.v).norm();
}

inline constexpr int kMaxAssignmentAtoms = 2000;

namespace detail {

// Min-cost perfect matching on a dense n×n matrix; returns col assigned to each row.
inline std::vector<int> hungarian(const std::vector<double>& cost, int n) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row(n);
  for (int j = 1; j <= n; ++j) row[p[j] - 1] = j - 1;
  return row;
}

inline bool is_uniform(const std::vector<double>& w) {
  if (w.empty()) return false;
  const double u = 1.0 / static_cast<double>(w.size());
  for (double x : w)
    if (std::abs(x - u) > 1e-12) return false;
  return true;
}

// Transportation problem by successive shortest paths with Dijkstra on reduced costs.
inline double transport_cost(const std::vector<double>& a, const std::vector<double>& b,
                             const std::vector<double>& cost) {
  const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
  const double inf = std::numeric_limits<double>::infinity();
  const double eps = 1e-15;
  std::vector<double> supply = a, demand = b, flow(static_cast<std::size_t>(n) * m, 0.0);
  // Potentials stay feasible for reduced costs: c_ij - pu_i + pv_j >= 0 on forward arcs.
  std::vector<double> pu(n, 0.0), pv(m, 0.0);
  for (int j = 0; j < m; ++j) {
    double mn = inf;
    for (int i = 0; i < n; ++i) mn = std::min(mn, cost[i * m + j]);
    pv[j] = -mn;
  }
  std::vector<double> du(n), dv(m);
  std::vector<int> prev_u(n), prev_v(m);
  std::vector<char> done_u(n), done_v(m);
  for (int guard = 0; guard < 4 * (n + m) + 1000; ++guard) {
    double left = 0.0;
    for (double s : supply) left += s;
    if (left <= eps) break;
    std::fill(du.begin(), du.end(), inf);
    std::fill(dv.begin(), dv.end(), inf);
    std::fill(done_u.begin(), done_u.end(), 0);
    std::fill(done_v.begin(), done_v.end(), 0);
    // Arcs from the implicit super source have reduced cost pu_i (its own potential stays 0).
    for (int i = 0; i < n; ++i)
      if (supply[i] > eps) {
        du[i] = std::max(0.0, pu[i]);
        prev_u[i] = -1;
      }
    int sink = -1;
    while (true) {
      int bi = -1, bj = -1;
      double best = inf;
      for (int i = 0; i < n; ++i)
        if (!done_u[i] && du[i] < best) best = du[i], bi = i, bj = -1;
      for (int j = 0; j < m; ++j)
        if (!done_v[j] && dv[j] < best) best = dv[j], bj = j, bi = -1;
      if (best == inf) break;
      if (bi >= 0) {
        done_u[bi] = 1;
        for (int j = 0; j < m; ++j) {
          const double rc = std::max(0.0, cost[bi * m + j] - pu[bi] + pv[j]);
          if (du[bi] + rc < dv[j]) {
            dv[j] = du[bi] + rc;
            prev_v[j] = bi;
          }
        }
      } else {
        done_v[bj] = 1;
        if (demand[bj] > eps) {
          sink = bj;
          break;
        }
        for (int i = 0; i < n; ++i) {
          if (flow[i * m + bj] <= eps) continue;
          const double rc = std::max(0.0, -(cost[i * m + bj] - pu[i] + pv[bj]));
          if (dv[bj] + rc < du[i]) {
            du[i] = dv[bj] + rc;
            prev_u[i] = bj;
          }
        }
      }
    }
    if (sink < 0) fail(Errc::InvariantViolated, "transport: no augmenting path");
    const double dist = dv[sink];
    for (int i = 0; i < n; ++i) pu[i] -= std::min(du[i], dist);
    for (int j = 0; j < m; ++j) pv[j] -= std::min(dv[j], dist);
    // Bottleneck along the path.
    double amt = demand[sink];
    int j = sink;
    while (true) {
      const int i = prev_v[j];
      if (prev_u[i] < 0) {
        amt = std::min(amt, supply[i]);
        break;
      }
      amt = std::min(amt, flow[i * m + prev_u[i]]);
      j = prev_u[i];
    }
    j = sink;
    demand[sink] -= amt;
    while (true) {
      const int i = prev_v[j];
      flow[i * m + j] += amt;
      if (prev_u[i] < 0) {
        supply[i] -= amt;
        break;
      }
      flow[i * m + prev_u[i]] -= amt;
      j = prev_u[i];
    }
  }
  double total = 0.0;
  for (std::size_t k = 0; k < flow.size(); ++k) total += flow[k] * cost[k];
  return total;
}

template <int Dim>
std::vector<double> cost_matrix(const EmpiricalStateMeasure<Dim>& a, const EmpiricalStateMeasure<Dim>& b,
                                GroundMetric g) {
  const int n = a.size(), m = b.size();
  std::vector<double> c(static_cast<std::size_t>(n) * m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) c[i * m + j] = ground_distance(a.states[i], b.states[j], g);
  return c;
}

}  // namespace detail

// Exact W1 between equal-size uniform clouds via optimal assignment.
template <int Dim>
double w1_exact(const EmpiricalStateMeasure<Dim>& a, const EmpiricalStateMeasure<Dim>& b,
                GroundMetric g = GroundMetric::SumOfNorms) {
  if (a.size() != b.size()) fail(Errc::UnequalSupportSize, "w1_exact needs equal atom counts");
  if (a.size() > kMaxAssignmentAtoms) fail(Errc::TooManyAtoms, "w1_exact supports at most 2000 atoms");
  if (!detail::is_uniform(a.weights) || !detail::is_uniform(b.weights))
    fail(Errc::InvalidArgument, "w1_exact needs uniform weights");
  const int n = a.size();
  const auto c = detail::cost_matrix(a, b, g);
  const auto row = detail::hungarian(c, n);
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += c[i * n + row[i]];
  return s / n;
}

// Exact W1 between arbitrary weighted measures (transportation problem).
template <int Dim>
double w1_transport(const EmpiricalStateMeasure<Dim>& a, const EmpiricalStateMeasure<Dim>& b,
                    GroundMetric g = GroundMetric::SumOfNorms) {
  if (a.size() == 0 || b.size() == 0) fail(Errc::InvalidArgument, "empty measure");
  if (std::abs(a.total() - b.total()) > 1e-9) fail(Errc::InvalidArgument, "measures must have equal mass");
  if (a.size() == b.size() && detail::is_uniform(a.weights) && detail::is_uniform(b.weights) &&
      a.size() <= kMaxAssignmentAtoms)
    return w1_exact(a, b, g);
  return detail::transport_cost(a.weights, b.weights, detail::cost_matrix(a, b, g));
}

// ∫ |F_a - F_b| for weighted samples on the line.
inline double w1_line(const std::vector<double>& xa, const std::vector<double>& wa, const std::vector<double>& xb,
                      const std::vector<double>& wb) {
  std::vector<std::pair<double, double>> ev;
  ev.reserve(xa.size() + xb.size());
  for (std::size_t i = 0; i < xa.size(); ++i) ev.emplace_back(xa[i], wa[i]);
  for (std::size_t i = 0; i < xb.size(); ++i) ev.emplace_back(xb[i], -wb[i]);
  std::sort(ev.begin(), ev.end(), [](const auto& p, const auto& q) { return p.first < q.first; });
  double F = 0.0, s = 0.0;
  for (std::size_t k = 0; k + 1 < ev.size(); ++k) {
    F += ev[k].second;
    s += std::abs(F) * (ev[k + 1].first - ev[k].first);
  }
  return s;
}

// Mean over random unit directions in (x, v)-space of the projected 1D W1; deterministic in seed.
template <int Dim>
double w1_sliced(const EmpiricalStateMeasure<Dim>& a, const EmpiricalStateMeasure<Dim>& b, int n_projections,
                 std::uint64_t seed) {
  if (n_projections < 1) fail(Errc::InvalidArgument, "n_projections must be >= 1");
  constexpr int S = 2 * Dim;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> pa(a.size()), pb(b.size());
  double sum = 0.0;
  for (int k = 0; k < n_projections; ++k) {
    Eigen::Matrix<double, S, 1> th;
    do {
      for (int d = 0; d < S; ++d) th(d) = nd(rng);
    } while (th.norm() == 0.0);
    th.normalize();
    for (int i = 0; i < a.size(); ++i) pa[i] = th.template head<Dim>().dot(a.states[i].x) + th.template tail<Dim>().dot(a.states[i].v);
    for (int i = 0; i < b.size(); ++i) pb[i] = th.template head<Dim>().dot(b.states[i].x) + th.template tail<Dim>().dot(b.states[i].v);
    sum += w1_line(pa, a.weights, pb, b.weights);
  }
  return sum / n_projections;
}

struct HolderPair {
  double s, t, distance;
};

struct HolderReport {
  std::vector<HolderPair> pairs;
  double fitted_exponent = 0.0;
  double fitted_constant = 0.0;
  double bound_constant = 0.0;  // C(√T + 1)
  double max_ratio = 0.0;       // max d / (C̃ |Δt|^{1/2})
  bool violation = false;
};

// Least-squares fit of log d = log K + β log|Δt| over pairs with d > 0.
inline void fit_holder(HolderReport& r) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : r.pairs) {
    if (!(p.distance > 0.0)) continue;
    const double x = std::log(std::abs(p.t - p.s)), y = std::log(p.distance);
    n += 1;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  if (n < 2 || den <= 0.0) return;
  r.fitted_exponent = (n * sxy - sx * sy) / den;
  r.fitted_constant = std::exp((sy - r.fitted_exponent * sx) / n);
}

// Pairwise W1 of the pushforwards at `times`, checked against C̃ |t - s|^{1/2}.
template <int Dim>
HolderReport holder_check(const TrajectoryMeasure<Dim>& mu, std::vector<double> times, bool use_exact,
                          const GammaCBound& bound, int n_projections = 256, std::uint64_t seed = 0) {
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  const double T = mu.horizon();
  HolderReport r;
  r.bound_constant = bound.C * (std::sqrt(T) + 1.0);
  std::vector<EmpiricalStateMeasure<Dim>> m;
  for (double t : times) m.push_back(pushforward(mu, t));
  for (std::size_t i = 0; i < times.size(); ++i)
    for (std::size_t j = i + 1; j < times.size(); ++j) {
      const double d = use_exact ? w1_transport(m[i], m[j]) : w1_sliced(m[i], m[j], n_projections, seed);
      r.pairs.push_back({times[i], times[j], d});
      const double cap = r.bound_constant * std::sqrt(times[j] - times[i]);
      r.max_ratio = std::max(r.max_ratio, d / cap);
      if (d > cap * (1.0 + 1e-9)) r.violation = true;
    }
  fit_holder(r);
  return r;
}

}  // namespace cmfg
