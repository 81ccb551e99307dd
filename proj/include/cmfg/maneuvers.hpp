#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "cmfg/geometry.hpp"
#include "cmfg/oracle1d.hpp"
#include "cmfg/trajectory.hpp"

namespace cmfg {

// Check: throw ExitsDomain when the constructed output fails is_admissible.
// None: return the raw construction (used to probe sharpness of the sufficient bounds).
enum class Guard { Check, None };

inline constexpr double kManeuverTol = 1e-9;

// Boundary chart: the last coordinate is the signed normal distance, the others are tangential.
// Affine for interval and polygon edges (orthonormal), polar for the disc.
template <int Dim>
struct Chart {
  bool polar = false;
  Mat<Dim> R = Mat<Dim>::Identity();  // rows: tangential..., outward normal
  Vec<Dim> origin = Vec<Dim>::Zero();
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 1.0;
  double phi0 = 0.0;

  State<Dim> to(const State<Dim>& s) const {
    if (!polar) return {R * (s.x - origin), R * s.v};
    if constexpr (Dim == 2) {
      const Eigen::Vector2d rel = s.x - center;
      const double rho = rel.norm();
      const Eigen::Vector2d er = rel / rho, ephi(-er.y(), er.x());
      double dphi = std::atan2(rel.y(), rel.x()) - phi0;
      dphi = std::remainder(dphi, 2.0 * std::numbers::pi);
      State<Dim> c;
      c.x << radius * dphi, rho - radius;
      c.v << radius * ephi.dot(s.v) / rho, er.dot(s.v);
      return c;
    }
    return s;
  }

  State<Dim> from(const State<Dim>& c) const {
    if (!polar) return {origin + R.transpose() * c.x, R.transpose() * c.v};
    if constexpr (Dim == 2) {
      const double phi = phi0 + c.x(0) / radius;
      const double rho = radius + c.x(1);
      const Eigen::Vector2d er(std::cos(phi), std::sin(phi)), ephi(-er.y(), er.x());
      State<Dim> s;
      s.x = center + rho * er;
      s.v = c.v(1) * er + rho * (c.v(0) / radius) * ephi;
      return s;
    }
    return c;
  }
};

inline Chart<1> chart_at(const Domain<1>& dom, const Vec<1>& x) {
  const auto& iv = dom.interval();
  Chart<1> c;
  const bool right = x(0) >= 0.5 * (iv.a + iv.b);
  c.R(0, 0) = right ? 1.0 : -1.0;
  c.origin(0) = right ? iv.b : iv.a;
  return c;
}

inline Chart<2> chart_at(const Domain<2>& dom, const Vec<2>& x, int edge = -1) {
  Chart<2> c;
  if (dom.kind() == DomainKind::Disc) {
    const auto& d = dom.disc();
    const Eigen::Vector2d rel = x - d.center;
    if (rel.norm() == 0.0) fail(Errc::QueryTooDeepInside, "polar chart undefined at the disc center");
    c.polar = true;
    c.center = d.center;
    c.radius = d.radius;
    c.phi0 = std::atan2(rel.y(), rel.x());
    return c;
  }
  const auto& poly = dom.polygon();
  const int j = edge >= 0 ? edge : detail::most_active_edge(poly, x);
  const Eigen::Vector2d n = poly.normal(j);
  c.R.row(0) = Eigen::Vector2d(-n.y(), n.x()).transpose();
  c.R.row(1) = n.transpose();
  c.origin = poly.vertex(j);
  return c;
}

namespace detail {

template <int Dim>
void guard_output(const Trajectory<Dim>& tr, const Domain<Dim>& dom, Guard g, const char* what) {
  if (g == Guard::Check && !is_admissible(tr, dom, kManeuverTol))
    fail(Errc::ExitsDomain, std::string(what) + " leaves the closed domain");
}

// Sorted, deduplicated union of breakpoints inside [0, T].
inline std::vector<double> merge_times(std::vector<double> ts, double T) {
  ts.push_back(0.0);
  ts.push_back(T);
  std::sort(ts.begin(), ts.end());
  std::vector<double> out;
  for (double t : ts) {
    if (t < 0.0 || t > T) continue;
    if (!out.empty() && t - out.back() <= 1e-14 * std::max(1.0, T)) {
      if (t == T) out.back() = T;
      continue;
    }
    out.push_back(t);
  }
  return out;
}

inline std::vector<double> dense_times(double a, double b, int n) {
  std::vector<double> ts;
  for (int i = 0; i <= n; ++i) ts.push_back(a + (b - a) * static_cast<double>(i) / n);
  return ts;
}

template <int Dim>
Trajectory<Dim> sample_exact(const std::vector<double>& ts, const std::function<State<Dim>(double)>& f) {
  std::vector<State<Dim>> ks;
  ks.reserve(ts.size());
  for (double t : ts) ks.push_back(f(t));
  return Trajectory<Dim>(ts, std::move(ks));
}

}  // namespace detail

// Straight brake: η(t) = (1 - t/tbar) v, then rest at x + (tbar/2) v.
template <int Dim>
Trajectory<Dim> straight_brake(const State<Dim>& s, double tbar, double T) {
  const State<Dim> rest{s.x + 0.5 * tbar * s.v, Vec<Dim>::Zero()};
  if (tbar >= T) return Trajectory<Dim>({0.0, T}, {s, rest});
  return Trajectory<Dim>({0.0, tbar, T}, {s, rest, rest});
}

template <int Dim>
Trajectory<Dim> brake_maneuver(const State<Dim>& s, double tbar, double T, const Domain<Dim>& dom,
                               Guard guard = Guard::Check) {
  if (!(tbar > 0.0)) fail(Errc::NonpositiveDuration, "brake needs tbar > 0");
  if (!(tbar <= T)) fail(Errc::InvalidArgument, "brake needs tbar <= T");
  if (!is_admissible_state(dom, s, kManeuverTol)) fail(Errc::StateNotAdmissible, "brake start state");
  Trajectory<Dim> tr = straight_brake(s, tbar, T);
  if constexpr (Dim == 2) {
    if (dom.kind() == DomainKind::Disc && !is_admissible(tr, dom, kManeuverTol) &&
        (s.x - dom.disc().center).norm() > 0.0) {
      // Polar variant: brake the chart coordinates; the radial coordinate never increases.
      const auto ch = chart_at(dom, s.x);
      const State<Dim> c0 = ch.to(s);
      auto f = [&](double t) {
        const double u = std::min(t, tbar);
        State<Dim> c;
        c.x = c0.x + (u - u * u / (2.0 * tbar)) * c0.v;
        c.v = (1.0 - u / tbar) * c0.v;
        return ch.from(c);
      };
      auto ts = detail::dense_times(0.0, tbar, 512);
      if (tbar < T) ts.push_back(T);
      tr = detail::sample_exact<Dim>(ts, f);
      tr = Trajectory<Dim>(tr.times(), [&] {
        auto ks = tr.knots();
        ks.front() = s;
        return ks;
      }());
    }
  }
  detail::guard_output(tr, dom, guard, "brake maneuver");
  return tr;
}

template <int Dim>
struct TwoPhaseResult {
  Trajectory<Dim> trajectory;
  double phase1_energy = 0.0;
  double phase2_energy = 0.0;
};

template <int Dim>
double energy_between(const Trajectory<Dim>& tr, double a, double b) {
  double e = 0.0;
  for (int i = 0; i < tr.segment_count(); ++i)
    if (tr.times()[i] >= a - 1e-15 && tr.times()[i + 1] <= b + 1e-15) e += segment_energy(tr.segment(i));
  return e;
}

// Phase 1 drives the normal components to the target's start, phase 2 cancels the tangential
// offset, then the time-shifted target follows.
template <int Dim>
TwoPhaseResult<Dim> two_phase_correction(const Trajectory<Dim>& target, const State<Dim>& s_new, double t1,
                                         double t2, const Domain<Dim>& dom, Guard guard = Guard::Check) {
  const double T = target.horizon();
  if (!(t1 > 0.0 && t1 < t2 && t2 < T)) fail(Errc::PhaseOrderViolation, "need 0 < t1 < t2 < T");
  if (!is_admissible_state(dom, s_new, kManeuverTol)) fail(Errc::StateNotAdmissible, "two-phase start state");
  const auto ch = chart_at(dom, target.initial().x);
  const State<Dim> tgt0 = ch.to(target.initial());
  const State<Dim> cn = ch.to(s_new);
  constexpr int kN = Dim - 1;
  State<Dim> yw;
  yw.x = cn.x + t1 * cn.v;
  yw.v = cn.v;
  yw.x(kN) = tgt0.x(kN);
  yw.v(kN) = tgt0.v(kN);
  const auto p1 = cubic_connect<Dim>(t1, cn.x, cn.v, yw.x, yw.v);
  const auto p2 = cubic_connect<Dim>(t2 - t1, yw.x - tgt0.x, yw.v - tgt0.v, Vec<Dim>::Zero(), Vec<Dim>::Zero());

  auto f = [&](double t) -> State<Dim> {
    if (t == 0.0) return s_new;
    if (t >= t2) return target.eval(t - t1);
    if (t <= t1) return ch.from(p1.state(t));
    const State<Dim> base = ch.to(target.eval(t - t1));
    const State<Dim> off = p2.state(t - t1);
    return ch.from(State<Dim>{base.x + off.x, base.v + off.v});
  };

  std::vector<double> ts{t1, t2};
  for (double tk : target.times()) ts.push_back(tk + t1);
  if (ch.polar) {
    const double h = std::min(t1, t2 - t1) / 256.0;
    const int n = static_cast<int>(std::ceil(t2 / h));
    for (double t : detail::dense_times(0.0, t2, n)) ts.push_back(t);
  }
  TwoPhaseResult<Dim> r{detail::sample_exact<Dim>(detail::merge_times(ts, T), f), 0.0, 0.0};
  r.phase1_energy = energy_between(r.trajectory, 0.0, t1);
  r.phase2_energy = energy_between(r.trajectory, t1, t2);
  detail::guard_output(r.trajectory, dom, guard, "two-phase correction");
  return r;
}

// 3 · min_k ((ν - x)·n_k) / (v·n_k)_+ over the two edges meeting at the vertex.
inline double vertex_stop_bound(const Domain<2>& dom, const State<2>& s, int vertex) {
  const auto& poly = dom.polygon();
  double b = kInf;
  for (int k : {vertex - 1, vertex}) {
    const double vn = std::max(0.0, s.v.dot(poly.normal(k)));
    if (vn > 0.0) b = std::min(b, 3.0 * (poly.vertex(vertex) - s.x).dot(poly.normal(k)) / vn);
  }
  return b;
}

inline Trajectory<2> vertex_stop(const State<2>& s, int vertex, double t_i, const Trajectory<2>& tail,
                                 const Domain<2>& dom, Guard guard = Guard::Check) {
  if (dom.kind() != DomainKind::ConvexPolygon) fail(Errc::InvalidArgument, "vertex_stop needs a polygon");
  const auto& poly = dom.polygon();
  const Eigen::Vector2d nu = poly.vertex(vertex);
  if ((tail.initial().x - nu).norm() > 1e-12 || tail.initial().v.norm() > 1e-12)
    fail(Errc::InvalidArgument, "tail must start at rest on the vertex");
  const double T = tail.horizon();
  if (!(t_i > 0.0)) fail(Errc::NonpositiveDuration, "vertex_stop needs t_i > 0");
  if (!(t_i < T)) fail(Errc::PhaseOrderViolation, "vertex_stop needs t_i < T");
  const auto q = cubic_connect<2>(t_i, s.x, s.v, nu, Eigen::Vector2d::Zero());
  auto f = [&](double t) -> State<2> {
    if (t == 0.0) return s;
    if (t < t_i) return q.state(t);
    return tail.eval(t - t_i);
  };
  std::vector<double> ts{t_i};
  for (double tk : tail.times()) ts.push_back(tk + t_i);
  auto tr = detail::sample_exact<2>(detail::merge_times(ts, T), f);
  detail::guard_output(tr, dom, guard, "vertex stop");
  return tr;
}

namespace detail {

// Cases 1-2 of the feasibility map for v >= 0 on [a, b].
inline Trajectory<1> feasibility_forward(double x, double v, double T, const Interval& iv) {
  const double gap = iv.b - x;
  if (v <= 3.0 * gap / T) return straight_brake(state1(x, v), 2.0 * T / 3.0, T);
  const auto sol = oracle1d::detail::solve_entry({-gap, v, 0.0, T, T});
  auto tr = sol.to_trajectory();
  std::vector<State<1>> ks = tr.knots();
  for (auto& k : ks) k.x(0) += iv.b;
  ks.front().x(0) = x;
  return Trajectory<1>(tr.times(), ks);
}

}  // namespace detail

inline Trajectory<1> mirror(const Trajectory<1>& tr, const Interval& iv) {
  std::vector<State<1>> ks = tr.knots();
  for (auto& k : ks) k = state1(iv.a + iv.b - k.x(0), -k.v(0));
  return Trajectory<1>(tr.times(), ks);
}

inline Trajectory<1> feasibility_map_j(const State<1>& s, double T, const Domain<1>& dom) {
  if (!is_admissible_state(dom, s)) fail(Errc::StateNotAdmissible, "feasibility map start state");
  if (!(T > 0.0)) fail(Errc::NonpositiveDuration, "feasibility map needs T > 0");
  const auto& iv = dom.interval();
  const double x = s.x(0), v = s.v(0);
  if (v >= 0.0) return detail::feasibility_forward(x, v, T, iv);
  if (v >= -3.0 * (x - iv.a) / T) return straight_brake(s, 2.0 * T / 3.0, T);
  return mirror(detail::feasibility_forward(iv.a + iv.b - x, -v, T, iv), iv);
}

// Largest s >= 0 with x + s·v in the closed domain (∞ when v = 0).
inline double ray_exit(const Domain<1>& dom, const Vec<1>& x, const Vec<1>& v) {
  const auto& iv = dom.interval();
  if (v(0) > 0.0) return std::max(0.0, (iv.b - x(0)) / v(0));
  if (v(0) < 0.0) return std::max(0.0, (iv.a - x(0)) / v(0));
  return kInf;
}

inline double ray_exit(const Domain<2>& dom, const Vec<2>& x, const Vec<2>& v) {
  if (v.norm() == 0.0) return kInf;
  if (dom.kind() == DomainKind::Disc) {
    const Eigen::Vector2d rel = x - dom.disc().center;
    const double a = v.squaredNorm(), b = rel.dot(v), c = rel.squaredNorm() - dom.disc().radius * dom.disc().radius;
    const double disc = b * b - a * c;
    if (disc < 0.0) return 0.0;
    return std::max(0.0, (-b + std::sqrt(disc)) / a);
  }
  const auto& poly = dom.polygon();
  double s = kInf;
  for (int j = 0; j < poly.size(); ++j) {
    const double vn = poly.normal(j).dot(v);
    if (vn > 0.0) s = std::min(s, std::max(0.0, (poly.offset(j) - poly.normal(j).dot(x)) / vn));
  }
  return s;
}

// Evaluate any trajectory on a new knot grid (initial state kept bit-exact).
template <int Dim>
Trajectory<Dim> resample(const Trajectory<Dim>& tr, const std::vector<double>& ts) {
  std::vector<State<Dim>> ks;
  ks.reserve(ts.size());
  for (double t : ts) ks.push_back(tr.eval(std::min(t, tr.horizon())));
  return Trajectory<Dim>(ts, std::move(ks));
}

}  // namespace cmfg
