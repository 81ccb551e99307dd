#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cmfg/error.hpp"
#include "cmfg/geometry.hpp"
#include "cmfg/poly.hpp"

namespace cmfg {

// Q(s) = x + v s + A s^2 + B s^3 on [0, t] with Q(0)=x, Q'(0)=v, Q(t)=y, Q'(t)=w.
template <int Dim>
struct CubicSegment {
  double t = 1.0;
  Vec<Dim> x = Vec<Dim>::Zero(), v = Vec<Dim>::Zero();
  Vec<Dim> y = Vec<Dim>::Zero(), w = Vec<Dim>::Zero();
  Vec<Dim> A = Vec<Dim>::Zero(), B = Vec<Dim>::Zero();

  Vec<Dim> pos(double s) const {
    if (s == t) return y;
    return x + s * (v + s * (A + s * B));
  }
  Vec<Dim> vel(double s) const {
    if (s == t) return w;
    return v + s * (2.0 * A + 3.0 * s * B);
  }
  Vec<Dim> acc(double s) const { return 2.0 * A + 6.0 * s * B; }
  State<Dim> state(double s) const { return {pos(s), vel(s)}; }
};

template <int Dim>
CubicSegment<Dim> cubic_connect(double t, const Vec<Dim>& x, const Vec<Dim>& v, const Vec<Dim>& y,
                                const Vec<Dim>& w) {
  if (!(t > 0.0)) fail(Errc::NonpositiveDuration, "cubic_connect needs t > 0");
  CubicSegment<Dim> q;
  q.t = t;
  q.x = x;
  q.v = v;
  q.y = y;
  q.w = w;
  const Vec<Dim> gap = y - x - v * t;
  const Vec<Dim> dv = w - v;
  q.A = 3.0 * gap / (t * t) - dv / t;
  q.B = -2.0 * gap / (t * t * t) + dv / (t * t);
  return q;
}

// (1/p) ∫_0^t |Q''|^p. The acceleration is linear in s, so p=2 is exact via endpoint values.
template <int Dim>
double segment_energy(const CubicSegment<Dim>& q, double p = 2.0) {
  const Vec<Dim> a0 = q.acc(0.0), a1 = q.acc(q.t);
  if (p == 2.0) return q.t / 6.0 * (a0.squaredNorm() + a0.dot(a1) + a1.squaredNorm());
  if constexpr (Dim == 1) {
    const double u0 = a0(0), u1 = a1(0);
    auto F = [p](double u) { return std::pow(std::abs(u), p) * u / (p + 1.0); };
    if (std::abs(u1 - u0) <= 1e-14 * (std::abs(u0) + std::abs(u1)))
      return q.t * std::pow(std::abs(0.5 * (u0 + u1)), p) / p;
    return q.t * (F(u1) - F(u0)) / (u1 - u0) / p;
  } else {
    auto f = [&](double s) { return std::pow(q.acc(s).norm(), p); };
    const double I = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, 0.0, q.t, 15, 1e-13);
    return I / p;
  }
}

template <int Dim>
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::vector<double> times, std::vector<State<Dim>> knots)
      : t_(std::move(times)), k_(std::move(knots)) {
    if (t_.size() < 2 || t_.size() != k_.size())
      fail(Errc::InvalidArgument, "trajectory needs >= 2 knots with matching times");
    if (t_.front() != 0.0) fail(Errc::InvalidArgument, "trajectory must start at time 0");
    for (std::size_t i = 0; i + 1 < t_.size(); ++i)
      if (!(t_[i + 1] > t_[i])) fail(Errc::NonpositiveDuration, "knot times must increase strictly");
  }

  static Trajectory uniform(double T, std::vector<State<Dim>> knots) {
    const int n = static_cast<int>(knots.size());
    return Trajectory(uniform_times(T, n), std::move(knots));
  }
  static std::vector<double> uniform_times(double T, int n) {
    std::vector<double> t(n);
    for (int i = 0; i < n; ++i) t[i] = T * static_cast<double>(i) / static_cast<double>(n - 1);
    t.back() = T;
    return t;
  }
  static Trajectory rest(const Vec<Dim>& x, double T, int n = 2) {
    return uniform(T, std::vector<State<Dim>>(n, State<Dim>{x, Vec<Dim>::Zero()}));
  }

  double horizon() const { return t_.back(); }
  int knot_count() const { return static_cast<int>(t_.size()); }
  int segment_count() const { return knot_count() - 1; }
  const std::vector<double>& times() const { return t_; }
  const std::vector<State<Dim>>& knots() const { return k_; }
  const State<Dim>& knot(int i) const { return k_[i]; }
  const State<Dim>& initial() const { return k_.front(); }
  const State<Dim>& terminal() const { return k_.back(); }

  CubicSegment<Dim> segment(int i) const {
    return cubic_connect<Dim>(t_[i + 1] - t_[i], k_[i].x, k_[i].v, k_[i + 1].x, k_[i + 1].v);
  }

  // Segment index containing s (the left one at interior knots).
  int locate(double s) const {
    if (!(s >= 0.0 && s <= horizon())) fail(Errc::TimeOutOfRange, "time outside [0, T]");
    auto it = std::upper_bound(t_.begin(), t_.end(), s);
    int i = static_cast<int>(it - t_.begin()) - 1;
    return std::clamp(i, 0, segment_count() - 1);
  }

  State<Dim> eval(double s) const {
    const int i = locate(s);
    if (s == t_[i]) return k_[i];
    if (s == t_[i + 1]) return k_[i + 1];
    return segment(i).state(s - t_[i]);
  }

  double energy(double p = 2.0) const {
    double e = 0.0;
    for (int i = 0; i < segment_count(); ++i) e += segment_energy(segment(i), p);
    return e;
  }

 private:
  std::vector<double> t_;
  std::vector<State<Dim>> k_;
};

// Sup-norm distance over the union of both knot grids (positions and velocities).
template <int Dim>
double sup_distance(const Trajectory<Dim>& a, const Trajectory<Dim>& b) {
  std::vector<double> ts = a.times();
  ts.insert(ts.end(), b.times().begin(), b.times().end());
  const double T = std::min(a.horizon(), b.horizon());
  double d = 0.0;
  for (double t : ts) {
    if (t > T) continue;
    const auto sa = a.eval(t), sb = b.eval(t);
    d = std::max({d, (sa.x - sb.x).cwiseAbs().maxCoeff(), (sa.v - sb.v).cwiseAbs().maxCoeff()});
  }
  return d;
}

namespace detail {

// Interior critical points of s -> n·Q(s) on (0, t).
template <int Dim>
std::vector<double> directional_extrema(const CubicSegment<Dim>& q, const Vec<Dim>& n) {
  const double c0 = n.dot(q.v), c1 = 2.0 * n.dot(q.A), c2 = 3.0 * n.dot(q.B);
  std::vector<double> r;
  for (double s : poly::quadratic_roots(c0, c1, c2, 0.0, q.t))
    if (s > 0.0 && s < q.t) r.push_back(s);
  return r;
}

}  // namespace detail

template <int Dim>
bool is_admissible(const Trajectory<Dim>& traj, const Domain<Dim>& dom, double tol = 1e-9,
                   int oversample = 8) {
  if (oversample < 2) fail(Errc::InvalidArgument, "oversample must be >= 2");
  for (int i = 0; i < traj.segment_count(); ++i) {
    const auto q = traj.segment(i);
    for (int j = 0; j <= oversample; ++j) {
      const double s = q.t * static_cast<double>(j) / oversample;
      if (signed_distance(dom, q.pos(s)) > tol) return false;
    }
    if (containment_is_linear(dom)) {
      for (int c = 0; c < containment_count(dom); ++c) {
        const Vec<Dim> n = containment(dom, c, q.x).grad;
        for (double s : detail::directional_extrema(q, n))
          if (signed_distance(dom, q.pos(s)) > tol) return false;
      }
    }
  }
  return true;
}

struct GammaCBound {
  double C = 1.0;
};

template <int Dim>
double velocity_sup(const Trajectory<Dim>& traj) {
  double m = 0.0;
  for (const auto& k : traj.knots()) m = std::max(m, k.v.norm());
  for (int i = 0; i < traj.segment_count(); ++i) {
    const auto q = traj.segment(i);
    // d/ds |η|^2 / 2 = η·η' is a cubic in s.
    const Vec<Dim> a = q.v, b = 2.0 * q.A, c = 3.0 * q.B;
    const double coef[4] = {a.dot(b), b.squaredNorm() + 2.0 * a.dot(c), 3.0 * b.dot(c), 2.0 * c.squaredNorm()};
    for (double s : poly::cubic_roots(coef, 0.0, q.t)) m = std::max(m, q.vel(s).norm());
  }
  return m;
}

template <int Dim>
bool in_gamma_c(const Trajectory<Dim>& traj, const GammaCBound& bound) {
  return velocity_sup(traj) <= bound.C && std::sqrt(2.0 * traj.energy(2.0)) <= bound.C;
}

}  // namespace cmfg
