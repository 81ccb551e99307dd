#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cmfg/error.hpp"
#include "cmfg/trajectory.hpp"

namespace cmfg::oracle1d {

struct EntryProblem {
  double x = -1.0;
  double v = 1.0;
  double w = 0.0;
  double theta = 3.0;
  double T = 4.0;

  double linear_limit() const { return 2.0 * std::abs(x) / (v + w); }
  double parabolic_limit() const { return 3.0 * std::abs(x) / (v + 2.0 * w); }
};

enum class Regime { Linear, FullQuadratic, ParabolicThenFlat };

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::Linear: return "Linear";
    case Regime::FullQuadratic: return "FullQuadratic";
    case Regime::ParabolicThenFlat: return "ParabolicThenFlat";
  }
  return "?";
}

inline void require_p2(double p) {
  if (p != 2.0) fail(Errc::UnsupportedExponent, "closed forms exist only for p = 2");
}

inline void validate_base(double x, double v, double w, double T) {
  if (!(x < 0.0)) fail(Errc::InvariantViolated, "entry problem needs x < 0");
  if (!(v > 0.0)) fail(Errc::InvariantViolated, "entry problem needs v > 0");
  if (!(T > 0.0)) fail(Errc::InvariantViolated, "entry problem needs T > 0");
  if (!(w >= 0.0 && w <= std::abs(x) / T)) fail(Errc::InvariantViolated, "entry problem needs 0 <= w <= |x|/T");
  if (!(3.0 * std::abs(x) / v < T)) fail(Errc::InvariantViolated, "entry problem needs 3|x|/v < T");
}

inline void validate(const EntryProblem& p) {
  validate_base(p.x, p.v, p.w, p.T);
  if (!(p.theta > 0.0 && p.theta < p.T)) fail(Errc::InvariantViolated, "entry problem needs 0 < theta < T");
}

// Both regime boundaries are resolved toward the larger-θ closed form; values coincide there.
inline Regime regime_of(const EntryProblem& p) {
  if (p.theta >= p.parabolic_limit()) return Regime::ParabolicThenFlat;
  if (p.theta >= p.linear_limit()) return Regime::FullQuadratic;
  return Regime::Linear;
}

// η(t) = c0 + c1 t + c2 t^2 on [a, b].
struct Piece {
  double a, b;
  double c0, c1, c2;
};

struct EntrySolution {
  EntryProblem problem;
  double value = 0.0;
  Regime regime = Regime::Linear;
  double tau = 0.0;
  double mu = 0.0;
  double k = 0.0;
  std::vector<Piece> profile;

  const Piece& piece_at(double t) const {
    for (const auto& pc : profile)
      if (t <= pc.b) return pc;
    return profile.back();
  }
  double velocity(double t) const {
    const auto& pc = piece_at(t);
    return pc.c0 + t * (pc.c1 + t * pc.c2);
  }
  double acceleration(double t) const {
    const auto& pc = piece_at(t);
    return pc.c1 + 2.0 * t * pc.c2;
  }
  // x + ∫_0^t η.
  double position(double t) const {
    double xpos = problem.x;
    for (const auto& pc : profile) {
      const double hi = std::min(t, pc.b);
      if (hi <= pc.a) break;
      auto F = [&](double s) { return s * (pc.c0 + s * (pc.c1 / 2.0 + s * pc.c2 / 3.0)); };
      xpos += F(hi) - F(pc.a);
    }
    return xpos;
  }
  double complementarity_residual() const { return std::abs(mu * position(problem.theta)); }

  // Exact knot representation on [0, θ]: the profile is piecewise quadratic in velocity.
  Trajectory<1> to_trajectory() const {
    std::vector<double> ts{0.0};
    for (const auto& pc : profile) ts.push_back(pc.b);
    std::vector<State<1>> ks;
    for (double t : ts) ks.push_back(state1(position(t), velocity(t)));
    ks.front() = state1(problem.x, problem.v);
    ks.back().v(0) = problem.w;
    return Trajectory<1>(ts, ks);
  }
};

namespace detail {

// Closed-form minimizer without the strict θ < T check (θ = T is used by the feasibility map).
inline EntrySolution solve_entry(const EntryProblem& p) {
  EntrySolution s;
  s.problem = p;
  s.regime = regime_of(p);
  const double x = p.x, v = p.v, w = p.w, th = p.theta;
  switch (s.regime) {
    case Regime::Linear:
      s.value = 0.5 * (w - v) * (w - v) / th;
      s.tau = th;
      s.mu = 0.0;
      s.k = -(v - w) / th;
      s.profile = {{0.0, th, v, s.k, 0.0}};
      break;
    case Regime::FullQuadratic:
      s.value = 6.0 * x * x / (th * th * th) + 6.0 * x * (v + w) / (th * th) + 2.0 * (v * v + v * w + w * w) / th;
      s.tau = th;
      s.k = -(6.0 * x + (4.0 * v + 2.0 * w) * th) / (th * th);
      s.mu = 6.0 * (2.0 * x + (v + w) * th) / (th * th * th);
      s.profile = {{0.0, th, v, s.k, 0.5 * s.mu}};
      break;
    case Regime::ParabolicThenFlat: {
      const double dv = v - w;
      const double den = x + w * th;
      s.value = 2.0 / 9.0 * dv * dv * dv / (std::abs(x) - w * th);
      s.tau = -3.0 * den / dv;
      s.mu = 2.0 * dv * dv * dv / (9.0 * den * den);
      s.k = -s.mu * s.tau;
      if (s.tau >= th) {
        s.tau = th;
        s.profile = {{0.0, th, v, s.k, 0.5 * s.mu}};
      } else {
        s.profile = {{0.0, s.tau, v, s.k, 0.5 * s.mu}, {s.tau, th, w, 0.0, 0.0}};
      }
      break;
    }
  }
  return s;
}

}  // namespace detail

inline EntrySolution entry_trajectory(const EntryProblem& p, double expo = 2.0) {
  require_p2(expo);
  validate(p);
  return detail::solve_entry(p);
}

inline double entry_energy(const EntryProblem& p, double expo = 2.0) {
  return entry_trajectory(p, expo).value;
}

struct OptimalTheta {
  double theta_star = 0.0;
  double min_value = 0.0;
  double asymptotic = 0.0;
};

inline double blowup_estimate(double x, double v) {
  if (v == 0.0) return 0.0;
  if (!(x < 0.0)) fail(Errc::InvalidArgument, "blowup_estimate needs x < 0");
  return 2.0 / 9.0 * v * v * v / std::abs(x);
}

inline OptimalTheta optimal_theta(double x, double v, double w, double T, double expo = 2.0) {
  require_p2(expo);
  validate_base(x, v, w, T);
  OptimalTheta o;
  o.theta_star = 3.0 * std::abs(x) / (v + w + std::sqrt(v * w));
  o.min_value = entry_energy({x, v, w, o.theta_star, T});
  o.asymptotic = blowup_estimate(x, v);
  return o;
}

inline double max_phase1_time(double d_abs, double v_normal_plus) {
  if (v_normal_plus <= 0.0) return kInf;
  return 3.0 * d_abs / v_normal_plus;
}

}  // namespace cmfg::oracle1d
