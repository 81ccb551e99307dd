#pragma once

#include <Eigen/Dense>

#include <array>
#include <memory>
#include <string>

#include "cmfg/geometry.hpp"
#include "cmfg/trajectory.hpp"

namespace cmfg {

// Value, gradient and Hessian of a scalar function of the stacked state (x, v).
template <int Dim>
struct Derivs {
  static constexpr int S = 2 * Dim;
  double f = 0.0;
  Eigen::Matrix<double, S, 1> g = Eigen::Matrix<double, S, 1>::Zero();
  Eigen::Matrix<double, S, S> H = Eigen::Matrix<double, S, S>::Zero();
};

template <int Dim>
class RunningCost {
 public:
  virtual ~RunningCost() = default;
  virtual std::string id() const = 0;
  virtual double value(const State<Dim>& s, double t) const = 0;
  virtual void eval(const State<Dim>& s, double t, Derivs<Dim>& d) const = 0;
  virtual bool is_zero() const { return false; }
};

template <int Dim>
class TerminalCost {
 public:
  virtual ~TerminalCost() = default;
  virtual std::string id() const = 0;
  virtual double value(const State<Dim>& s) const = 0;
  virtual void eval(const State<Dim>& s, Derivs<Dim>& d) const = 0;
  virtual bool is_zero() const { return false; }
};

template <int Dim>
class ZeroRunning final : public RunningCost<Dim> {
 public:
  std::string id() const override { return "zero"; }
  double value(const State<Dim>&, double) const override { return 0.0; }
  void eval(const State<Dim>&, double, Derivs<Dim>& d) const override { d = Derivs<Dim>{}; }
  bool is_zero() const override { return true; }
};

template <int Dim>
class ConstantRunning final : public RunningCost<Dim> {
 public:
  explicit ConstantRunning(double c) : c_(c) {}
  std::string id() const override { return "constant"; }
  double value(const State<Dim>&, double) const override { return c_; }
  void eval(const State<Dim>&, double, Derivs<Dim>& d) const override {
    d = Derivs<Dim>{};
    d.f = c_;
  }

 private:
  double c_;
};

// ℓ = a |x - x0|^2 + b |v|^2 (+ c).
template <int Dim>
class QuadraticRunning final : public RunningCost<Dim> {
 public:
  QuadraticRunning(double a, double b, Vec<Dim> x0, double c = 0.0) : a_(a), b_(b), c_(c), x0_(x0) {}
  std::string id() const override { return "quadratic"; }
  double value(const State<Dim>& s, double) const override {
    return a_ * (s.x - x0_).squaredNorm() + b_ * s.v.squaredNorm() + c_;
  }
  void eval(const State<Dim>& s, double t, Derivs<Dim>& d) const override {
    d = Derivs<Dim>{};
    d.f = value(s, t);
    d.g.template head<Dim>() = 2.0 * a_ * (s.x - x0_);
    d.g.template tail<Dim>() = 2.0 * b_ * s.v;
    for (int i = 0; i < Dim; ++i) {
      d.H(i, i) = 2.0 * a_;
      d.H(Dim + i, Dim + i) = 2.0 * b_;
    }
  }

 private:
  double a_, b_, c_;
  Vec<Dim> x0_;
};

template <int Dim>
class ZeroTerminal final : public TerminalCost<Dim> {
 public:
  std::string id() const override { return "zero"; }
  double value(const State<Dim>&) const override { return 0.0; }
  void eval(const State<Dim>&, Derivs<Dim>& d) const override { d = Derivs<Dim>{}; }
  bool is_zero() const override { return true; }
};

// g = a |x - x0|^2 + b |v|^2.
template <int Dim>
class QuadraticTerminal final : public TerminalCost<Dim> {
 public:
  QuadraticTerminal(double a, double b, Vec<Dim> x0) : a_(a), b_(b), x0_(x0) {}
  std::string id() const override { return "quadratic"; }
  double value(const State<Dim>& s) const override { return a_ * (s.x - x0_).squaredNorm() + b_ * s.v.squaredNorm(); }
  void eval(const State<Dim>& s, Derivs<Dim>& d) const override {
    d = Derivs<Dim>{};
    d.f = value(s);
    d.g.template head<Dim>() = 2.0 * a_ * (s.x - x0_);
    d.g.template tail<Dim>() = 2.0 * b_ * s.v;
    for (int i = 0; i < Dim; ++i) {
      d.H(i, i) = 2.0 * a_;
      d.H(Dim + i, Dim + i) = 2.0 * b_;
    }
  }

 private:
  double a_, b_;
  Vec<Dim> x0_;
};

template <int Dim>
struct CostSpec {
  std::shared_ptr<const RunningCost<Dim>> running = std::make_shared<ZeroRunning<Dim>>();
  std::shared_ptr<const TerminalCost<Dim>> terminal = std::make_shared<ZeroTerminal<Dim>>();
  double p = 2.0;
  double M = 0.0;
};

template <int Dim>
void validate(const CostSpec<Dim>& spec) {
  if (!(spec.p > 1.0)) fail(Errc::InvalidArgument, "acceleration exponent must exceed 1");
  if (!(spec.M >= 0.0)) fail(Errc::InvalidArgument, "lower-bound constant M must be >= 0");
  if (!spec.running || !spec.terminal) fail(Errc::InvalidArgument, "cost handles must be set");
}

// Gauss-Legendre rule of order 4 on [0, 1].
struct Gauss4 {
  static constexpr std::array<double, 4> nodes{0.5 - 0.4305681557970262, 0.5 - 0.1699905217924281,
                                               0.5 + 0.1699905217924281, 0.5 + 0.4305681557970262};
  static constexpr std::array<double, 4> weights{0.1739274225687269, 0.3260725774312731, 0.3260725774312731,
                                                 0.1739274225687269};
};

// Absolute time of the q-th quadrature node on segment i; shared by the solver and coupling caches.
inline double quad_time(double t0, const std::vector<double>& times, int i, int q) {
  return t0 + times[i] + (times[i + 1] - times[i]) * Gauss4::nodes[q];
}

// Σ segment energies + Gauss-4 quadrature of ℓ per segment + g at the final state.
template <int Dim>
double cost_of(const Trajectory<Dim>& traj, const CostSpec<Dim>& spec, double t0 = 0.0) {
  double J = traj.energy(spec.p);
  if (!spec.running->is_zero()) {
    const auto& ts = traj.times();
    for (int i = 0; i < traj.segment_count(); ++i) {
      const auto q = traj.segment(i);
      for (int k = 0; k < 4; ++k) {
        const double s = q.t * Gauss4::nodes[k];
        J += q.t * Gauss4::weights[k] * spec.running->value(q.state(s), quad_time(t0, ts, i, k));
      }
    }
  }
  J += spec.terminal->value(traj.terminal());
  return J;
}

}  // namespace cmfg
