#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "cmfg/cost.hpp"
#include "cmfg/geometry.hpp"
#include "cmfg/maneuvers.hpp"
#include "cmfg/oracle1d.hpp"
#include "cmfg/poly.hpp"
#include "cmfg/trajectory.hpp"

namespace cmfg {

struct OCPConfig {
  int N = 512;  // knot count
  double T = 1.0;
  double penalty_init = 1e-2;
  double penalty_growth = 10.0;
  int max_outer = 40;
  int max_inner = 200;
  double inner_tol = 1e-13;
  double constraint_tol = 1e-9;
  int multistart = 4;
  std::uint64_t seed = 0;
  double dedup_tol = 1e-4;
  int samples_per_segment = 8;
  bool use_oracle_init = true;
};

inline void validate(const OCPConfig& c) {
  if (c.N < 2) fail(Errc::InvalidArgument, "N must be >= 2");
  if (!(c.T > 0.0)) fail(Errc::InvalidArgument, "T must be positive");
  if (!(c.penalty_growth > 1.0)) fail(Errc::InvalidArgument, "penalty_growth must exceed 1");
  if (!(c.penalty_init > 0.0)) fail(Errc::InvalidArgument, "penalty_init must be positive");
  if (!(c.inner_tol > 0.0 && c.constraint_tol > 0.0 && c.dedup_tol > 0.0))
    fail(Errc::InvalidArgument, "tolerances must be positive");
  if (c.max_outer < 1 || c.max_inner < 1 || c.multistart < 1 || c.samples_per_segment < 2)
    fail(Errc::InvalidArgument, "iteration counts must be positive");
}

// Optional extra constraints; together they express the entry problem K_{θ,w}.
template <int Dim>
struct EndpointConstraints {
  std::optional<Vec<Dim>> terminal_velocity;
  std::optional<Vec<Dim>> velocity_floor;
};

template <int Dim>
struct OcpProblem {
  Domain<Dim> domain;
  State<Dim> initial;
  CostSpec<Dim> cost;
  double T = 1.0;
  double t0 = 0.0;  // absolute start time seen by the running cost
  EndpointConstraints<Dim> extra;
};

// Penalty state of the augmented Lagrangian.
struct PenaltyState {
  std::vector<double> lambda;
  double rho = 1.0;
};

template <int Dim>
struct BlockTridiag {
  static constexpr int S = 2 * Dim;
  using MatS = Eigen::Matrix<double, S, S>;
  using VecS = Eigen::Matrix<double, S, 1>;
  std::vector<MatS> diag, off;  // off[k] couples block k with block k+1

  void reset(int nb) {
    diag.assign(nb, MatS::Zero());
    off.assign(std::max(0, nb - 1), MatS::Zero());
  }

  // Solves (H + δI) x = b by block Cholesky; false if not positive definite.
  bool solve(const std::vector<VecS>& b, double delta, std::vector<VecS>& x) const {
    const int nb = static_cast<int>(diag.size());
    std::vector<MatS> L(nb), W(std::max(0, nb - 1));
    MatS A = diag[0] + delta * MatS::Identity();
    for (int k = 0; k < nb; ++k) {
      Eigen::LLT<MatS> llt(A);
      if (llt.info() != Eigen::Success) return false;
      L[k] = llt.matrixL();
      if (!L[k].allFinite() || (L[k].diagonal().array() <= 0.0).any()) return false;
      if (k + 1 < nb) {
        W[k] = L[k].template triangularView<Eigen::Lower>().solve(off[k]);
        A = diag[k + 1] + delta * MatS::Identity() - W[k].transpose() * W[k];
      }
    }
    std::vector<VecS> y(nb);
    for (int k = 0; k < nb; ++k) {
      VecS r = b[k];
      if (k > 0) r -= W[k - 1].transpose() * y[k - 1];
      y[k] = L[k].template triangularView<Eigen::Lower>().solve(r);
    }
    x.assign(nb, VecS::Zero());
    for (int k = nb - 1; k >= 0; --k) {
      VecS r = y[k];
      if (k + 1 < nb) r -= W[k] * x[k + 1];
      x[k] = L[k].transpose().template triangularView<Eigen::Upper>().solve(r);
    }
    return true;
  }
};

// Direct transcription: decision variables are the knot states 1..N-1 on a uniform grid.
template <int Dim>
class Transcription {
 public:
  static constexpr int S = 2 * Dim;
  static constexpr int L = 4 * Dim;
  using VecS = Eigen::Matrix<double, S, 1>;
  using MatS = Eigen::Matrix<double, S, S>;
  using VecL = Eigen::Matrix<double, L, 1>;
  using MatL = Eigen::Matrix<double, L, L>;
  using Jac = Eigen::Matrix<double, S, L>;
  using Knots = std::vector<State<Dim>>;

  enum class Kind { Point, SegmentMax, FloorPoint, FloorSegmentMin };
  struct Con {
    int seg;
    Kind kind;
    int which;  // containment index or velocity component
    int sample; // sample index for point kinds
  };

  Transcription(OcpProblem<Dim> prob, int N, int samples)
      : prob_(std::move(prob)), N_(N), m_(samples) {
    times_ = Trajectory<Dim>::uniform_times(prob_.T, N_);
    h_ = prob_.T / static_cast<double>(N_ - 1);
    const int nc = containment_count(prob_.domain);
    const bool linear = containment_is_linear(prob_.domain);
    for (int i = 0; i < N_ - 1; ++i) {
      for (int j = 1; j <= m_; ++j)
        for (int c = 0; c < nc; ++c) cons_.push_back({i, Kind::Point, c, j});
      if (linear)
        for (int c = 0; c < nc; ++c) cons_.push_back({i, Kind::SegmentMax, c, 0});
      if (prob_.extra.velocity_floor) {
        for (int d = 0; d < Dim; ++d) {
          for (int j = 1; j <= m_; ++j) cons_.push_back({i, Kind::FloorPoint, d, j});
          cons_.push_back({i, Kind::FloorSegmentMin, d, 0});
        }
      }
    }
    for (int j = 0; j <= m_; ++j) {
      const double tau = static_cast<double>(j) / m_;
      sample_pos_.push_back(pos_basis(tau));
      sample_vel_.push_back(vel_basis(tau));
    }
    for (int q = 0; q < 4; ++q) {
      gauss_pos_.push_back(pos_basis(Gauss4::nodes[q]));
      gauss_vel_.push_back(vel_basis(Gauss4::nodes[q]));
    }
    acc0_ = acc_basis(0.0);
    acc1_ = acc_basis(1.0);
    // p = 2: (h/6)(|a0|^2 + a0·a1 + |a1|^2) with a linear in local data.
    const Eigen::Vector4d& b0 = acc0_;
    const Eigen::Vector4d& b1 = acc1_;
    const Eigen::Matrix4d E4 =
        h_ / 6.0 * (2.0 * b0 * b0.transpose() + b0 * b1.transpose() + b1 * b0.transpose() + 2.0 * b1 * b1.transpose());
    energy_H_.setZero();
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int d = 0; d < Dim; ++d) energy_H_(a * Dim + d, b * Dim + d) = E4(a, b);
  }

  const OcpProblem<Dim>& problem() const { return prob_; }
  int knot_count() const { return N_; }
  double step() const { return h_; }
  const std::vector<double>& times() const { return times_; }
  int constraint_count() const { return static_cast<int>(cons_.size()); }
  bool pinned() const { return prob_.extra.terminal_velocity.has_value(); }

  // Free decision vector (knots 1..N-1, pinned terminal velocity removed).
  int decision_size() const { return (N_ - 1) * S - (pinned() ? Dim : 0); }

  Eigen::VectorXd pack(const Knots& k) const {
    Eigen::VectorXd z(decision_size());
    int o = 0;
    for (int i = 1; i < N_; ++i) {
      z.segment<Dim>(o) = k[i].x;
      o += Dim;
      if (i == N_ - 1 && pinned()) continue;
      z.segment<Dim>(o) = k[i].v;
      o += Dim;
    }
    return z;
  }

  Knots unpack(const Eigen::VectorXd& z) const {
    Knots k(N_);
    k[0] = prob_.initial;
    int o = 0;
    for (int i = 1; i < N_; ++i) {
      k[i].x = z.segment<Dim>(o);
      o += Dim;
      if (i == N_ - 1 && pinned()) {
        k[i].v = *prob_.extra.terminal_velocity;
        continue;
      }
      k[i].v = z.segment<Dim>(o);
      o += Dim;
    }
    return k;
  }

  Eigen::VectorXd pack_gradient(const std::vector<VecS>& g) const {
    Eigen::VectorXd z(decision_size());
    int o = 0;
    for (int i = 1; i < N_; ++i) {
      z.segment<Dim>(o) = g[i - 1].template head<Dim>();
      o += Dim;
      if (i == N_ - 1 && pinned()) continue;
      z.segment<Dim>(o) = g[i - 1].template tail<Dim>();
      o += Dim;
    }
    return z;
  }

  Knots from_trajectory(const Trajectory<Dim>& tr) const {
    Knots k(N_);
    for (int i = 0; i < N_; ++i) k[i] = tr.eval(std::min(times_[i], tr.horizon()));
    k[0] = prob_.initial;
    if (pinned()) k[N_ - 1].v = *prob_.extra.terminal_velocity;
    return k;
  }

  Trajectory<Dim> to_trajectory(const Knots& k) const { return Trajectory<Dim>(times_, k); }

  // Penalized objective f + Σ ψ(c_i; λ_i, ρ). Gradient blocks are per free knot (index i-1).
  double evaluate(const Knots& k, const PenaltyState& pen, std::vector<VecS>* grad, BlockTridiag<Dim>* H,
                  std::vector<double>* cvals = nullptr) const {
    const int nb = N_ - 1;
    if (grad) grad->assign(nb, VecS::Zero());
    if (H) H->reset(nb);
    if (cvals) cvals->assign(cons_.size(), 0.0);
    double f = 0.0;
    VecL zl, gl;
    MatL Hl;
    const bool need = grad || H;
    const auto& cost = prob_.cost;
    const bool run = !cost.running->is_zero();
    Derivs<Dim> dv;
    std::size_t ci = 0;
    for (int i = 0; i < nb; ++i) {
      zl << k[i].x, k[i].v, k[i + 1].x, k[i + 1].v;
      gl.setZero();
      Hl.setZero();
      // Acceleration energy.
      if (cost.p == 2.0) {
        const auto [a0, a1] = end_accelerations(zl);
        f += h_ / 6.0 * (a0.squaredNorm() + a0.dot(a1) + a1.squaredNorm());
        if (need) {
          const Vec<Dim> g0 = h_ / 6.0 * (2.0 * a0 + a1), g1 = h_ / 6.0 * (a0 + 2.0 * a1);
          for (int a = 0; a < 4; ++a) gl.template segment<Dim>(a * Dim) += acc0_(a) * g0 + acc1_(a) * g1;
          Hl += energy_H_;
        }
      } else {
        energy_p(zl, f, gl, Hl, need);
      }
      // Running cost.
      if (run) {
        for (int q = 0; q < 4; ++q) {
          const Jac J = jac(gauss_pos_[q], gauss_vel_[q]);
          const VecS st = J * zl;
          State<Dim> s{st.template head<Dim>(), st.template tail<Dim>()};
          const double w = h_ * Gauss4::weights[q];
          const double t = quad_time(prob_.t0, times_, i, q);
          if (need) {
            cost.running->eval(s, t, dv);
            f += w * dv.f;
            gl += w * J.transpose() * dv.g;
            Hl += w * J.transpose() * dv.H * J;
          } else {
            f += w * cost.running->value(s, t);
          }
        }
      }
      // Constraints belonging to this segment.
      while (ci < cons_.size() && cons_[ci].seg == i) {
        const double c = constraint(cons_[ci], zl, pen, ci, f, gl, Hl, need);
        if (cvals) (*cvals)[ci] = c;
        ++ci;
      }
      if (need) scatter(i, gl, Hl, grad, H);
    }
    // Terminal cost on the last knot.
    if (!cost.terminal->is_zero()) {
      if (need) {
        cost.terminal->eval(k[N_ - 1], dv);
        f += dv.f;
        if (grad) (*grad)[nb - 1] += dv.g;
        if (H) H->diag[nb - 1] += dv.H;
      } else {
        f += cost.terminal->value(k[N_ - 1]);
      }
    }
    if (pinned()) {
      if (grad) (*grad)[nb - 1].template tail<Dim>().setZero();
      if (H) {
        auto& D = H->diag[nb - 1];
        D.template bottomRows<Dim>().setZero();
        D.template rightCols<Dim>().setZero();
        D.template bottomRightCorner<Dim, Dim>().setIdentity();
        if (nb >= 2) H->off[nb - 2].template rightCols<Dim>().setZero();
      }
    }
    return f;
  }

  // Exact constraint values, used for the violation measure and multiplier updates.
  std::vector<double> constraint_values(const Knots& k) const {
    PenaltyState pen;
    pen.lambda.assign(cons_.size(), 0.0);
    pen.rho = 1.0;
    std::vector<double> c;
    evaluate(k, pen, nullptr, nullptr, &c);
    return c;
  }

 private:
  Eigen::Vector4d pos_basis(double t) const {
    const double t2 = t * t, t3 = t2 * t;
    return {2 * t3 - 3 * t2 + 1, h_ * (t3 - 2 * t2 + t), -2 * t3 + 3 * t2, h_ * (t3 - t2)};
  }
  Eigen::Vector4d vel_basis(double t) const {
    const double t2 = t * t;
    return {(6 * t2 - 6 * t) / h_, 3 * t2 - 4 * t + 1, (-6 * t2 + 6 * t) / h_, 3 * t2 - 2 * t};
  }
  Eigen::Vector4d acc_basis(double t) const {
    return {(12 * t - 6) / (h_ * h_), (6 * t - 4) / h_, (-12 * t + 6) / (h_ * h_), (6 * t - 2) / h_};
  }

  static Jac jac(const Eigen::Vector4d& bp, const Eigen::Vector4d& bv) {
    Jac J = Jac::Zero();
    for (int a = 0; a < 4; ++a)
      for (int d = 0; d < Dim; ++d) {
        J(d, a * Dim + d) = bp(a);
        J(Dim + d, a * Dim + d) = bv(a);
      }
    return J;
  }

  // Row selecting component d of Σ_a b(a) z_a.
  static VecL row(const Eigen::Vector4d& b, const Vec<Dim>& dir) {
    VecL r;
    for (int a = 0; a < 4; ++a)
      for (int d = 0; d < Dim; ++d) r(a * Dim + d) = b(a) * dir(d);
    return r;
  }

  // Accelerations at both ends of a segment from position differences; the 1/h² terms cancel otherwise.
  std::pair<Vec<Dim>, Vec<Dim>> end_accelerations(const VecL& z) const {
    const Vec<Dim> dx = z.template segment<Dim>(2 * Dim) - z.template segment<Dim>(0);
    const Vec<Dim> v0 = z.template segment<Dim>(Dim), v1 = z.template segment<Dim>(3 * Dim);
    const Vec<Dim> slope = 6.0 / (h_ * h_) * dx;
    return {slope - (4.0 * v0 + 2.0 * v1) / h_, -slope + (2.0 * v0 + 4.0 * v1) / h_};
  }

  static Vec<Dim> combine(const Eigen::Vector4d& b, const VecL& z) {
    Vec<Dim> out = Vec<Dim>::Zero();
    for (int a = 0; a < 4; ++a) out += b(a) * z.template segment<Dim>(a * Dim);
    return out;
  }

  void energy_p(const VecL& z, double& f, VecL& g, MatL& H, bool need) const {
    // Gauss-Legendre 16 points; the acceleration is linear in τ.
    static const auto rule = [] {
      Eigen::VectorXd x(16), w(16);
      // Golub-Welsch for Legendre on [-1, 1].
      Eigen::MatrixXd Jm = Eigen::MatrixXd::Zero(16, 16);
      for (int i = 1; i < 16; ++i) {
        const double b = i / std::sqrt(4.0 * i * i - 1.0);
        Jm(i, i - 1) = Jm(i - 1, i) = b;
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Jm);
      for (int i = 0; i < 16; ++i) {
        x(i) = 0.5 * (es.eigenvalues()(i) + 1.0);
        w(i) = es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
      }
      return std::make_pair(x, w);
    }();
    const double p = prob_.cost.p;
    const auto [a0, a1] = end_accelerations(z);
    for (int q = 0; q < 16; ++q) {
      const double tau = rule.first(q);
      const Eigen::Vector4d b = (1.0 - tau) * acc0_ + tau * acc1_;
      const Vec<Dim> a = (1.0 - tau) * a0 + tau * a1;
      const double na = a.norm();
      const double w = h_ * rule.second(q);
      f += w * std::pow(na, p) / p;
      if (!need || na == 0.0) continue;
      const double np2 = std::pow(na, p - 2.0);
      Mat<Dim> Ha = np2 * (Mat<Dim>::Identity() + (p - 2.0) * (a / na) * (a / na).transpose());
      Eigen::Matrix<double, Dim, L> B = Eigen::Matrix<double, Dim, L>::Zero();
      for (int aa = 0; aa < 4; ++aa)
        for (int d = 0; d < Dim; ++d) B(d, aa * Dim + d) = b(aa);
      g += w * np2 * B.transpose() * a;
      H += w * B.transpose() * Ha * B;
    }
  }

  // AL term ψ = ((λ + ρc)_+^2 - λ^2) / (2ρ); returns c.
  double constraint(const Con& con, const VecL& z, const PenaltyState& pen, std::size_t idx, double& f, VecL& g,
                    MatL& H, bool need) const {
    double c = 0.0;
    VecL dc = VecL::Zero();
    Mat<Dim> hc = Mat<Dim>::Zero();
    Eigen::Vector4d bp;
    switch (con.kind) {
      case Kind::Point: {
        bp = sample_pos_[con.sample];
        const auto e = containment(prob_.domain, con.which, combine(bp, z));
        c = e.c;
        dc = row(bp, e.grad);
        hc = e.hess;
        break;
      }
      case Kind::SegmentMax: {
        const Vec<Dim> n = containment(prob_.domain, con.which, Vec<Dim>::Zero()).grad;
        const double tau = argmax_directional(z, n, +1.0);
        bp = pos_basis(tau);
        const auto e = containment(prob_.domain, con.which, combine(bp, z));
        c = e.c;
        dc = row(bp, e.grad);
        break;
      }
      case Kind::FloorPoint: {
        const Eigen::Vector4d& bv = sample_vel_[con.sample];
        Vec<Dim> dir = Vec<Dim>::Zero();
        dir(con.which) = -1.0;
        c = (*prob_.extra.velocity_floor)(con.which) + dir.dot(combine(bv, z));
        dc = row(bv, dir);
        break;
      }
      case Kind::FloorSegmentMin: {
        Vec<Dim> dir = Vec<Dim>::Zero();
        dir(con.which) = -1.0;
        const double tau = argmax_velocity(z, dir);
        const Eigen::Vector4d bv = vel_basis(tau);
        c = (*prob_.extra.velocity_floor)(con.which) + dir.dot(combine(bv, z));
        dc = row(bv, dir);
        break;
      }
    }
    const double lam = pen.lambda.empty() ? 0.0 : pen.lambda[idx];
    const double act = lam + pen.rho * c;
    if (act > 0.0) {
      f += (act * act - lam * lam) / (2.0 * pen.rho);
      if (need) {
        g += act * dc;
        H += pen.rho * dc * dc.transpose();
        if (con.kind == Kind::Point && !hc.isZero()) {
          Eigen::Matrix<double, Dim, L> B = Eigen::Matrix<double, Dim, L>::Zero();
          for (int a = 0; a < 4; ++a)
            for (int d = 0; d < Dim; ++d) B(d, a * Dim + d) = bp(a);
          H += act * B.transpose() * hc * B;
        }
      }
    } else {
      f -= lam * lam / (2.0 * pen.rho);
    }
    return c;
  }

  // τ in [0, 1] maximizing sgn · n·ξ(τ) on the segment.
  double argmax_directional(const VecL& z, const Vec<Dim>& n, double sgn) const {
    double u[4];
    for (int a = 0; a < 4; ++a) u[a] = sgn * n.dot(z.template segment<Dim>(a * Dim));
    auto val = [&](double t) {
      const Eigen::Vector4d b = pos_basis(t);
      return b(0) * u[0] + b(1) * u[1] + b(2) * u[2] + b(3) * u[3];
    };
    const double c2 = 6 * u[0] + 3 * h_ * u[1] - 6 * u[2] + 3 * h_ * u[3];
    const double c1 = -6 * u[0] - 4 * h_ * u[1] + 6 * u[2] - 2 * h_ * u[3];
    const double c0 = h_ * u[1];
    double best = 1.0, bv = val(1.0);
    const double v0 = val(0.0);
    if (v0 > bv) {
      best = 0.0;
      bv = v0;
    }
    for (double t : poly::quadratic_roots(c0, c1, c2, 0.0, 1.0)) {
      const double vt = val(t);
      if (vt > bv) {
        bv = vt;
        best = t;
      }
    }
    return best;
  }

  // τ in [0, 1] maximizing dir·η(τ); η is quadratic so its critical point is where dir·α vanishes.
  double argmax_velocity(const VecL& z, const Vec<Dim>& dir) const {
    auto val = [&](double t) { return dir.dot(combine(vel_basis(t), z)); };
    const auto [e0, e1] = end_accelerations(z);
    const double a0 = dir.dot(e0), a1 = dir.dot(e1);
    double best = 1.0, bv = val(1.0);
    if (val(0.0) > bv) {
      best = 0.0;
      bv = val(0.0);
    }
    if ((a0 > 0.0) != (a1 > 0.0) && a0 != a1) {
      const double t = a0 / (a0 - a1);
      if (t > 0.0 && t < 1.0 && val(t) > bv) best = t;
    }
    return best;
  }

  void scatter(int i, const VecL& gl, const MatL& Hl, std::vector<VecS>* grad, BlockTridiag<Dim>* H) const {
    // Local block 0 is knot i (block i-1), local block 1 is knot i+1 (block i).
    if (grad) {
      if (i >= 1) (*grad)[i - 1] += gl.template head<S>();
      (*grad)[i] += gl.template tail<S>();
    }
    if (H) {
      if (i >= 1) {
        H->diag[i - 1] += Hl.template topLeftCorner<S, S>();
        H->off[i - 1] += Hl.template topRightCorner<S, S>();
      }
      H->diag[i] += Hl.template bottomRightCorner<S, S>();
    }
  }

  OcpProblem<Dim> prob_;
  int N_, m_;
  double h_ = 1.0;
  std::vector<double> times_;
  std::vector<Con> cons_;
  std::vector<Eigen::Vector4d> sample_pos_, sample_vel_, gauss_pos_, gauss_vel_;
  Eigen::Vector4d acc0_, acc1_;
  MatL energy_H_;
};

// Exact analytic gradient of the penalized objective w.r.t. the free knot states.
template <int Dim>
Eigen::VectorXd penalized_gradient(const Transcription<Dim>& tr, const Eigen::VectorXd& z, const PenaltyState& pen) {
  std::vector<typename Transcription<Dim>::VecS> g;
  tr.evaluate(tr.unpack(z), pen, &g, nullptr);
  return tr.pack_gradient(g);
}

template <int Dim>
double penalized_value(const Transcription<Dim>& tr, const Eigen::VectorXd& z, const PenaltyState& pen) {
  return tr.evaluate(tr.unpack(z), pen, nullptr, nullptr);
}

template <int Dim>
struct OptResult {
  Trajectory<Dim> trajectory;
  double value = kInf;
  double constraint_violation = kInf;
  double first_order_residual = kInf;
  int starts_used = 0;
  bool converged = false;
  std::vector<Trajectory<Dim>> minimizers;
  std::vector<double> minimizer_values;
};

namespace detail {

template <int Dim>
struct StartOutcome {
  typename Transcription<Dim>::Knots knots;
  double value = kInf;
  double violation = kInf;
  double residual = kInf;
  bool converged = false;
};

template <int Dim>
double max_violation(const std::vector<double>& c) {
  double v = 0.0;
  for (double x : c) v = std::max(v, x);
  return v;
}

// Modified Newton with backtracking on the augmented Lagrangian for fixed (λ, ρ).
template <int Dim>
bool newton_inner(const Transcription<Dim>& tr, typename Transcription<Dim>::Knots& k, const PenaltyState& pen,
                  const OCPConfig& cfg, double& residual) {
  using VecS = typename Transcription<Dim>::VecS;
  std::vector<VecS> g, d;
  BlockTridiag<Dim> H;
  const int nb = tr.knot_count() - 1;
  int stall = 0;
  for (int it = 0; it < cfg.max_inner; ++it) {
    const double f = tr.evaluate(k, pen, &g, &H);
    residual = 0.0;
    for (const auto& gi : g) residual = std::max(residual, gi.cwiseAbs().maxCoeff());
    std::vector<VecS> rhs(nb);
    for (int i = 0; i < nb; ++i) rhs[i] = -g[i];
    double dscale = 0.0;
    for (const auto& D : H.diag) dscale = std::max(dscale, D.diagonal().cwiseAbs().maxCoeff());
    double delta = 0.0;
    bool ok = false;
    for (int tries = 0; tries < 60 && !ok; ++tries) {
      ok = H.solve(rhs, delta, d);
      if (ok) {
        double gd = 0.0;
        for (int i = 0; i < nb; ++i) gd += g[i].dot(d[i]);
        ok = gd < 0.0 || residual == 0.0;
      }
      if (!ok) delta = delta == 0.0 ? 1e-10 * std::max(dscale, 1.0) : delta * 10.0;
    }
    if (!ok) return false;
    double gd = 0.0;
    for (int i = 0; i < nb; ++i) gd += g[i].dot(d[i]);
    if (-gd <= 2.0 * cfg.inner_tol * (1.0 + std::abs(f))) return true;
    double alpha = 1.0, ft = f;
    typename Transcription<Dim>::Knots trial = k;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      for (int i = 0; i < nb; ++i) {
        trial[i + 1].x = k[i + 1].x + alpha * d[i].template head<Dim>();
        trial[i + 1].v = k[i + 1].v + alpha * d[i].template tail<Dim>();
      }
      if (tr.pinned()) trial[nb].v = k[nb].v;
      ft = tr.evaluate(trial, pen, nullptr, nullptr);
      if (ft <= f + 1e-4 * alpha * gd) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    const bool small = -gd <= 1e-8 * (1.0 + std::abs(f));
    if (!accepted) return small;
    k = trial;
    // Active-set cycling near kinks of the penalty leaves only roundoff-level progress.
    stall = f - ft <= 1e-15 * (1.0 + std::abs(f)) ? stall + 1 : 0;
    if (stall >= 3) return small;
  }
  return false;
}

template <int Dim>
StartOutcome<Dim> run_start(const Transcription<Dim>& tr, typename Transcription<Dim>::Knots k, const OCPConfig& cfg) {
  PenaltyState pen;
  pen.lambda.assign(tr.constraint_count(), 0.0);
  const double h = tr.step();
  pen.rho = cfg.penalty_init / (h * h * h);
  StartOutcome<Dim> out;
  double prev_viol = kInf;
  int stuck = 0;
  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    double residual = kInf;
    const bool inner_ok = newton_inner(tr, k, pen, cfg, residual);
    const auto c = tr.constraint_values(k);
    const double viol = max_violation<Dim>(c);
    double compl_gap = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
      compl_gap = std::max(compl_gap, std::abs(std::min(-c[i], pen.lambda[i] / pen.rho)));
    out.residual = residual;
    out.violation = viol;
    if (inner_ok && viol <= cfg.constraint_tol && compl_gap <= cfg.constraint_tol) {
      out.converged = true;
      break;
    }
    // A frozen violation with failing inner solves means conditioning, not the penalty, is the limit.
    stuck = !inner_ok && viol >= prev_viol ? stuck + 1 : 0;
    if (stuck >= 3) break;
    for (std::size_t i = 0; i < c.size(); ++i) pen.lambda[i] = std::max(0.0, pen.lambda[i] + pen.rho * c[i]);
    if (viol > 0.25 * prev_viol) pen.rho = std::min(pen.rho * cfg.penalty_growth, 1e16);
    prev_viol = viol;
  }
  out.knots = std::move(k);
  return out;
}

template <int Dim>
bool lex_less(const std::vector<State<Dim>>& a, const std::vector<State<Dim>>& b) {
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    for (int d = 0; d < Dim; ++d) {
      if (a[i].x(d) != b[i].x(d)) return a[i].x(d) < b[i].x(d);
      if (a[i].v(d) != b[i].v(d)) return a[i].v(d) < b[i].v(d);
    }
  }
  return a.size() < b.size();
}

}  // namespace detail

// Initial guesses in a fixed order: warm starts, oracle profile, feasibility map, brake, hold.
template <int Dim>
std::vector<typename Transcription<Dim>::Knots> initializers(const Transcription<Dim>& tr, const OCPConfig& cfg,
                                                             const std::vector<Trajectory<Dim>>& warm) {
  using Knots = typename Transcription<Dim>::Knots;
  const auto& P = tr.problem();
  const State<Dim>& s = P.initial;
  std::vector<Knots> out;
  for (const auto& w : warm) out.push_back(tr.from_trajectory(w));
  if constexpr (Dim == 1) {
    const auto& iv = P.domain.interval();
    const bool entry = P.extra.terminal_velocity && P.extra.velocity_floor;
    if (cfg.use_oracle_init && entry && P.cost.running->is_zero() && P.cost.terminal->is_zero()) {
      const double w = (*P.extra.terminal_velocity)(0);
      if (s.x(0) < iv.b && s.v(0) > w && w >= 0.0) {
        auto sol = oracle1d::detail::solve_entry({s.x(0) - iv.b, s.v(0), w, P.T, P.T});
        auto t = sol.to_trajectory();
        std::vector<State<1>> ks = t.knots();
        for (auto& kk : ks) kk.x(0) += iv.b;
        out.push_back(tr.from_trajectory(Trajectory<1>(t.times(), ks)));
      }
    }
    if (iv.a == -1.0 && iv.b == 0.0 && is_admissible_state(P.domain, s))
      out.push_back(tr.from_trajectory(feasibility_map_j(s, P.T, P.domain)));
  }
  {
    const double exit = ray_exit(P.domain, s.x, s.v);
    double tbar = std::min(P.T, 2.0 * exit);
    if (!(tbar > 0.0)) tbar = std::min(P.T, 0.25);
    try {
      out.push_back(tr.from_trajectory(brake_maneuver(s, tbar, P.T, P.domain, Guard::None)));
    } catch (const Error&) {
      out.push_back(tr.from_trajectory(straight_brake(s, tbar, P.T)));
    }
  }
  {
    Knots hold(tr.knot_count(), State<Dim>{s.x, Vec<Dim>::Zero()});
    hold[0] = s;
    if (tr.pinned()) hold.back().v = *P.extra.terminal_velocity;
    out.push_back(hold);
  }
  // Constructive guesses often coincide (the feasibility map brakes exactly like brake_maneuver).
  std::vector<Knots> uniq;
  for (auto& k : out) {
    bool dup = false;
    for (const auto& u : uniq) dup = dup || sup_distance(tr.to_trajectory(u), tr.to_trajectory(k)) <= cfg.dedup_tol;
    if (!dup) uniq.push_back(std::move(k));
  }
  out = std::move(uniq);
  // Seeded perturbations of the brake guess fill any remaining slots.
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const Knots base = out.size() >= 2 ? out[out.size() - 2] : out.back();
  while (static_cast<int>(out.size()) < cfg.multistart) {
    Knots k = base;
    const double amp = 0.05;
    for (std::size_t i = 1; i < k.size(); ++i)
      for (int d = 0; d < Dim; ++d) k[i].v(d) += amp * nd(rng);
    out.push_back(k);
  }
  if (static_cast<int>(out.size()) > cfg.multistart) out.resize(cfg.multistart);
  return out;
}

inline constexpr int kCoarsestKnots = 24;

// Knot counts visited by solve(), coarsest first; the last entry is N.
inline std::vector<int> continuation_levels(int N) {
  std::vector<int> levels{N};
  while (levels.back() > 4 * kCoarsestKnots) levels.push_back((levels.back() - 1) / 4 + 1);
  std::reverse(levels.begin(), levels.end());
  return levels;
}

template <int Dim>
OptResult<Dim> solve(const OcpProblem<Dim>& prob, const OCPConfig& cfg,
                     const std::vector<Trajectory<Dim>>& warm = {}) {
  validate(cfg);
  validate(prob.cost);
  if (!(prob.T > 0.0)) fail(Errc::InvalidArgument, "horizon must be positive");
  if (!is_admissible_state(prob.domain, prob.initial)) fail(Errc::StateNotAdmissible, "solve start state");
  // Coarse-to-fine levels: contact regions move a few segments per Newton step, so fine grids start near the answer.
  const std::vector<int> levels = continuation_levels(cfg.N);
  std::vector<Transcription<Dim>> trs;
  for (int n : levels) trs.emplace_back(prob, n, cfg.samples_per_segment);
  const Transcription<Dim>& tr = trs.back();
  const auto starts = initializers(tr, cfg, warm);
  std::vector<detail::StartOutcome<Dim>> outs;
  std::vector<Trajectory<Dim>> coarse_seen;
  for (const auto& k0 : starts) {
    Trajectory<Dim> cur = tr.to_trajectory(k0);
    detail::StartOutcome<Dim> o;
    bool repeat = false;
    for (std::size_t l = 0; l < trs.size() && !repeat; ++l) {
      OCPConfig lc = cfg;
      // Coarse levels only supply warm starts for the next one.
      if (l + 1 < trs.size()) {
        lc.constraint_tol = std::max(cfg.constraint_tol, 1e-6);
        lc.inner_tol = std::max(cfg.inner_tol, 1e-10);
        lc.max_inner = std::min(cfg.max_inner, 50);
      }
      o = detail::run_start(trs[l], trs[l].from_trajectory(cur), lc);
      cur = trs[l].to_trajectory(o.knots);
      // Starts that land on an already refined coarse solution would only reproduce it.
      if (l == 0 && trs.size() > 1) {
        for (const auto& c : coarse_seen) repeat = repeat || sup_distance(c, cur) <= cfg.dedup_tol;
        if (!repeat) coarse_seen.push_back(cur);
      }
    }
    if (repeat) continue;
    o.value = cost_of(cur, prob.cost, prob.t0);
    outs.push_back(std::move(o));
  }
  // Deterministic order: feasible first, then value, then lexicographic knot data.
  const double feas = 10.0 * cfg.constraint_tol;
  std::vector<int> idx(outs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    const bool fa = outs[a].violation <= feas, fb = outs[b].violation <= feas;
    if (fa != fb) return fa;
    if (outs[a].value != outs[b].value) return outs[a].value < outs[b].value;
    return detail::lex_less<Dim>(outs[a].knots, outs[b].knots);
  });
  OptResult<Dim> r;
  const auto& best = outs[idx.front()];
  r.trajectory = tr.to_trajectory(best.knots);
  r.value = best.value;
  r.constraint_violation = best.violation;
  r.first_order_residual = best.residual;
  r.converged = best.converged;
  r.starts_used = static_cast<int>(starts.size());
  for (int i : idx) {
    if (outs[i].violation > feas) continue;
    auto t = tr.to_trajectory(outs[i].knots);
    bool dup = false;
    for (const auto& m : r.minimizers) dup = dup || sup_distance(m, t) <= cfg.dedup_tol;
    if (!dup) {
      r.minimizers.push_back(t);
      r.minimizer_values.push_back(outs[i].value);
    }
  }
  return r;
}

template <int Dim>
OptResult<Dim> solve(const State<Dim>& s, const CostSpec<Dim>& spec, const Domain<Dim>& dom, const OCPConfig& cfg) {
  OcpProblem<Dim> p{dom, s, spec, cfg.T, 0.0, {}};
  return solve(p, cfg);
}

template <int Dim>
double value_u(const State<Dim>& s, const CostSpec<Dim>& spec, const Domain<Dim>& dom, const OCPConfig& cfg) {
  return solve(s, spec, dom, cfg).value;
}

// Entry problem K_{θ,w} on [-1, 0] posed as an OCP over [0, θ].
inline OcpProblem<1> entry_as_ocp(const oracle1d::EntryProblem& e) {
  OcpProblem<1> p{Domain<1>(Interval{-1.0, 0.0}), state1(e.x, e.v), CostSpec<1>{}, e.theta, 0.0, {}};
  p.extra.terminal_velocity = Vec<1>::Constant(e.w);
  p.extra.velocity_floor = Vec<1>::Constant(e.w);
  return p;
}

struct GammaCDetail {
  double C = 0.0;
  double energy_cap = 0.0;    // bound on ½‖η'‖²
  double velocity_cap = 0.0;  // bound on sup|η|
  int samples = 0;
};

// Competitor-based bound: ½‖η'‖² ≤ J(competitor) + M(T+1) and sup|η| ≤ |v| + √T ‖η'‖.
// `extra_states` are added to the grid; `additive_sup` bounds any cost added on top of `spec` (e.g. a coupling).
template <int Dim>
GammaCDetail gamma_c_bound_detail(const ThetaRSpec<Dim>& th, const CostSpec<Dim>& spec, double T, int grid = 201,
                                  const std::vector<State<Dim>>& extra_states = {}, double additive_sup = 0.0) {
  GammaCDetail out;
  auto account = [&](const State<Dim>& s, const Trajectory<Dim>& comp) {
    const double E = std::max(0.0, cost_of(comp, spec) + (spec.M + additive_sup) * (T + 1.0));
    const double l2 = std::sqrt(2.0 * E);
    const double vcap = s.v.norm() + std::sqrt(T) * l2;
    out.energy_cap = std::max(out.energy_cap, E);
    out.velocity_cap = std::max(out.velocity_cap, vcap);
    out.C = std::max({out.C, vcap, l2});
    ++out.samples;
  };
  if constexpr (Dim == 1) {
    const auto& iv = th.domain.interval();
    const bool canonical = iv.a == -1.0 && iv.b == 0.0;
    auto visit = [&](const State<1>& s) {
      if (!in_theta_r(th, s) || !is_admissible_state(th.domain, s)) return;
      if (canonical) {
        account(s, feasibility_map_j(s, T, th.domain));
      } else {
        const double tb = std::min(T, 2.0 * ray_exit(th.domain, s.x, s.v));
        account(s, tb > 0.0 ? straight_brake(s, tb, T) : Trajectory<1>::rest(s.x, T));
      }
    };
    for (const auto& s : extra_states) visit(s);
    for (int i = 0; i < grid; ++i) {
      const double x = iv.a + (iv.b - iv.a) * static_cast<double>(i) / (grid - 1);
      double vhi, vlo;
      if (th.mode == ThetaMode::Interval1D) {
        vhi = std::cbrt(th.r * (iv.b - x));
        vlo = -std::cbrt(th.r * (x - iv.a));
      } else {
        vhi = std::min(th.r, std::pow(iv.b - x, th.rho / 3.0));
        vlo = -std::min(th.r, std::pow(x - iv.a, th.rho / 3.0));
      }
      for (int j = 0; j < grid; ++j) {
        const double v = vlo + (vhi - vlo) * static_cast<double>(j) / (grid - 1);
        visit(state1(x, v));
      }
    }
  } else {
    // Positions on a grid over the bounding box, velocities on a polar grid of radius r.
    Eigen::Vector2d lo, hi;
    if (th.domain.kind() == DomainKind::Disc) {
      const auto& d = th.domain.disc();
      lo = d.center.array() - d.radius;
      hi = d.center.array() + d.radius;
    } else {
      lo = hi = th.domain.polygon().vertex(0);
      for (const auto& v : th.domain.polygon().vertices()) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
      }
    }
    auto visit = [&](const State<2>& s) {
      if (!in_theta_r(th, s) || !is_admissible_state(th.domain, s)) return;
      double tb = std::min(T, 2.0 * ray_exit(th.domain, s.x, s.v));
      if (!(tb > 0.0)) tb = std::min(T, 0.25);
      try {
        account(s, brake_maneuver(s, tb, T, th.domain, Guard::None));
      } catch (const Error&) {
      }
    };
    for (const auto& s : extra_states) visit(s);
    const int gp = std::max(5, grid / 8), gv = std::max(5, grid / 8);
    for (int i = 0; i < gp; ++i)
      for (int j = 0; j < gp; ++j) {
        Eigen::Vector2d x(lo.x() + (hi.x() - lo.x()) * i / (gp - 1.0), lo.y() + (hi.y() - lo.y()) * j / (gp - 1.0));
        if (signed_distance(th.domain, x) > 0.0) continue;
        for (int a = 0; a < gv; ++a)
          for (int b = 0; b < 2 * gv; ++b) {
            const double rad = th.r * a / (gv - 1.0), ang = 2.0 * std::numbers::pi * b / (2.0 * gv);
            visit(State<2>{x, Eigen::Vector2d(rad * std::cos(ang), rad * std::sin(ang))});
          }
      }
  }
  if (out.C <= 0.0) out.C = std::numeric_limits<double>::min();
  return out;
}

template <int Dim>
GammaCBound gamma_c_bound(const ThetaRSpec<Dim>& th, const CostSpec<Dim>& spec, double T) {
  return GammaCBound{gamma_c_bound_detail(th, spec, T).C};
}

}  // namespace cmfg
