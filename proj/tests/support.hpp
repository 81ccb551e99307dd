#pragma once

#include <random>

#include "cmfg/ocp.hpp"

namespace cmfg::testkit {

// ‖g - g_fd‖ / max(‖g‖, ‖g_fd‖) with central differences of step h.
template <int Dim>
double fd_gradient_error(const Transcription<Dim>& tr, const Eigen::VectorXd& z, const PenaltyState& pen,
                         double h = 1e-6) {
  const Eigen::VectorXd g = penalized_gradient(tr, z, pen);
  Eigen::VectorXd fd(z.size());
  Eigen::VectorXd zp = z;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    zp(i) = z(i) + h;
    const double fp = penalized_value(tr, zp, pen);
    zp(i) = z(i) - h;
    const double fm = penalized_value(tr, zp, pen);
    zp(i) = z(i);
    fd(i) = (fp - fm) / (2.0 * h);
  }
  const double scale = std::max(g.norm(), fd.norm());
  return scale == 0.0 ? 0.0 : (g - fd).norm() / scale;
}

// A decision vector near a brake maneuver, perturbed so that some constraints are active or violated,
// together with a random multiplier state.
template <int Dim>
std::pair<Eigen::VectorXd, PenaltyState> random_decision(const Transcription<Dim>& tr, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const auto& P = tr.problem();
  const double tbar = std::min(P.T, 0.5 * P.T + U(rng) * P.T);
  const auto base = straight_brake(P.initial, tbar, P.T);
  auto knots = tr.from_trajectory(base);
  const double amp = 0.02 + 0.2 * U(rng);
  for (std::size_t i = 1; i < knots.size(); ++i)
    for (int d = 0; d < Dim; ++d) {
      knots[i].x(d) += amp * nd(rng);
      knots[i].v(d) += amp * nd(rng);
    }
  PenaltyState pen;
  pen.rho = std::pow(10.0, -1.0 + 3.0 * U(rng));
  pen.lambda.resize(tr.constraint_count());
  for (auto& l : pen.lambda) l = U(rng) < 0.5 ? 0.0 : U(rng);
  return {tr.pack(knots), pen};
}

}  // namespace cmfg::testkit
