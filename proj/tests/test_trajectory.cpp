#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <random>

#include "cmfg/trajectory.hpp"

using namespace cmfg;

namespace {

Vec<1> s1(double x) { return Vec<1>::Constant(x); }
const Domain<1> kUnit{Interval{-1.0, 0.0}};

}  // namespace

TEST(CubicConnect, Examples) {
  const auto line = cubic_connect<1>(2.0, s1(0), s1(1), s1(2), s1(1));
  EXPECT_EQ(line.A(0), 0.0);
  EXPECT_EQ(line.B(0), 0.0);
  for (double s : {0.0, 0.5, 1.3, 2.0}) EXPECT_NEAR(line.pos(s)(0), s, 1e-15);
  const auto q = cubic_connect<1>(1.0, s1(0), s1(0), s1(1), s1(0));
  for (double s : {0.0, 0.25, 0.5, 0.9}) EXPECT_NEAR(q.pos(s)(0), 3 * s * s - 2 * s * s * s, 1e-15);
  EXPECT_EQ(q.vel(1.0)(0), 0.0);
  EXPECT_NEAR(q.pos(0.5)(0), 0.5, 1e-15);
  EXPECT_NEAR(q.vel(0.5)(0), 1.5, 1e-15);
}

TEST(CubicConnect, NonpositiveDuration) {
  try {
    cubic_connect<1>(0.0, s1(0), s1(0), s1(0), s1(0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonpositiveDuration);
  }
}

TEST(CubicConnect, BoundaryResiduals) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double t = std::exp(2 * U(rng));
    const Eigen::Vector2d x(U(rng), U(rng)), v(U(rng), U(rng)), y(U(rng), U(rng)), w(U(rng), U(rng));
    const auto q = cubic_connect<2>(t, x, v, y, w);
    const double sc = 1.0 + x.norm() + v.norm() * t + y.norm();
    EXPECT_LT((q.x + 0.0 * q.A - x).norm(), 1e-12);
    EXPECT_LT((q.v - v).norm(), 1e-12);
    // Evaluate through the polynomial, not the endpoint shortcut.
    const Eigen::Vector2d yp = x + t * (v + t * (q.A + t * q.B));
    const Eigen::Vector2d wp = v + t * (2.0 * q.A + 3.0 * t * q.B);
    EXPECT_LT((yp - y).norm(), 1e-12 * sc);
    EXPECT_LT((wp - w).norm(), 1e-12 * sc / std::min(1.0, t));
  }
}

TEST(SegmentEnergy, Examples) {
  const auto q = cubic_connect<1>(1.0, s1(0), s1(0), s1(1), s1(0));
  EXPECT_NEAR(segment_energy(q, 2.0), 6.0, 1e-13);
  EXPECT_EQ(segment_energy(cubic_connect<1>(2.0, s1(0), s1(1), s1(2), s1(1)), 2.0), 0.0);
}

TEST(SegmentEnergy, ClosedFormMatchesQuadrature) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double t = std::exp(U(rng));
    const auto q = cubic_connect<2>(t, Eigen::Vector2d(U(rng), U(rng)), Eigen::Vector2d(U(rng), U(rng)),
                                    Eigen::Vector2d(U(rng), U(rng)), Eigen::Vector2d(U(rng), U(rng)));
    const double ref = 0.5 * boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                                 [&](double s) { return q.acc(s).squaredNorm(); }, 0.0, t, 0, 1e-15);
    EXPECT_NEAR(segment_energy(q, 2.0), ref, 1e-10 * (1.0 + ref));
  }
}

TEST(SegmentEnergy, GeneralExponent) {
  const auto q = cubic_connect<1>(1.0, s1(0), s1(0), s1(1), s1(0));
  for (double p : {1.5, 3.0}) {
    const double ref = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                           [&](double s) { return std::pow(std::abs(q.acc(s)(0)), p); }, 0.0, 1.0, 15, 1e-14) /
                       p;
    EXPECT_NEAR(segment_energy(q, p), ref, 1e-10);
    const auto q2 = cubic_connect<2>(1.0, Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 0),
                                     Eigen::Vector2d(0, 0));
    const double ref2 = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                            [&](double s) { return std::pow(q2.acc(s).norm(), p); }, 0.0, 1.0, 15, 1e-14) /
                        p;
    EXPECT_NEAR(segment_energy(q2, p), ref2, 1e-10);
  }
}

TEST(SegmentEnergy, ScalingAndReversal) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double t = 1.0 + U(rng) * 0.5, lam = 3.0 * U(rng);
    const Vec<1> v = s1(U(rng)), y = s1(U(rng)), w = s1(U(rng));
    const double e = segment_energy(cubic_connect<1>(t, s1(0), v, y, w));
    EXPECT_NEAR(segment_energy(cubic_connect<1>(t, s1(0), lam * v, lam * y, lam * w)), lam * lam * e, 1e-11 * (1 + e));
    // Time reversal: start at (y, -w), end at (0, -v).
    EXPECT_NEAR(segment_energy(cubic_connect<1>(t, y, -w, s1(0), -v)), e, 1e-11 * (1 + e));
  }
}

TEST(TrajectoryEval, KnotsAndMidpoints) {
  const auto tr = Trajectory<1>({0.0, 1.0, 2.5}, {state1(0, 0), state1(1, 0), state1(0.5, -1)});
  for (int k = 0; k < 3; ++k) {
    const auto s = tr.eval(tr.times()[k]);
    EXPECT_EQ(s.x(0), tr.knot(k).x(0));
    EXPECT_EQ(s.v(0), tr.knot(k).v(0));
  }
  EXPECT_NEAR(tr.eval(0.5).x(0), 0.5, 1e-15);
  EXPECT_NEAR(tr.eval(0.5).v(0), 1.5, 1e-15);
  const auto q = cubic_connect<1>(1.5, s1(1), s1(0), s1(0.5), s1(-1));
  EXPECT_NEAR(tr.eval(1.7).x(0), q.pos(0.7)(0), 1e-15);
}

TEST(TrajectoryEval, OutOfRange) {
  const auto tr = Trajectory<1>::rest(s1(0.0), 1.0);
  try {
    tr.eval(1.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TimeOutOfRange);
  }
  EXPECT_THROW(tr.eval(-0.1), Error);
}

TEST(TrajectoryEval, ReinterpolationIsExact) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<State<2>> ks;
  for (int i = 0; i < 9; ++i) ks.push_back(state2(U(rng), U(rng), U(rng), U(rng)));
  const auto tr = Trajectory<2>::uniform(2.0, ks);
  const auto again = Trajectory<2>(tr.times(), tr.knots());
  for (int i = 0; i <= 100; ++i) {
    const double t = 2.0 * i / 100.0;
    EXPECT_EQ(tr.eval(t).x, again.eval(t).x);
    EXPECT_EQ(tr.eval(t).v, again.eval(t).v);
  }
}

TEST(Admissible, Examples) {
  EXPECT_TRUE(is_admissible(Trajectory<1>::rest(s1(-0.5), 1.0), kUnit));
  // Leaves with v = 1 and returns: peaks near x = 0.086.
  const auto over = Trajectory<1>({0.0, 1.0}, {state1(-0.01, 1), state1(-0.01, 1)});
  EXPECT_FALSE(is_admissible(over, kUnit));
}

TEST(Admissible, DetectsInteriorOvershoot) {
  // Both knots sit on the boundary; the cubic bulges 1.5e-4 past it in between.
  const auto q = Trajectory<1>({0.0, 1.0}, {state1(0.0, 0.0), state1(0.0, -1e-3)});
  EXPECT_FALSE(is_admissible(q, kUnit, 1e-12, 2));
  EXPECT_TRUE(is_admissible(q, kUnit, 2e-4, 2));
}

TEST(GammaC, Examples) {
  EXPECT_TRUE(in_gamma_c(Trajectory<1>::rest(s1(-0.5), 3.0), GammaCBound{1e-9}));
  const auto e6 = Trajectory<1>({0.0, 1.0}, {state1(0, 0), state1(1, 0)});
  EXPECT_FALSE(in_gamma_c(e6, GammaCBound{1.0}));
  EXPECT_TRUE(in_gamma_c(e6, GammaCBound{std::sqrt(12.0)}));
  EXPECT_NEAR(velocity_sup(e6), 1.5, 1e-15);
}

TEST(GammaC, Monotone) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<State<1>> ks;
    for (int k = 0; k < 4; ++k) ks.push_back(state1(U(rng), U(rng)));
    const auto tr = Trajectory<1>::uniform(1.0, ks);
    const double c1 = 5 * (U(rng) + 1.0), c2 = c1 + 5 * (U(rng) + 1.0);
    if (in_gamma_c(tr, GammaCBound{c1})) {
      EXPECT_TRUE(in_gamma_c(tr, GammaCBound{c2}));
    }
  }
}

TEST(Trajectory, RejectsBadKnots) {
  EXPECT_THROW(Trajectory<1>({0.0}, {state1(0, 0)}), Error);
  EXPECT_THROW(Trajectory<1>({0.0, 0.0}, {state1(0, 0), state1(0, 0)}), Error);
  EXPECT_THROW(Trajectory<1>({0.1, 1.0}, {state1(0, 0), state1(0, 0)}), Error);
}
