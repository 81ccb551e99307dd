#include <gtest/gtest.h>

#include <random>

#include "cmfg/ocp.hpp"
#include "support.hpp"

using namespace cmfg;

namespace {

const Domain<1> kUnit{Interval{-1.0, 0.0}};
const Domain<2> kDisc{Disc{}};
const Domain<2> kSquare{ConvexPolygon::unit_square()};

OCPConfig small_cfg(int N = 64, double T = 1.0) {
  OCPConfig c;
  c.N = N;
  c.T = T;
  c.multistart = 2;
  return c;
}

CostSpec<1> quad1() {
  CostSpec<1> s;
  s.running = std::make_shared<QuadraticRunning<1>>(1.0, 0.5, Vec<1>::Constant(-0.5));
  s.terminal = std::make_shared<QuadraticTerminal<1>>(2.0, 1.0, Vec<1>::Constant(-0.2));
  return s;
}

CostSpec<2> quad2(Eigen::Vector2d x0) {
  CostSpec<2> s;
  s.running = std::make_shared<QuadraticRunning<2>>(1.0, 0.3, x0, 0.1);
  s.terminal = std::make_shared<QuadraticTerminal<2>>(1.0, 0.5, x0);
  return s;
}

}  // namespace

TEST(Transcription, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  OcpProblem<1> p1{kUnit, state1(-0.3, 0.8), quad1(), 1.0, 0.0, {}};
  OcpProblem<2> pd{kDisc, state2(0.3, -0.2, 0.6, 0.5), quad2(Eigen::Vector2d(0.2, 0.1)), 1.0, 0.0, {}};
  OcpProblem<2> ps{kSquare, state2(0.6, 0.3, 0.7, -0.8), quad2(Eigen::Vector2d(0.5, 0.5)), 1.0, 0.0, {}};
  const Transcription<1> t1(p1, 12, 4);
  const Transcription<2> td(pd, 10, 4), ts(ps, 10, 4);
  for (int i = 0; i < 10; ++i) {
    const auto [z1, l1] = testkit::random_decision(t1, rng);
    EXPECT_LT(testkit::fd_gradient_error(t1, z1, l1), 1e-5);
    const auto [zd, ld] = testkit::random_decision(td, rng);
    EXPECT_LT(testkit::fd_gradient_error(td, zd, ld), 1e-5);
    const auto [zs, ls] = testkit::random_decision(ts, rng);
    EXPECT_LT(testkit::fd_gradient_error(ts, zs, ls), 1e-5);
  }
}

TEST(Transcription, GradientWithEntryConstraints) {
  std::mt19937_64 rng(2);
  const Transcription<1> tr(entry_as_ocp({-1, 1, 0.1, 3, 4}), 12, 4);
  EXPECT_TRUE(tr.pinned());
  for (int i = 0; i < 10; ++i) {
    const auto [z, pen] = testkit::random_decision(tr, rng);
    EXPECT_LT(testkit::fd_gradient_error(tr, z, pen), 1e-5);
  }
}

TEST(Transcription, PackRoundTrip) {
  OcpProblem<2> p{kDisc, state2(0.1, 0.2, 0.3, 0.4), CostSpec<2>{}, 1.0, 0.0, {}};
  const Transcription<2> tr(p, 9, 4);
  auto k = tr.from_trajectory(straight_brake(p.initial, 0.5, 1.0));
  const auto back = tr.unpack(tr.pack(k));
  ASSERT_EQ(back.size(), k.size());
  for (std::size_t i = 0; i < k.size(); ++i) {
    EXPECT_EQ(back[i].x, k[i].x);
    EXPECT_EQ(back[i].v, k[i].v);
  }
  EXPECT_EQ(tr.decision_size(), 8 * 4);
}

TEST(CostOf, Examples) {
  CostSpec<1> zero;
  EXPECT_EQ(cost_of(Trajectory<1>::rest(Vec<1>::Constant(-0.5), 2.0), zero), 0.0);
  const auto q = Trajectory<1>({0.0, 1.0}, {state1(0, 0), state1(1, 0)});
  EXPECT_NEAR(cost_of(q, zero), 6.0, 1e-13);
  CostSpec<1> one;
  one.running = std::make_shared<ConstantRunning<1>>(1.0);
  EXPECT_NEAR(cost_of(q, one), 7.0, 1e-13);
  const auto b = brake_maneuver(state1(-0.5, 1.0), 0.4, 3.0, kUnit);
  EXPECT_NEAR(cost_of(b, one), b.energy() + 3.0, 1e-12);
}

TEST(Solve, RestIsFree) {
  const auto r = solve(state1(-0.5, 0.0), CostSpec<1>{}, kUnit, small_cfg());
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.value, 0.0, 1e-12);
  const auto r2 = solve(state2(0.5, 0.5, 0.0, 0.0), CostSpec<2>{}, kSquare, small_cfg(32));
  EXPECT_NEAR(r2.value, 0.0, 1e-12);
}

TEST(Solve, ConstantRunningShiftsValueByHorizon) {
  CostSpec<1> one;
  one.running = std::make_shared<ConstantRunning<1>>(1.0);
  for (double T : {0.5, 1.0, 2.0}) {
    const auto s = state1(-0.4, 0.3);
    const double base = value_u(s, CostSpec<1>{}, kUnit, small_cfg(64, T));
    const double shifted = value_u(s, one, kUnit, small_cfg(64, T));
    EXPECT_NEAR(shifted - base, T, 1e-8 * (1.0 + base));
  }
}

TEST(Solve, ValueBoundedBelow) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  CostSpec<1> neg;
  neg.running = std::make_shared<QuadraticRunning<1>>(1.0, 0.0, Vec<1>::Constant(-0.5), -0.5);
  neg.M = 0.5;
  for (int i = 0; i < 5; ++i) {
    const auto s = state1(-0.2 - 0.6 * U(rng), U(rng) - 0.5);
    const double T = 0.5 + U(rng);
    EXPECT_GE(value_u(s, neg, kUnit, small_cfg(48, T)), -neg.M * (T + 1.0));
  }
}

TEST(Solve, NoWorseThanInitializers) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 4; ++i) {
    const auto s = state2(0.2 + 0.6 * U(rng), 0.2 + 0.6 * U(rng), U(rng) - 0.5, U(rng) - 0.5);
    const auto spec = quad2(Eigen::Vector2d(0.5, 0.5));
    auto cfg = small_cfg(48);
    OcpProblem<2> p{kSquare, s, spec, cfg.T, 0.0, {}};
    const auto r = solve(p, cfg);
    const Transcription<2> tr(p, cfg.N, cfg.samples_per_segment);
    for (const auto& k : initializers(tr, cfg, {})) {
      const auto t = tr.to_trajectory(k);
      if (is_admissible(t, kSquare)) {
        EXPECT_LE(r.value, cost_of(t, spec) + 1e-9);
      }
    }
    EXPECT_TRUE(is_admissible(r.trajectory, kSquare, 1e-6));
  }
}

TEST(Solve, FeasibleOnAllDomains) {
  auto c1 = small_cfg(64);
  const auto r1 = solve(state1(-0.05, 0.6), CostSpec<1>{}, kUnit, c1);
  EXPECT_TRUE(r1.converged);
  EXPECT_LE(r1.constraint_violation, 10 * c1.constraint_tol);
  EXPECT_TRUE(is_admissible(r1.trajectory, kUnit, 1e-6));
  const auto rd = solve(state2(0.8, 0.0, 0.9, 0.2), quad2(Eigen::Vector2d(0.9, 0.0)), kDisc, small_cfg(48));
  EXPECT_TRUE(is_admissible(rd.trajectory, kDisc, 1e-6));
}

TEST(Solve, CanonicalNearWallValue) {
  // Energy scales like v³/|x| near the wall: (2/9)(0.3³/0.0027) = 20/9.
  auto cfg = small_cfg(512);
  cfg.multistart = 3;
  const auto r = solve(state1(-0.0027, 0.3), CostSpec<1>{}, kUnit, cfg);
  EXPECT_NEAR(r.value, 20.0 / 9.0, 0.1 * 20.0 / 9.0);
  EXPECT_TRUE(is_admissible(r.trajectory, kUnit, 1e-6));
}

TEST(Solve, EntryProblemMatchesOracle) {
  const oracle1d::EntryProblem e{-1, 1, 0.05, 2.5, 4};
  auto cfg = small_cfg(256, e.theta);
  cfg.use_oracle_init = false;
  const auto r = solve(entry_as_ocp(e), cfg);
  EXPECT_NEAR(r.value, oracle1d::entry_energy(e), 0.01 * oracle1d::entry_energy(e));
}

TEST(Solve, RejectsInadmissibleStart) {
  try {
    solve(state1(0.0, 0.5), CostSpec<1>{}, kUnit, small_cfg());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::StateNotAdmissible);
  }
  auto bad = small_cfg();
  bad.N = 1;
  EXPECT_THROW(solve(state1(-0.5, 0.0), CostSpec<1>{}, kUnit, bad), Error);
}

TEST(Solve, DeterministicAcrossCalls) {
  auto cfg = small_cfg(64);
  cfg.multistart = 4;
  cfg.seed = 7;
  const auto a = solve(state2(0.3, 0.7, 0.4, -0.2), quad2(Eigen::Vector2d(0.5, 0.5)), kSquare, cfg);
  const auto b = solve(state2(0.3, 0.7, 0.4, -0.2), quad2(Eigen::Vector2d(0.5, 0.5)), kSquare, cfg);
  EXPECT_EQ(a.value, b.value);
  for (int k = 0; k < a.trajectory.knot_count(); ++k) EXPECT_EQ(a.trajectory.knot(k).x, b.trajectory.knot(k).x);
}

TEST(ContinuationLevels, Shape) {
  EXPECT_EQ(continuation_levels(64), std::vector<int>{64});
  EXPECT_EQ(continuation_levels(96), std::vector<int>{96});
  const auto l = continuation_levels(2048);
  EXPECT_EQ(l.back(), 2048);
  EXPECT_LE(l.front(), 4 * kCoarsestKnots);
  for (std::size_t i = 1; i < l.size(); ++i) EXPECT_LE(l[i], 4 * l[i - 1]);
}

TEST(GammaC, BoundGrowsWithR) {
  CostSpec<1> zero;
  double prev = 0.0;
  for (double r : {0.1, 1.0, 10.0}) {
    const double C = gamma_c_bound(ThetaRSpec<1>{kUnit, r}, zero, 1.0).C;
    EXPECT_GE(C, prev);
    prev = C;
  }
}

TEST(GammaC, OptimizersLieInBound) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const ThetaRSpec<1> th{kUnit, 1.0};
  const auto spec = quad1();
  const auto bound = gamma_c_bound(th, spec, 1.0);
  int checked = 0;
  while (checked < 5) {
    const double x = -U(rng);
    const auto s = state1(x, (2.0 * U(rng) - 1.0) * std::cbrt(std::abs(x)));
    if (!in_theta_r(th, s)) continue;
    ++checked;
    const auto r = solve(s, spec, kUnit, small_cfg(64));
    EXPECT_TRUE(in_gamma_c(r.trajectory, bound));
  }
}
