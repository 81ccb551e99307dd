// Acceptance run: one PASS/FAIL line per criterion, informational lines indented below it.
// Criteria listed in kKnownRed fail for reasons documented in the README; they are reported
// as FAIL but do not change the exit status. Every other criterion must pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cmfg/maneuvers.hpp"
#include "cmfg/metrics.hpp"
#include "cmfg/mfg.hpp"
#include "cmfg/ocp.hpp"
#include "cmfg/oracle1d.hpp"
#include "support.hpp"

using namespace cmfg;

namespace {

const std::set<int> kKnownRed = {3, 5};

const Domain<1> kUnit{Interval{-1.0, 0.0}};
const Domain<2> kDisc{Disc{}};
const Domain<2> kSquare{ConvexPolygon::unit_square()};

Domain<2> hexagon() {
  std::vector<Eigen::Vector2d> v;
  for (int k = 0; k < 6; ++k) v.emplace_back(std::cos(k * M_PI / 3), std::sin(k * M_PI / 3));
  return Domain<2>(ConvexPolygon(v));
}

struct Report {
  bool pass = true;
  std::vector<std::string> info;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    info.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void note(const std::string& what) { info.push_back("info " + what); }
};

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

oracle1d::EntryProblem draw_entry(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  oracle1d::EntryProblem p;
  p.x = -(0.05 + 0.95 * U(rng));
  p.v = 0.2 + 1.8 * U(rng);
  p.T = 3.0 * std::abs(p.x) / p.v * (1.05 + 3.0 * U(rng));
  p.w = U(rng) * std::abs(p.x) / p.T;
  p.theta = p.T * (0.05 + 0.9 * U(rng));
  return p;
}

// ---------------------------------------------------------------------------------------------

Report criterion1() {
  Report r;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  int boundaries = 0;
  for (int i = 0; i < 1000; ++i) {
    auto p = draw_entry(rng);
    for (double th : {p.linear_limit(), p.parabolic_limit()}) {
      if (!(th > 0.0 && th < p.T)) continue;
      auto lo = p, hi = p;
      lo.theta = std::nextafter(th, 0.0);
      hi.theta = th;
      worst = std::max(worst, std::abs(oracle1d::entry_energy(lo) - oracle1d::entry_energy(hi)));
      ++boundaries;
    }
  }
  r.require(worst < 1e-12, "max jump across " + std::to_string(boundaries) + " regime boundaries = " + num(worst));
  const double g1 = oracle1d::entry_energy({-1, 1, 0, 1, 4});
  const double g2 = oracle1d::entry_energy({-1, 1, 0, 2.5, 4});
  const double g3 = oracle1d::entry_energy({-1, 1, 0, 3, 4});
  r.require(std::abs(g1 - 0.5) < 1e-12, "I(1) = " + num(g1));
  r.require(std::abs(g2 - 0.224) < 1e-12, "I(2.5) = " + num(g2));
  r.require(std::abs(g3 - 2.0 / 9.0) < 1e-12, "I(3) = " + num(g3));
  const double dt = seconds_since(t0);
  r.require(dt < 1.0, "runtime " + num(dt) + " s");
  return r;
}

Report criterion2() {
  Report r;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(202);
  double worst = 0.0, worst_c = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto p = draw_entry(rng);
    const auto sol = oracle1d::entry_trajectory(p);
    worst_c = std::max(worst_c, sol.complementarity_residual());
    OCPConfig cfg;
    cfg.N = 2048;
    cfg.T = p.theta;
    cfg.multistart = 2;
    cfg.use_oracle_init = false;
    const auto res = solve(entry_as_ocp(p), cfg);
    const double rel = std::abs(res.value - sol.value) / sol.value;
    worst = std::max(worst, rel);
    if (rel >= 0.01)
      r.note("problem " + std::to_string(i) + ": solver " + num(res.value) + " oracle " + num(sol.value));
  }
  r.require(worst < 0.01, "max relative gap solver vs oracle over 20 problems = " + num(worst));
  r.require(worst_c < 1e-10, "max complementarity residual = " + num(worst_c));
  const double dt = seconds_since(t0);
  r.require(dt < 60.0, "runtime " + num(dt) + " s");
  return r;
}

Report criterion3() {
  Report r;
  OCPConfig cfg;
  cfg.N = 2048;
  cfg.T = 1.0;
  const CostSpec<1> zero;
  const double limit = value_u(state1(0.0, 0.0), zero, kUnit, cfg);
  r.note("u(0, 0) = " + num(limit));
  std::vector<double> errs;
  for (double v : {0.3, 0.2, 0.1, 0.05}) {
    const double u = value_u(state1(-v * v * v, v), zero, kUnit, cfg);
    errs.push_back(std::abs(u - 2.0 / 9.0) / (2.0 / 9.0));
    r.note("cubic family v = " + num(v) + ": u = " + num(u) + ", relative error to 2/9 = " + num(errs.back()));
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < errs.size(); ++i) decreasing = decreasing && errs[i] < errs[i - 1];
  r.require(decreasing, "relative error decreases along the cubic family");
  r.require(errs.back() < 0.1, "relative error at v = 0.05 below 10%: " + num(errs.back()));
  double last = 0.0;
  for (double v : {0.3, 0.2, 0.1, 0.05}) {
    last = value_u(state1(-std::pow(v, 4), v), zero, kUnit, cfg);
    r.note("quartic family v = " + num(v) + ": u = " + num(last) + ", (2/9)/v = " + num(2.0 / 9.0 / v));
  }
  r.require(last < 0.05, "quartic family final value below 0.05: " + num(last));
  r.note("along (-v^3, v) the minimal energy is exactly (2/9) v^3/|x| = 2/9 for every v, so the error is solver noise");
  r.note("along (-v^4, v) the minimal energy is (2/9)/v, which diverges");
  return r;
}

Report criterion4() {
  Report r;
  std::mt19937_64 rng(404);
  CostSpec<1> s1;
  s1.running = std::make_shared<QuadraticRunning<1>>(1.0, 0.5, Vec<1>::Constant(-0.5));
  s1.terminal = std::make_shared<QuadraticTerminal<1>>(2.0, 1.0, Vec<1>::Constant(-0.2));
  CostSpec<2> s2;
  s2.running = std::make_shared<QuadraticRunning<2>>(1.0, 0.3, Eigen::Vector2d(0.2, 0.1), 0.1);
  s2.terminal = std::make_shared<QuadraticTerminal<2>>(1.0, 0.5, Eigen::Vector2d(0.2, 0.1));
  const Transcription<1> ti(OcpProblem<1>{kUnit, state1(-0.3, 0.8), s1, 1.0, 0.0, {}}, 16, 4);
  const Transcription<2> td(OcpProblem<2>{kDisc, state2(0.3, -0.2, 0.6, 0.5), s2, 1.0, 0.0, {}}, 12, 4);
  const Transcription<2> tp(OcpProblem<2>{kSquare, state2(0.6, 0.3, 0.7, -0.8), s2, 1.0, 0.0, {}}, 12, 4);
  double wi = 0.0, wd = 0.0, wp = 0.0;
  for (int i = 0; i < 100; ++i) {
    auto [zi, pi] = testkit::random_decision(ti, rng);
    wi = std::max(wi, testkit::fd_gradient_error(ti, zi, pi));
    auto [zd, pd] = testkit::random_decision(td, rng);
    wd = std::max(wd, testkit::fd_gradient_error(td, zd, pd));
    auto [zp, pp] = testkit::random_decision(tp, rng);
    wp = std::max(wp, testkit::fd_gradient_error(tp, zp, pp));
  }
  r.require(wi < 1e-5, "interval: worst relative gradient error over 100 vectors = " + num(wi));
  r.require(wd < 1e-5, "disc: worst relative gradient error over 100 vectors = " + num(wd));
  r.require(wp < 1e-5, "polygon: worst relative gradient error over 100 vectors = " + num(wp));
  return r;
}

double slope_over_r(double T) {
  std::vector<double> lx, ly;
  for (double rr : {1.0, 10.0, 100.0, 1000.0}) {
    lx.push_back(std::log(rr));
    ly.push_back(std::log(gamma_c_bound(ThetaRSpec<1>{kUnit, rr}, CostSpec<1>{}, T).C));
  }
  const double n = lx.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Report criterion5() {
  Report r;
  for (double rr : {1.0, 10.0, 100.0, 1000.0})
    r.note("r = " + num(rr) + ": C = " + num(gamma_c_bound(ThetaRSpec<1>{kUnit, rr}, CostSpec<1>{}, 1.0).C));
  const double slope = slope_over_r(1.0);
  r.require(slope >= 0.4 && slope <= 0.6, "log-log slope of C(r) at T = 1: " + num(slope));
  for (double T : {0.5, 2.0, 4.0}) r.note("slope at T = " + num(T) + ": " + num(slope_over_r(T)));
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int inside = 0, total = 0;
  for (double rr : {1.0, 10.0, 100.0, 1000.0}) {
    const ThetaRSpec<1> th{kUnit, rr};
    const GammaCBound bound = gamma_c_bound(th, CostSpec<1>{}, 1.0);
    int drawn = 0;
    while (drawn < 50) {
      const double x = -U(rng);
      const double vmax = std::cbrt(rr * (0.0 - x)), vmin = -std::cbrt(rr * (x + 1.0));
      const auto s = state1(x, vmin + (vmax - vmin) * U(rng));
      if (!in_theta_r(th, s) || !is_admissible_state(kUnit, s)) continue;
      ++drawn;
      OCPConfig cfg;
      cfg.N = 128;
      cfg.T = 1.0;
      cfg.multistart = 2;
      cfg.seed = static_cast<std::uint64_t>(total);
      const auto res = solve(s, CostSpec<1>{}, kUnit, cfg);
      const bool ok = in_gamma_c(res.trajectory, bound);
      inside += ok ? 1 : 0;
      ++total;
      if (!ok)
        r.note("outside: r = " + num(rr) + " x = " + num(x) + " v = " + num(s.v(0)) + " sup|v| = " +
               num(velocity_sup(res.trajectory)) + " C = " + num(bound.C));
    }
  }
  r.require(inside == total, std::to_string(inside) + " of " + std::to_string(total) + " solver optima lie in Gamma_C");
  return r;
}

struct EquilibriumCase {
  EmpiricalStateMeasure<1> m0;
  Coupling coupling{CouplingKind::MollifiedCongestion, 1.0, 0.2};
  ThetaRSpec<1> theta{kUnit, 1.0};
  FictitiousPlayResult<1> fp;
  double seconds = 0.0;
};

EquilibriumCase run_equilibrium() {
  EquilibriumCase e;
  e.m0 = sample_theta_r<1>(e.theta, 100, 606, Vec<1>::Constant(-1.0), Vec<1>::Constant(0.0), 1.0);
  EquilibriumConfig cfg;
  cfg.max_iters = 200;
  cfg.exploitability_tol = 1e-2;
  cfg.seed = 606;
  cfg.threads = 0;
  cfg.ocp.N = 512;
  cfg.ocp.T = 1.0;
  cfg.ocp.multistart = 2;
  const auto t0 = std::chrono::steady_clock::now();
  e.fp = fictitious_play(e.m0, kUnit, e.coupling, CostSpec<1>{}, cfg);
  e.seconds = seconds_since(t0);
  return e;
}

Report criterion6(const EquilibriumCase& e) {
  Report r;
  std::ostringstream h;
  for (double x : e.fp.history) h << num(x) << ' ';
  r.note("exploitability history: " + h.str());
  r.note("atoms " + std::to_string(e.fp.measure.atom_count()) + ", failed solves " +
         std::to_string(e.fp.failed_solves));
  r.require(e.fp.converged && e.fp.iterations <= 200,
            "exploitability " + num(e.fp.history.back()) + " < 1e-2 after " + std::to_string(e.fp.iterations) +
                " iterations");
  const auto marg = initial_marginal(e.fp.measure);
  double werr = 0.0;
  for (int a = 0; a < e.m0.size(); ++a) werr = std::max(werr, std::abs(marg.weights[a] - e.m0.weights[a]));
  bool states_exact = true;
  for (const auto& at : e.fp.measure.atoms()) {
    const auto& s0 = at.traj.initial();
    states_exact = states_exact && s0.x == e.m0.states[at.agent].x && s0.v == e.m0.states[at.agent].v;
  }
  r.require(states_exact && werr == 0.0, "initial marginal equals m0: max weight deviation " + num(werr));
  r.require(e.seconds < 600.0, "runtime " + num(e.seconds) + " s");
  return r;
}

Report criterion7(const EquilibriumCase& e) {
  Report r;
  const auto& mu = e.fp.measure;
  const double T = mu.horizon();
  const auto gc = gamma_c_bound_detail(e.theta, CostSpec<1>{}, T, 201, e.m0.states, e.coupling.strength);
  const GammaCBound bound{gc.C};
  int outside = 0;
  for (const auto& a : mu.atoms()) outside += in_gamma_c(a.traj, bound) ? 0 : 1;
  r.require(outside == 0, "atoms outside Gamma_C: " + std::to_string(outside) + " (C = " + num(gc.C) + ")");
  std::vector<double> times{0.0};
  for (int k = 0; k <= 12; ++k) times.push_back(T * std::pow(10.0, -3.0 + 3.0 * k / 12.0));
  const auto rep = holder_check(mu, times, true, bound);
  r.require(!rep.violation, "no pair exceeds C~ |t - s|^(1/2); max ratio " + num(rep.max_ratio));
  HolderReport window;
  for (const auto& p : rep.pairs) {
    const double dt = p.t - p.s;
    if (dt >= 1e-3 * (1.0 - 1e-12) && dt <= 1.0) window.pairs.push_back(p);
  }
  fit_holder(window);
  r.require(window.fitted_exponent >= 0.4, "fitted exponent over |t - s| in [1e-3, 1]: " +
                                               num(window.fitted_exponent) + " (" +
                                               std::to_string(window.pairs.size()) + " pairs)");
  return r;
}

Report criterion8() {
  Report r;
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const auto hex = hexagon();
  auto unit = [&] {
    const double a = 2 * M_PI * U(rng);
    return Eigen::Vector2d(std::cos(a), std::sin(a));
  };

  // Brake: stopping point stays within reach of the ray, tbar <= 2 * ray_exit.
  int brake_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const double T = 0.5 + U(rng);
    const int kind = i % 4;
    if (kind == 0) {
      const double x = i % 8 == 0 ? 0.0 : -U(rng);
      double v = 3.0 * (U(rng) - 0.5);
      if (x == 0.0) v = -std::abs(v);
      const auto s = state1(x, v);
      const double tb = std::min(T, 2.0 * ray_exit(kUnit, s.x, s.v)) * (0.05 + 0.95 * U(rng));
      brake_bad += is_admissible(brake_maneuver(s, tb, T, kUnit, Guard::None), kUnit, 1e-9) ? 0 : 1;
      continue;
    }
    const Domain<2>& dom = kind == 1 ? kDisc : kind == 2 ? kSquare : hex;
    State<2> s;
    if (U(rng) < 0.5) {
      do s.x = Eigen::Vector2d(2 * U(rng) - 1, 2 * U(rng) - 1); while (signed_distance(dom, s.x) > 0.0);
      s.v = 2.0 * U(rng) * unit();
    } else if (dom.kind() == DomainKind::Disc) {
      s.x = unit();
      const Eigen::Vector2d t(-s.x.y(), s.x.x());
      s.v = 2.0 * U(rng) * (U(rng) < 0.3 ? t : Eigen::Vector2d(-U(rng) * s.x + (U(rng) - 0.5) * t));
    } else {
      const auto& P = dom.polygon();
      const int j = static_cast<int>(U(rng) * P.size()) % P.size();
      const bool vertex = U(rng) < 0.3;
      s.x = vertex ? P.vertex(j) : Eigen::Vector2d(P.vertex(j) + U(rng) * (P.vertex(j + 1) - P.vertex(j)));
      do s.v = 2.0 * U(rng) * unit(); while (!is_admissible_state(dom, s));
    }
    if (!is_admissible_state(dom, s)) continue;
    const double reach = ray_exit(dom, s.x, s.v);
    double tb = std::min(T, 2.0 * reach);
    if (!(tb > 0.0)) tb = std::min(T, 0.5);
    tb *= 0.05 + 0.95 * U(rng);
    brake_bad += is_admissible(brake_maneuver(s, tb, T, dom, Guard::None), dom, 1e-9) ? 0 : 1;
  }
  r.require(brake_bad == 0, "brake: inadmissible outputs " + std::to_string(brake_bad) + " / 1000");

  // Two-phase: the target rests on the boundary; t1 within the phase-one bound of the normal motion.
  int tp_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const double T = 1.0;
    const int kind = i % 3;
    const double d = 0.1 * U(rng), vn = 0.5 * (U(rng) - 0.2);
    const double tmax = oracle1d::max_phase1_time(std::max(d, 1e-12), std::max(0.0, vn));
    const double t1 = std::max(1e-3, std::min(0.5, tmax) * (0.05 + 0.95 * U(rng)));
    const double t2 = t1 + T / 4.0;
    if (kind == 0) {
      const auto target = Trajectory<1>::rest(Vec<1>::Zero(), T);
      const auto out = two_phase_correction(target, state1(-d, vn), t1, t2, kUnit, Guard::None);
      tp_bad += is_admissible(out.trajectory, kUnit, 1e-9) ? 0 : 1;
    } else if (kind == 1) {
      const double xb = 0.2 + 0.6 * U(rng), vt = 0.4 * (U(rng) - 0.5);
      const auto target = Trajectory<2>::rest(Eigen::Vector2d(xb, 0.0), T);
      const auto s = state2(xb + 0.05 * (U(rng) - 0.5), d, vt, -vn);
      const auto out = two_phase_correction(target, s, t1, t2, kSquare, Guard::None);
      tp_bad += is_admissible(out.trajectory, kSquare, 1e-9) ? 0 : 1;
    } else {
      const Eigen::Vector2d n = unit(), tn(-n.y(), n.x());
      const double vt = 0.4 * (U(rng) - 0.5);
      const auto target = Trajectory<2>::rest(n, T);
      const State<2> s{(1.0 - d) * n, vn * n + vt * tn};
      const auto out = two_phase_correction(target, s, t1, t2, kDisc, Guard::None);
      tp_bad += is_admissible(out.trajectory, kDisc, 1e-9) ? 0 : 1;
    }
  }
  r.require(tp_bad == 0, "two-phase: inadmissible outputs " + std::to_string(tp_bad) + " / 1000");

  // Vertex stop: start inside the vertex cone, heading roughly at the vertex.
  int vs_bad = 0, sharp_hits = 0, sharp_tries = 0;
  for (int i = 0; i < 1000; ++i) {
    const Domain<2>& dom = i % 2 == 0 ? kSquare : hex;
    const auto& P = dom.polygon();
    const int j = static_cast<int>(U(rng) * P.size()) % P.size();
    const Eigen::Vector2d nu = P.vertex(j);
    const Eigen::Vector2d x =
        nu + 0.2 * U(rng) * (P.vertex(j - 1 + P.size()) - nu) + 0.2 * U(rng) * (P.vertex(j + 1) - nu);
    const Eigen::Vector2d to = nu - x;
    Eigen::Vector2d v = to.norm() > 0 ? Eigen::Vector2d(to.normalized() * U(rng)) : Eigen::Vector2d::Zero();
    v += 0.3 * U(rng) * unit();
    const State<2> s{x, v};
    if (!is_admissible_state(dom, s)) continue;
    const double T = 1.0;
    const auto tail = Trajectory<2>::rest(nu, T);
    const double bound = vertex_stop_bound(dom, s, j);
    const double ti = std::min(bound, 0.9 * T) * (0.05 + 0.95 * U(rng));
    vs_bad += is_admissible(vertex_stop(s, j, ti, tail, dom, Guard::None), dom, 1e-9) ? 0 : 1;
    if (1.5 * bound < T) {
      ++sharp_tries;
      sharp_hits += is_admissible(vertex_stop(s, j, 1.5 * bound, tail, dom, Guard::None), dom, 1e-9) ? 0 : 1;
    }
  }
  r.require(vs_bad == 0, "vertex stop: inadmissible outputs " + std::to_string(vs_bad) + " / 1000");
  r.require(sharp_hits >= 1, "vertex stop at 1.5x the bound: inadmissible on " + std::to_string(sharp_hits) + " of " +
                                 std::to_string(sharp_tries) + " draws");

  int fm_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const double x = -U(rng);
    const auto s = state1(x, 6.0 * (U(rng) - 0.5));
    if (!is_admissible_state(kUnit, s)) continue;
    const double T = 0.2 + 3.0 * U(rng);
    fm_bad += is_admissible(feasibility_map_j(s, T, kUnit), kUnit, 1e-9) ? 0 : 1;
  }
  r.require(fm_bad == 0, "feasibility map: inadmissible outputs " + std::to_string(fm_bad) + " / 1000");
  return r;
}

Report criterion9() {
  Report r;
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double worst_q = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 10 + rep % 40;
    EmpiricalStateMeasure<1> a, b;
    std::vector<double> xa, xb;
    for (int i = 0; i < n; ++i) {
      xa.push_back(U(rng));
      xb.push_back(2.0 * U(rng) + 0.3);
      a.states.push_back(state1(xa.back(), 0.0));
      b.states.push_back(state1(xb.back(), 0.0));
    }
    a.weights.assign(n, 1.0 / n);
    b.weights = a.weights;
    std::sort(xa.begin(), xa.end());
    std::sort(xb.begin(), xb.end());
    double q = 0.0;
    for (int i = 0; i < n; ++i) q += std::abs(xa[i] - xb[i]) / n;
    worst_q = std::max(worst_q, std::abs(w1_exact(a, b) - q));
  }
  r.require(worst_q < 1e-12, "assignment vs quantile W1 on 100 line clouds: max gap " + num(worst_q));
  double sym = 0.0, tri = 0.0, self = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    auto cloud = [&](double shift) {
      EmpiricalStateMeasure<2> m;
      for (int i = 0; i < 25; ++i) m.states.push_back(state2(U(rng) + shift, U(rng), U(rng), U(rng) - shift));
      m.weights.assign(25, 1.0 / 25);
      return m;
    };
    const auto a = cloud(0.0), b = cloud(0.4 * U(rng)), c = cloud(0.4 * U(rng));
    sym = std::max(sym, std::abs(w1_exact(a, b) - w1_exact(b, a)));
    tri = std::max(tri, w1_exact(a, c) - w1_exact(a, b) - w1_exact(b, c));
    self = std::max(self, w1_exact(a, a));
  }
  r.require(sym <= 1e-9, "symmetry: max |W(a,b) - W(b,a)| = " + num(sym));
  r.require(tri <= 1e-9, "triangle inequality: max excess = " + num(tri));
  r.require(self <= 1e-9, "identity: max W(a,a) = " + num(self));
  return r;
}

}  // namespace

int main() {
  int unexpected = 0;
  auto emit = [&](int id, const std::function<Report()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Report r;
    try {
      r = f();
    } catch (const std::exception& e) {
      r.pass = false;
      r.info.push_back(std::string("FAIL exception: ") + e.what());
    }
    const bool known = kKnownRed.count(id) > 0;
    std::cout << "criterion " << id << ": " << (r.pass ? "PASS" : "FAIL") << (!r.pass && known ? " (known)" : "")
              << "  [" << num(seconds_since(t0)) << " s]\n";
    for (const auto& s : r.info) std::cout << "    " << s << "\n";
    std::cout.flush();
    if (!r.pass && !known) ++unexpected;
  };
  emit(1, criterion1);
  emit(2, criterion2);
  emit(3, criterion3);
  emit(4, criterion4);
  emit(5, criterion5);
  // Criterion 7 reuses the criterion-6 equilibrium.
  EquilibriumCase eq;
  bool eq_ok = false;
  std::string eq_err = "equilibrium run did not finish";
  emit(6, [&] {
    try {
      eq = run_equilibrium();
      eq_ok = true;
    } catch (const std::exception& e) {
      eq_err = e.what();
      throw;
    }
    return criterion6(eq);
  });
  emit(7, [&] {
    if (!eq_ok) fail(Errc::NotConverged, eq_err);
    return criterion7(eq);
  });
  emit(8, criterion8);
  emit(9, criterion9);
  std::cout << (unexpected == 0 ? "acceptance: all criteria outside the known-red set pass\n"
                                : "acceptance: " + std::to_string(unexpected) + " unexpected failure(s)\n");
  return unexpected == 0 ? 0 : 1;
}
