// Scenario-driven front end. Every output file is a pure function of the scenario text,
// the overrides and the seed; wall-clock timings go to stderr only.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cmfg/io.hpp"
#include "cmfg/maneuvers.hpp"
#include "cmfg/metrics.hpp"
#include "cmfg/mfg.hpp"
#include "cmfg/ocp.hpp"
#include "cmfg/oracle1d.hpp"
#include "cmfg/scenario.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace cmfg;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Run {
  Scenario sc;
  fs::path out;
};

void write_json(const fs::path& p, const json& j) { io::write_file(p.string(), j.dump(2) + "\n"); }

template <int Dim>
json state_json(const State<Dim>& s) {
  json x = json::array(), v = json::array();
  for (int d = 0; d < Dim; ++d) {
    x.push_back(s.x(d));
    v.push_back(s.v(d));
  }
  return json{{"x", x}, {"v", v}};
}

json ocp_json(const OCPConfig& c) {
  return json{{"N", c.N},
              {"T", c.T},
              {"penalty_init", c.penalty_init},
              {"penalty_growth", c.penalty_growth},
              {"max_outer", c.max_outer},
              {"max_inner", c.max_inner},
              {"inner_tol", c.inner_tol},
              {"constraint_tol", c.constraint_tol},
              {"multistart", c.multistart},
              {"seed", c.seed},
              {"use_oracle_init", c.use_oracle_init}};
}

int cmd_oracle(const Run& r) {
  const auto& sc = r.sc;
  oracle1d::EntryProblem p;
  p.x = sc.num("oracle.x", p.x);
  p.v = sc.num("oracle.v", p.v);
  p.w = sc.num("oracle.w", p.w);
  p.theta = sc.num("oracle.theta", p.theta);
  p.T = sc.num("oracle.T", p.T);
  const double expo = sc.num("cost.p", 2.0);
  const auto sol = oracle1d::entry_trajectory(p, expo);
  const auto opt = oracle1d::optimal_theta(p.x, p.v, p.w, p.T, expo);
  json pieces = json::array();
  for (const auto& q : sol.profile) pieces.push_back({{"a", q.a}, {"b", q.b}, {"c0", q.c0}, {"c1", q.c1}, {"c2", q.c2}});
  json j{{"x", p.x},
         {"v", p.v},
         {"w", p.w},
         {"theta", p.theta},
         {"T", p.T},
         {"value", sol.value},
         {"regime", oracle1d::regime_name(sol.regime)},
         {"tau", sol.tau},
         {"mu", sol.mu},
         {"k", sol.k},
         {"linear_limit", p.linear_limit()},
         {"parabolic_limit", p.parabolic_limit()},
         {"velocity_profile", pieces},
         {"theta_star", opt.theta_star},
         {"min_value", opt.min_value},
         {"blowup_estimate", opt.asymptotic}};
  write_json(r.out / "oracle.json", j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

template <int Dim>
int cmd_solve(const Run& r) {
  const auto& sc = r.sc;
  const auto dom = scenario_domain<Dim>(sc);
  const auto spec = scenario_cost<Dim>(sc);
  const auto cfg = scenario_ocp(sc);
  State<Dim> s{scenario_vec<Dim>(sc, "solve.x", Vec<Dim>::Zero()), scenario_vec<Dim>(sc, "solve.v", Vec<Dim>::Zero())};
  if (!is_admissible_state(dom, s)) fail(Errc::ConfigError, "key 'solve.x': initial state is not admissible");
  const auto res = solve(s, spec, dom, cfg);
  json j{{"initial", state_json(s)},
         {"value", res.value},
         {"energy", res.trajectory.energy(spec.p)},
         {"constraint_violation", res.constraint_violation},
         {"first_order_residual", res.first_order_residual},
         {"converged", res.converged},
         {"starts_used", res.starts_used},
         {"distinct_minimizers", res.minimizers.size()},
         {"minimizer_values", res.minimizer_values},
         {"T", cfg.T},
         {"N", cfg.N},
         {"ocp", ocp_json(cfg)}};
  write_json(r.out / "result.json", j);
  std::ostringstream csv;
  io::write_trajectory_csv(csv, res.trajectory);
  io::write_file((r.out / "trajectory.csv").string(), csv.str());
  std::cout << "value " << io::fmt(res.value) << " violation " << io::fmt(res.constraint_violation)
            << (res.converged ? "" : " (not converged)") << "\n";
  return res.converged ? 0 : kExitNumerical;
}

template <int Dim>
struct EquilibriumRun {
  Domain<Dim> dom;
  CostSpec<Dim> base;
  Coupling coupling;
  ThetaRSpec<Dim> theta;
  EmpiricalStateMeasure<Dim> m0;
  EquilibriumConfig cfg;
  FictitiousPlayResult<Dim> fp;
};

template <int Dim>
EquilibriumRun<Dim> run_equilibrium(const Scenario& sc) {
  const auto dom = scenario_domain<Dim>(sc);
  auto th = scenario_theta<Dim>(sc, dom);
  EquilibriumRun<Dim> e{dom, scenario_cost<Dim>(sc), scenario_coupling(sc), th, scenario_m0<Dim>(sc, th),
                        scenario_equilibrium(sc), {}};
  const auto t0 = std::chrono::steady_clock::now();
  e.fp = fictitious_play(e.m0, e.dom, e.coupling, e.base, e.cfg);
  std::cerr << "fictitious play: " << e.fp.iterations << " iterations, "
            << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
  return e;
}

// Largest deviation between the initial marginal of μ and m0, agent by agent.
template <int Dim>
double marginal_error(const TrajectoryMeasure<Dim>& mu, const EmpiricalStateMeasure<Dim>& m0) {
  std::vector<double> mass(m0.size(), 0.0);
  double err = 0.0;
  for (const auto& a : mu.atoms()) {
    mass[a.agent] += a.weight;
    const auto& s = a.traj.initial();
    err = std::max(err, (s.x - m0.states[a.agent].x).norm() + (s.v - m0.states[a.agent].v).norm());
  }
  for (int i = 0; i < m0.size(); ++i) err = std::max(err, std::abs(mass[i] - m0.weights[i]));
  return err;
}

template <int Dim>
int cmd_equilibrium(const Run& r) {
  const auto& sc = r.sc;
  const auto e = run_equilibrium<Dim>(sc);
  std::ostringstream ex;
  ex << "iteration,exploitability,atoms\n";
  for (std::size_t k = 0; k < e.fp.history.size(); ++k)
    ex << k + 1 << ',' << io::fmt(e.fp.history[k]) << ',' << e.fp.atom_counts[k] << '\n';
  io::write_file((r.out / "exploitability.csv").string(), ex.str());
  std::ostringstream at;
  io::write_atoms_csv(at, e.fp.measure);
  io::write_file((r.out / "atoms.csv").string(), at.str());
  const double T = e.fp.measure.horizon();
  std::vector<double> times = sc.list("equilibrium.snapshot_times", {0.0, 0.25 * T, 0.5 * T, 0.75 * T, T});
  std::vector<EmpiricalStateMeasure<Dim>> snaps;
  for (double t : times) {
    Scenario::check(t >= 0.0 && t <= T, "equilibrium.snapshot_times", "times must lie in [0, T]");
    snaps.push_back(pushforward(e.fp.measure, t));
  }
  std::ostringstream sn;
  io::write_snapshots_csv(sn, times, snaps);
  io::write_file((r.out / "snapshots.csv").string(), sn.str());
  json j{{"dimension", Dim},
         {"domain", domain_kind_name(e.dom.kind())},
         {"coupling", {{"kind", coupling_kind_name(e.coupling.kind)}, {"strength", e.coupling.strength}, {"sigma", e.coupling.sigma}}},
         {"agents", e.m0.size()},
         {"atoms", e.fp.measure.atom_count()},
         {"iterations", e.fp.iterations},
         {"converged", e.fp.converged},
         {"final_exploitability", e.fp.history.empty() ? kInf : e.fp.history.back()},
         {"best_exploitability", *std::min_element(e.fp.history.begin(), e.fp.history.end())},
         {"failed_solves", e.fp.failed_solves},
         {"initial_marginal_error", marginal_error(e.fp.measure, e.m0)},
         {"equilibrium", {{"max_iters", e.cfg.max_iters}, {"exploitability_tol", e.cfg.exploitability_tol}, {"seed", e.cfg.seed}}},
         {"ocp", ocp_json(e.cfg.ocp)},
         {"files", {"exploitability.csv", "atoms.csv", "snapshots.csv"}}};
  write_json(r.out / "manifest.json", j);
  std::cout << "iterations " << e.fp.iterations << " exploitability "
            << io::fmt(e.fp.history.empty() ? kInf : e.fp.history.back()) << (e.fp.converged ? "" : " (not converged)")
            << "\n";
  return e.fp.converged ? 0 : kExitNumerical;
}

// u along (b - t^e / C, t) approaching the right end b of the interval, against u(b, 0).
int cmd_probe(const Run& r) {
  const auto& sc = r.sc;
  if (sc.dimension() != 1) fail(Errc::ConfigError, "key 'domain.kind': probe-closed-graph needs an interval domain");
  const auto dom = scenario_domain<1>(sc);
  const auto spec = scenario_cost<1>(sc);
  const auto cfg = scenario_ocp(sc);
  const double e = sc.num("probe.exponent", 3.0), C = sc.num("probe.C", 1.0);
  Scenario::check(e > 0.0, "probe.exponent", "must be positive");
  Scenario::check(C > 0.0, "probe.C", "must be positive");
  const auto ts = sc.list("probe.ts", {0.3, 0.2, 0.1, 0.05});
  const double b = dom.interval().b;
  const double u_lim = value_u(state1(b, 0.0), spec, dom, cfg);
  std::ostringstream csv;
  csv << "t,x,v,u,u_minus_limit,boundary_margin,blowup_estimate\n";
  for (double t : ts) {
    Scenario::check(t > 0.0, "probe.ts", "entries must be positive");
    const auto s = state1(b - std::pow(t, e) / C, t);
    Scenario::check(s.x(0) >= dom.interval().a, "probe.ts", "family leaves the interval");
    const double u = value_u(s, spec, dom, cfg);
    csv << io::fmt(t) << ',' << io::fmt(s.x(0)) << ',' << io::fmt(s.v(0)) << ',' << io::fmt(u) << ','
        << io::fmt(u - u_lim) << ',' << io::fmt(boundary_margin(dom, s, spec.p)) << ','
        << io::fmt(oracle1d::blowup_estimate(s.x(0) - b, s.v(0))) << '\n';
  }
  io::write_file((r.out / "probe.csv").string(), csv.str());
  std::cout << csv.str();
  return 0;
}

template <int Dim>
int cmd_verify(const Run& r) {
  const auto& sc = r.sc;
  const auto e = run_equilibrium<Dim>(sc);
  const auto& mu = e.fp.measure;
  const double T = mu.horizon();
  std::vector<State<Dim>> starts = e.m0.states;
  const auto gc = gamma_c_bound_detail(e.theta, e.base, T, 201, starts, e.coupling.strength);
  const GammaCBound bound{gc.C};
  int inadmissible = 0, outside_gamma = 0;
  for (const auto& a : mu.atoms()) {
    inadmissible += is_admissible(a.traj, e.dom, 1e-9) ? 0 : 1;
    outside_gamma += in_gamma_c(a.traj, bound) ? 0 : 1;
  }
  std::vector<double> times = sc.list("verify.holder_times", {});
  if (times.empty())
    for (int k = 0; k <= 12; ++k) times.push_back(k == 0 ? 0.0 : T * std::pow(10.0, -3.0 + 3.0 * (k - 1) / 11.0));
  for (double t : times) Scenario::check(t >= 0.0 && t <= T, "verify.holder_times", "times must lie in [0, T]");
  const bool exact = sc.flag("verify.use_exact", true);
  const int nproj = static_cast<int>(sc.integer("verify.n_projections", 256));
  Scenario::check(nproj >= 1, "verify.n_projections", "must be >= 1");
  const auto rep = holder_check(mu, times, exact, bound, nproj, sc.u64("verify.seed", 0));
  json pairs = json::array();
  for (const auto& p : rep.pairs) pairs.push_back({{"s", p.s}, {"t", p.t}, {"distance", p.distance}});
  json j{{"gamma_c", {{"C", gc.C}, {"energy_cap", gc.energy_cap}, {"velocity_cap", gc.velocity_cap}}},
         {"bound_constant", rep.bound_constant},
         {"fitted_exponent", rep.fitted_exponent},
         {"fitted_constant", rep.fitted_constant},
         {"max_ratio", rep.max_ratio},
         {"violation", rep.violation},
         {"distance", exact ? "transport" : "sliced"},
         {"pairs", pairs}};
  write_json(r.out / "holder.json", j);
  const double merr = marginal_error(mu, e.m0);
  json inv{{"initial_marginal_error", merr},
           {"inadmissible_atoms", inadmissible},
           {"atoms_outside_gamma_c", outside_gamma},
           {"atoms", mu.atom_count()},
           {"converged", e.fp.converged},
           {"final_exploitability", e.fp.history.back()}};
  write_json(r.out / "invariants.json", inv);
  std::cout << inv.dump(2) << "\n";
  const bool ok = merr == 0.0 && inadmissible == 0 && outside_gamma == 0 && !rep.violation;
  return ok ? 0 : kExitNumerical;
}

template <int Dim>
int dispatch(const std::string& cmd, const Run& r) {
  if (cmd == "solve") return cmd_solve<Dim>(r);
  if (cmd == "equilibrium") return cmd_equilibrium<Dim>(r);
  return cmd_verify<Dim>(r);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained second-order mean field games: oracle, solver and equilibrium runs"};
  app.require_subcommand(1);
  std::string scenario_path, out_dir;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  int threads = -1;
  for (const char* name : {"oracle", "solve", "equilibrium", "probe-closed-graph", "verify"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--scenario", scenario_path, "scenario file (key = value)");
    sub->add_option("--seed", seed, "seed for sampling, multistart and mixing");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--set", overrides, "override, key=value")->take_all();
    sub->add_option("--threads", threads, "worker threads (0: hardware)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();
  const auto* sub = app.get_subcommands().front();
  try {
    Run r;
    if (!scenario_path.empty()) r.sc = Scenario::load(scenario_path);
    for (const auto& o : overrides) r.sc.apply_override(o);
    if (sub->count("--seed")) {
      const auto s = std::to_string(seed);
      for (const char* k : {"m0.seed", "ocp.seed", "equilibrium.seed", "verify.seed"}) r.sc.set(k, s);
    }
    if (threads >= 0) r.sc.set("equilibrium.threads", std::to_string(threads));
    if (!out_dir.empty()) r.sc.set("output.dir", out_dir);
    r.out = r.sc.str("output.dir", "out");
    std::error_code ec;
    fs::create_directories(r.out, ec);
    if (ec) fail(Errc::ConfigError, "key 'output.dir': cannot create '" + r.out.string() + "'");
    if (cmd == "oracle") return cmd_oracle(r);
    if (cmd == "probe-closed-graph") return cmd_probe(r);
    return r.sc.dimension() == 1 ? dispatch<1>(cmd, r) : dispatch<2>(cmd, r);
  } catch (const Error& e) {
    std::cerr << cmd << ": " << e.what() << "\n";
    return e.code() == Errc::ConfigError ? kExitConfig : kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << cmd << ": " << e.what() << "\n";
    return kExitNumerical;
  }
}
