#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cmfg/cost.hpp"
#include "cmfg/error.hpp"
#include "cmfg/geometry.hpp"
#include "cmfg/io.hpp"
#include "cmfg/mfg.hpp"
#include "cmfg/ocp.hpp"

namespace cmfg {

// Flat `key = value` text. `[section]` prefixes following keys with "section.";
// '#' starts a comment. Later assignments override earlier ones.
class Scenario {
 public:
  static Scenario parse(const std::string& text) {
    Scenario sc;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') fail(Errc::ConfigError, "line " + std::to_string(lineno) + ": unterminated section");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail(Errc::ConfigError, "line " + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(line.substr(0, eq));
      if (key.empty()) fail(Errc::ConfigError, "line " + std::to_string(lineno) + ": empty key");
      if (!section.empty()) key = section + "." + key;
      sc.set(key, trim(line.substr(eq + 1)));
    }
    return sc;
  }

  static Scenario load(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail(Errc::ConfigError, "cannot open scenario file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  void set(const std::string& key, const std::string& value) {
    if (!known_key(key)) fail(Errc::ConfigError, "unknown key '" + key + "'");
    kv_[key] = value;
  }

  // "key=value" as given on the command line.
  void apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) fail(Errc::ConfigError, "override '" + assignment + "' is not key=value");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  const std::map<std::string, std::string>& entries() const { return kv_; }

  std::string str(const std::string& key, const std::string& def) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? def : it->second;
  }
  std::string str(const std::string& key) const {
    require(key);
    return kv_.at(key);
  }

  double num(const std::string& key, double def) const { return has(key) ? num(key) : def; }
  double num(const std::string& key) const {
    require(key);
    try {
      return io::parse_double(kv_.at(key));
    } catch (const Error&) {
      fail(Errc::ConfigError, "key '" + key + "': expected a number, got '" + kv_.at(key) + "'");
    }
  }

  long long integer(const std::string& key, long long def) const {
    if (!has(key)) return def;
    const std::string& s = kv_.at(key);
    long long x = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc{} || p != s.data() + s.size())
      fail(Errc::ConfigError, "key '" + key + "': expected an integer, got '" + s + "'");
    return x;
  }

  std::uint64_t u64(const std::string& key, std::uint64_t def) const {
    if (!has(key)) return def;
    const std::string& s = kv_.at(key);
    std::uint64_t x = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc{} || p != s.data() + s.size())
      fail(Errc::ConfigError, "key '" + key + "': expected an unsigned integer, got '" + s + "'");
    return x;
  }

  bool flag(const std::string& key, bool def) const {
    if (!has(key)) return def;
    const std::string& s = kv_.at(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    fail(Errc::ConfigError, "key '" + key + "': expected true/false, got '" + s + "'");
  }

  std::vector<double> list(const std::string& key, std::vector<double> def = {}) const {
    if (!has(key)) return def;
    try {
      return io::parse_list(kv_.at(key));
    } catch (const Error&) {
      fail(Errc::ConfigError, "key '" + key + "': expected a comma-separated list of numbers");
    }
  }

  // Range check with the key named in the message.
  static void check(bool ok, const std::string& key, const std::string& what) {
    if (!ok) fail(Errc::ConfigError, "key '" + key + "': " + what);
  }

  int dimension() const {
    const auto k = str("domain.kind", "interval");
    if (k == "interval") return 1;
    if (k == "disc" || k == "polygon" || k == "unit_square") return 2;
    fail(Errc::ConfigError, "key 'domain.kind': unknown domain '" + k + "'");
  }

 private:
  std::map<std::string, std::string> kv_;

  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  void require(const std::string& key) const {
    if (!has(key)) fail(Errc::ConfigError, "missing required key '" + key + "'");
  }

  static bool known_key(const std::string& key) {
    static const std::set<std::string> keys = {
        "domain.kind", "domain.a", "domain.b", "domain.center", "domain.radius", "domain.vertices",
        "cost.running", "cost.running_a", "cost.running_b", "cost.running_x0", "cost.running_c",
        "cost.terminal", "cost.terminal_a", "cost.terminal_b", "cost.terminal_x0", "cost.p", "cost.M",
        "coupling.kind", "coupling.strength", "coupling.sigma",
        "m0.sampler", "m0.n", "m0.seed", "m0.points", "m0.box_lo", "m0.box_hi", "m0.vmax",
        "theta.r", "theta.mode", "theta.rho",
        "ocp.N", "ocp.T", "ocp.penalty_init", "ocp.penalty_growth", "ocp.max_outer", "ocp.max_inner",
        "ocp.inner_tol", "ocp.constraint_tol", "ocp.multistart", "ocp.seed", "ocp.dedup_tol",
        "ocp.samples_per_segment", "ocp.use_oracle_init",
        "equilibrium.max_iters", "equilibrium.exploitability_tol", "equilibrium.seed", "equilibrium.threads",
        "equilibrium.mixing_constant", "equilibrium.merge_tol", "equilibrium.prune",
        "equilibrium.snapshot_times",
        "solve.x", "solve.v",
        "oracle.x", "oracle.v", "oracle.w", "oracle.theta", "oracle.T",
        "probe.family", "probe.exponent", "probe.C", "probe.ts",
        "verify.holder_times", "verify.use_exact", "verify.n_projections", "verify.seed",
        "output.dir"};
    return keys.count(key) > 0;
  }
};

// Coordinates of a point given as "x" (1D) or "x0,x1" (2D).
template <int Dim>
Vec<Dim> scenario_vec(const Scenario& sc, const std::string& key, const Vec<Dim>& def) {
  if (!sc.has(key)) return def;
  const auto xs = sc.list(key);
  Scenario::check(static_cast<int>(xs.size()) == Dim, key, "expected " + std::to_string(Dim) + " components");
  Vec<Dim> v;
  for (int d = 0; d < Dim; ++d) v(d) = xs[d];
  return v;
}

template <int Dim>
Domain<Dim> scenario_domain(const Scenario& sc);

template <>
inline Domain<1> scenario_domain<1>(const Scenario& sc) {
  const double a = sc.num("domain.a", -1.0), b = sc.num("domain.b", 0.0);
  Scenario::check(a < b, "domain.b", "interval requires a < b");
  return Domain<1>(Interval{a, b});
}

template <>
inline Domain<2> scenario_domain<2>(const Scenario& sc) {
  const auto k = sc.str("domain.kind");
  if (k == "disc") {
    const double r = sc.num("domain.radius", 1.0);
    Scenario::check(r > 0.0, "domain.radius", "must be positive");
    return Domain<2>(Disc{scenario_vec<2>(sc, "domain.center", Vec<2>::Zero()), r});
  }
  if (k == "unit_square") return Domain<2>(ConvexPolygon::unit_square());
  const auto xs = sc.list("domain.vertices");
  Scenario::check(xs.size() >= 6 && xs.size() % 2 == 0, "domain.vertices", "expected x0,y0,x1,y1,... with >= 3 vertices");
  std::vector<Eigen::Vector2d> vs;
  for (std::size_t i = 0; i < xs.size(); i += 2) vs.emplace_back(xs[i], xs[i + 1]);
  try {
    return Domain<2>(ConvexPolygon(std::move(vs)));
  } catch (const Error& e) {
    fail(Errc::ConfigError, std::string("key 'domain.vertices': ") + e.what());
  }
}

template <int Dim>
CostSpec<Dim> scenario_cost(const Scenario& sc) {
  CostSpec<Dim> spec;
  const auto run = sc.str("cost.running", "zero");
  if (run == "constant") {
    spec.running = std::make_shared<ConstantRunning<Dim>>(sc.num("cost.running_c"));
  } else if (run == "quadratic") {
    spec.running = std::make_shared<QuadraticRunning<Dim>>(
        sc.num("cost.running_a", 0.0), sc.num("cost.running_b", 0.0),
        scenario_vec<Dim>(sc, "cost.running_x0", Vec<Dim>::Zero()), sc.num("cost.running_c", 0.0));
  } else if (run != "zero") {
    fail(Errc::ConfigError, "key 'cost.running': unknown running cost '" + run + "'");
  }
  const auto term = sc.str("cost.terminal", "zero");
  if (term == "quadratic") {
    spec.terminal = std::make_shared<QuadraticTerminal<Dim>>(
        sc.num("cost.terminal_a", 0.0), sc.num("cost.terminal_b", 0.0),
        scenario_vec<Dim>(sc, "cost.terminal_x0", Vec<Dim>::Zero()));
  } else if (term != "zero") {
    fail(Errc::ConfigError, "key 'cost.terminal': unknown terminal cost '" + term + "'");
  }
  spec.p = sc.num("cost.p", 2.0);
  Scenario::check(spec.p > 1.0, "cost.p", "must exceed 1");
  // Quadratic costs are nonnegative; a negative constant is offset by M.
  spec.M = sc.num("cost.M", run == "constant" ? std::max(0.0, -sc.num("cost.running_c")) : 0.0);
  Scenario::check(spec.M >= 0.0, "cost.M", "must be >= 0");
  return spec;
}

inline Coupling scenario_coupling(const Scenario& sc) {
  Coupling c;
  const auto k = sc.str("coupling.kind", "zero");
  if (k == "zero") c.kind = CouplingKind::Zero;
  else if (k == "congestion") c.kind = CouplingKind::MollifiedCongestion;
  else if (k == "aggregation") c.kind = CouplingKind::MollifiedAggregation;
  else fail(Errc::ConfigError, "key 'coupling.kind': unknown coupling '" + k + "'");
  c.strength = sc.num("coupling.strength", 1.0);
  c.sigma = sc.num("coupling.sigma", 0.2);
  Scenario::check(c.strength >= 0.0, "coupling.strength", "must be >= 0");
  Scenario::check(c.sigma > 0.0, "coupling.sigma", "must be positive");
  return c;
}

inline OCPConfig scenario_ocp(const Scenario& sc) {
  OCPConfig c;
  c.N = static_cast<int>(sc.integer("ocp.N", c.N));
  c.T = sc.num("ocp.T", c.T);
  c.penalty_init = sc.num("ocp.penalty_init", c.penalty_init);
  c.penalty_growth = sc.num("ocp.penalty_growth", c.penalty_growth);
  c.max_outer = static_cast<int>(sc.integer("ocp.max_outer", c.max_outer));
  c.max_inner = static_cast<int>(sc.integer("ocp.max_inner", c.max_inner));
  c.inner_tol = sc.num("ocp.inner_tol", c.inner_tol);
  c.constraint_tol = sc.num("ocp.constraint_tol", c.constraint_tol);
  c.multistart = static_cast<int>(sc.integer("ocp.multistart", c.multistart));
  c.seed = sc.u64("ocp.seed", c.seed);
  c.dedup_tol = sc.num("ocp.dedup_tol", c.dedup_tol);
  c.samples_per_segment = static_cast<int>(sc.integer("ocp.samples_per_segment", c.samples_per_segment));
  c.use_oracle_init = sc.flag("ocp.use_oracle_init", c.use_oracle_init);
  Scenario::check(c.N >= 2, "ocp.N", "must be >= 2");
  Scenario::check(c.T > 0.0, "ocp.T", "must be positive");
  Scenario::check(c.penalty_init > 0.0, "ocp.penalty_init", "must be positive");
  Scenario::check(c.penalty_growth > 1.0, "ocp.penalty_growth", "must exceed 1");
  Scenario::check(c.max_outer >= 1, "ocp.max_outer", "must be >= 1");
  Scenario::check(c.max_inner >= 1, "ocp.max_inner", "must be >= 1");
  Scenario::check(c.inner_tol > 0.0, "ocp.inner_tol", "must be positive");
  Scenario::check(c.constraint_tol > 0.0, "ocp.constraint_tol", "must be positive");
  Scenario::check(c.multistart >= 1, "ocp.multistart", "must be >= 1");
  Scenario::check(c.dedup_tol > 0.0, "ocp.dedup_tol", "must be positive");
  Scenario::check(c.samples_per_segment >= 2, "ocp.samples_per_segment", "must be >= 2");
  return c;
}

inline EquilibriumConfig scenario_equilibrium(const Scenario& sc) {
  EquilibriumConfig e;
  e.ocp = scenario_ocp(sc);
  e.max_iters = static_cast<int>(sc.integer("equilibrium.max_iters", e.max_iters));
  e.exploitability_tol = sc.num("equilibrium.exploitability_tol", e.exploitability_tol);
  e.seed = sc.u64("equilibrium.seed", e.seed);
  e.threads = static_cast<int>(sc.integer("equilibrium.threads", e.threads));
  e.mixing_constant = sc.num("equilibrium.mixing_constant", e.mixing_constant);
  e.merge_tol = sc.num("equilibrium.merge_tol", e.merge_tol);
  e.prune = sc.num("equilibrium.prune", e.prune);
  Scenario::check(e.max_iters >= 1, "equilibrium.max_iters", "must be >= 1");
  Scenario::check(e.exploitability_tol > 0.0, "equilibrium.exploitability_tol", "must be positive");
  Scenario::check(e.threads >= 0, "equilibrium.threads", "must be >= 0");
  Scenario::check(e.mixing_constant >= 0.0 && e.mixing_constant <= 1.0, "equilibrium.mixing_constant",
                  "must lie in [0, 1]");
  Scenario::check(e.merge_tol >= 0.0, "equilibrium.merge_tol", "must be >= 0");
  Scenario::check(e.prune >= 0.0, "equilibrium.prune", "must be >= 0");
  return e;
}

template <int Dim>
ThetaRSpec<Dim> scenario_theta(const Scenario& sc, const Domain<Dim>& dom) {
  ThetaRSpec<Dim> th{dom};
  th.r = sc.num("theta.r", 1.0);
  th.rho = sc.num("theta.rho", 2.0);
  const auto mode = sc.str("theta.mode", Dim == 1 ? "interval" : "margin");
  if (mode == "interval") {
    Scenario::check(Dim == 1, "theta.mode", "'interval' needs an interval domain");
    th.mode = ThetaMode::Interval1D;
  } else if (mode == "margin") {
    th.mode = ThetaMode::MarginSets;
  } else {
    fail(Errc::ConfigError, "key 'theta.mode': unknown mode '" + mode + "'");
  }
  Scenario::check(th.r > 0.0, "theta.r", "must be positive");
  Scenario::check(th.rho > 0.0, "theta.rho", "must be positive");
  return th;
}

// m0 either as explicit points "x…,v…;x…,v…" or as uniform samples in Θ_r ∩ box.
template <int Dim>
EmpiricalStateMeasure<Dim> scenario_m0(const Scenario& sc, const ThetaRSpec<Dim>& th) {
  const auto sampler = sc.str("m0.sampler", "uniform_theta");
  if (sampler == "points") {
    EmpiricalStateMeasure<Dim> m;
    for (const auto& row : io::split(sc.str("m0.points"), ';')) {
      std::vector<double> xs;
      try {
        xs = io::parse_list(row);
      } catch (const Error&) {
        fail(Errc::ConfigError, "key 'm0.points': bad entry '" + row + "'");
      }
      Scenario::check(static_cast<int>(xs.size()) == 2 * Dim, "m0.points", "each point needs position and velocity");
      State<Dim> s;
      for (int d = 0; d < Dim; ++d) {
        s.x(d) = xs[d];
        s.v(d) = xs[Dim + d];
      }
      Scenario::check(is_admissible_state(th.domain, s), "m0.points", "point is not an admissible state");
      m.states.push_back(s);
    }
    m.weights.assign(m.states.size(), 1.0 / static_cast<double>(m.states.size()));
    return m;
  }
  if (sampler != "uniform_theta") fail(Errc::ConfigError, "key 'm0.sampler': unknown sampler '" + sampler + "'");
  const int n = static_cast<int>(sc.integer("m0.n", 100));
  Scenario::check(n >= 1, "m0.n", "must be >= 1");
  Scenario::check(sc.has("m0.seed"), "m0.seed", "a seed is required for sampled initial measures");
  Vec<Dim> lo, hi;
  if constexpr (Dim == 1) {
    lo(0) = th.domain.interval().a;
    hi(0) = th.domain.interval().b;
  } else if (th.domain.kind() == DomainKind::Disc) {
    lo = th.domain.disc().center.array() - th.domain.disc().radius;
    hi = th.domain.disc().center.array() + th.domain.disc().radius;
  } else {
    lo = hi = th.domain.polygon().vertex(0);
    for (const auto& v : th.domain.polygon().vertices()) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
  }
  lo = scenario_vec<Dim>(sc, "m0.box_lo", lo);
  hi = scenario_vec<Dim>(sc, "m0.box_hi", hi);
  const double vmax = sc.num("m0.vmax", Dim == 1 ? std::cbrt(th.r * (hi(0) - lo(0))) : th.r);
  Scenario::check(vmax >= 0.0, "m0.vmax", "must be >= 0");
  return sample_theta_r(th, n, sc.u64("m0.seed", 0), lo, hi, vmax);
}

}  // namespace cmfg
