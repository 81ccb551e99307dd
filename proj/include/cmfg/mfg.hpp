#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cmfg/cost.hpp"
#include "cmfg/geometry.hpp"
#include "cmfg/ocp.hpp"
#include "cmfg/trajectory.hpp"

namespace cmfg {

// Runs f(0..n-1) on up to `threads` workers; results are stored by index so the output is thread-count independent.
template <class R, class F>
std::vector<R> parallel_map(int n, int threads, F&& f) {
  std::vector<std::optional<R>> slot(n);
  std::vector<std::exception_ptr> errs(n);
  const int w = std::max(1, std::min(threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency()), n));
  auto work = [&](int id) {
    for (int i = id; i < n; i += w) {
      try {
        slot[i].emplace(f(i));
      } catch (...) {
        errs[i] = std::current_exception();
      }
    }
  };
  if (w == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int id = 0; id < w; ++id) pool.emplace_back(work, id);
    for (auto& t : pool) t.join();
  }
  std::vector<R> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    if (errs[i]) std::rethrow_exception(errs[i]);
    out.push_back(std::move(*slot[i]));
  }
  return out;
}

// SplitMix64 finalizer; derives independent per-agent seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <int Dim>
struct EmpiricalStateMeasure {
  std::vector<State<Dim>> states;
  std::vector<double> weights;

  int size() const { return static_cast<int>(states.size()); }
  double total() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }
};

template <int Dim>
struct Atom {
  Trajectory<Dim> traj;
  double weight = 0.0;
  int agent = 0;
};

// μ as atoms grouped by agent; agent a carries mass m0.weights[a] and starts at m0.states[a].
template <int Dim>
class TrajectoryMeasure {
 public:
  TrajectoryMeasure() = default;
  TrajectoryMeasure(EmpiricalStateMeasure<Dim> m0, std::vector<Atom<Dim>> atoms)
      : m0_(std::move(m0)), atoms_(std::move(atoms)) {
    check();
  }

  // One atom per agent.
  static TrajectoryMeasure from_agents(const EmpiricalStateMeasure<Dim>& m0, std::vector<Trajectory<Dim>> trajs) {
    if (static_cast<int>(trajs.size()) != m0.size()) fail(Errc::InvalidArgument, "one trajectory per agent expected");
    std::vector<Atom<Dim>> atoms;
    for (int a = 0; a < m0.size(); ++a) atoms.push_back({std::move(trajs[a]), m0.weights[a], a});
    return TrajectoryMeasure(m0, std::move(atoms));
  }

  const std::vector<Atom<Dim>>& atoms() const { return atoms_; }
  const EmpiricalStateMeasure<Dim>& initial() const { return m0_; }
  int agent_count() const { return m0_.size(); }
  int atom_count() const { return static_cast<int>(atoms_.size()); }
  double horizon() const { return atoms_.front().traj.horizon(); }

  // (1-λ) this + λ other; both must share m0.
  TrajectoryMeasure mix(const TrajectoryMeasure& other, double lambda, double merge_tol = 0.0,
                        double prune = 1e-8) const {
    if (!(lambda > 0.0 && lambda <= 1.0)) fail(Errc::InvalidArgument, "mixing weight must lie in (0, 1]");
    std::vector<Atom<Dim>> out;
    for (const auto& a : atoms_) out.push_back({a.traj, (1.0 - lambda) * a.weight, a.agent});
    for (const auto& b : other.atoms_) {
      bool merged = false;
      if (merge_tol > 0.0) {
        for (auto& a : out) {
          if (a.agent == b.agent && sup_distance(a.traj, b.traj) <= merge_tol) {
            a.weight += lambda * b.weight;
            merged = true;
            break;
          }
        }
      }
      if (!merged) out.push_back({b.traj, lambda * b.weight, b.agent});
    }
    return TrajectoryMeasure(m0_, prune_atoms(std::move(out), prune));
  }

  // Σ_k w_k f(atom_k); reduction in atom order.
  template <class F>
  double integrate(F&& f) const {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.weight * f(a);
    return s;
  }

 private:
  // Drops light atoms and rescales each agent's survivors back to its m0 mass.
  std::vector<Atom<Dim>> prune_atoms(std::vector<Atom<Dim>> atoms, double prune) const {
    std::vector<double> kept(m0_.size(), 0.0);
    std::vector<Atom<Dim>> out;
    std::vector<int> heaviest(m0_.size(), -1);
    for (int i = 0; i < static_cast<int>(atoms.size()); ++i) {
      const int a = atoms[i].agent;
      if (heaviest[a] < 0 || atoms[i].weight > atoms[heaviest[a]].weight) heaviest[a] = i;
    }
    for (int i = 0; i < static_cast<int>(atoms.size()); ++i) {
      if (atoms[i].weight < prune && i != heaviest[atoms[i].agent]) continue;
      kept[atoms[i].agent] += atoms[i].weight;
      out.push_back(std::move(atoms[i]));
    }
    for (auto& a : out)
      if (kept[a.agent] != m0_.weights[a.agent]) a.weight *= m0_.weights[a.agent] / kept[a.agent];
    return out;
  }

  void check() const {
    if (atoms_.empty()) fail(Errc::InvalidArgument, "trajectory measure needs atoms");
    if (m0_.states.size() != m0_.weights.size()) fail(Errc::InvalidArgument, "m0 states and weights differ in size");
    if (std::abs(m0_.total() - 1.0) > 1e-12) fail(Errc::InvalidArgument, "m0 weights must sum to 1");
    const double T = atoms_.front().traj.horizon();
    for (const auto& a : atoms_) {
      if (a.agent < 0 || a.agent >= m0_.size()) fail(Errc::InvalidArgument, "atom agent out of range");
      if (!(a.weight >= 0.0)) fail(Errc::InvalidArgument, "negative atom weight");
      if (a.traj.horizon() != T) fail(Errc::InvalidArgument, "atoms must share the horizon");
      const auto& s0 = a.traj.initial();
      if (s0.x != m0_.states[a.agent].x || s0.v != m0_.states[a.agent].v)
        fail(Errc::InvariantViolated, "atom does not start at its agent's initial state");
    }
  }

  EmpiricalStateMeasure<Dim> m0_;
  std::vector<Atom<Dim>> atoms_;
};

template <int Dim>
EmpiricalStateMeasure<Dim> pushforward(const TrajectoryMeasure<Dim>& mu, double t) {
  EmpiricalStateMeasure<Dim> m;
  for (const auto& a : mu.atoms()) {
    m.states.push_back(a.traj.eval(t));
    m.weights.push_back(a.weight);
  }
  return m;
}

// Agent-level initial marginal of μ.
template <int Dim>
EmpiricalStateMeasure<Dim> initial_marginal(const TrajectoryMeasure<Dim>& mu) {
  EmpiricalStateMeasure<Dim> m = mu.initial();
  std::fill(m.weights.begin(), m.weights.end(), 0.0);
  for (const auto& a : mu.atoms()) m.weights[a.agent] += a.weight;
  return m;
}

enum class CouplingKind { Zero, MollifiedCongestion, MollifiedAggregation };

inline const char* coupling_kind_name(CouplingKind k) {
  switch (k) {
    case CouplingKind::Zero: return "zero";
    case CouplingKind::MollifiedCongestion: return "congestion";
    case CouplingKind::MollifiedAggregation: return "aggregation";
  }
  return "?";
}

struct Coupling {
  CouplingKind kind = CouplingKind::Zero;
  double strength = 1.0;
  double sigma = 0.2;

  double sign() const {
    switch (kind) {
      case CouplingKind::Zero: return 0.0;
      case CouplingKind::MollifiedCongestion: return 1.0;
      case CouplingKind::MollifiedAggregation: return -1.0;
    }
    return 0.0;
  }
  // Lower bound contributed to M: F, G ≥ -strength for aggregation, ≥ 0 otherwise.
  double lower_bound() const { return kind == CouplingKind::MollifiedAggregation ? strength : 0.0; }
};

inline void validate(const Coupling& c) {
  if (c.kind == CouplingKind::Zero) return;
  if (!(c.strength >= 0.0)) fail(Errc::InvalidArgument, "coupling strength must be >= 0");
  if (!(c.sigma > 0.0)) fail(Errc::InvalidArgument, "coupling bandwidth must be positive");
}

// Bump K(z) = exp(1 - 1/(1 - |z|^2/σ^2)) on |z| < σ; K(0) = 1, C^∞, compact support.
struct BumpKernel {
  double sigma = 0.2;

  double value(double r2s) const { return r2s < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r2s)) : 0.0; }
};

// Snapshot of m(t) in stacked (x, v) coordinates, sorted by the first position coordinate for range queries.
template <int Dim>
struct Snapshot {
  static constexpr int S = 2 * Dim;
  double t = 0.0;
  std::vector<Eigen::Matrix<double, S, 1>> z;
  std::vector<double> w;

  static Snapshot make(const EmpiricalStateMeasure<Dim>& m, double t) {
    Snapshot s;
    s.t = t;
    std::vector<int> idx(m.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return m.states[a].x(0) < m.states[b].x(0); });
    for (int i : idx) {
      Eigen::Matrix<double, S, 1> zi;
      zi << m.states[i].x, m.states[i].v;
      s.z.push_back(zi);
      s.w.push_back(m.weights[i]);
    }
    return s;
  }

  // Σ w_k K(z - z_k) with optional gradient and Hessian in z.
  double kernel_sum(const Eigen::Matrix<double, S, 1>& q, double sigma, Eigen::Matrix<double, S, 1>* g,
                    Eigen::Matrix<double, S, S>* H) const {
    const double inv = 1.0 / (sigma * sigma);
    auto lo = std::lower_bound(z.begin(), z.end(), q(0) - sigma,
                               [](const auto& zi, double key) { return zi(0) < key; });
    double f = 0.0;
    for (auto it = lo; it != z.end() && (*it)(0) < q(0) + sigma; ++it) {
      const Eigen::Matrix<double, S, 1> d = q - *it;
      const double r2 = d.squaredNorm() * inv;
      if (r2 >= 1.0) continue;
      const double wk = w[it - z.begin()];
      const double om = 1.0 - r2;
      const double K = std::exp(1.0 - 1.0 / om);
      f += wk * K;
      if (g || H) {
        // K = e^φ(q), q = |d|^2/σ^2: φ' = -1/(1-q)^2, φ'' = -2/(1-q)^3.
        const double p1 = -1.0 / (om * om), p2 = -2.0 / (om * om * om);
        const Eigen::Matrix<double, S, 1> u = 2.0 * inv * d;
        if (g) *g += wk * K * p1 * u;
        if (H) {
          *H += wk * K * (p1 * p1 + p2) * u * u.transpose();
          H->diagonal().array() += wk * K * p1 * 2.0 * inv;
        }
      }
    }
    return f;
  }
};

// Pushforwards of a frozen μ at a fixed set of times, looked up by exact key.
template <int Dim>
class PushforwardCache {
 public:
  PushforwardCache() = default;
  explicit PushforwardCache(std::shared_ptr<const TrajectoryMeasure<Dim>> mu) : mu_(std::move(mu)) {}

  void add_times(std::vector<double> ts) {
    const double T = mu_->horizon();
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    std::vector<Snapshot<Dim>> fresh;
    for (double t : ts)
      if (!find(t)) fresh.push_back(Snapshot<Dim>::make(pushforward(*mu_, std::min(t, T)), t));
    snaps_.insert(snaps_.end(), std::make_move_iterator(fresh.begin()), std::make_move_iterator(fresh.end()));
    std::sort(snaps_.begin(), snaps_.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  }

  // Every quadrature time solve() and cost_of() will touch for a problem starting at t0.
  void add_solver_grid(double t0, int N) {
    const double H = mu_->horizon() - t0;
    std::vector<double> ts{t0 + H};
    for (int n : continuation_levels(N)) {
      const auto grid = Trajectory<Dim>::uniform_times(H, n);
      for (int i = 0; i + 1 < n; ++i)
        for (int q = 0; q < 4; ++q) ts.push_back(quad_time(t0, grid, i, q));
    }
    add_times(std::move(ts));
  }

  const Snapshot<Dim>* find(double t) const {
    auto it = std::lower_bound(snaps_.begin(), snaps_.end(), t, [](const auto& s, double key) { return s.t < key; });
    return it != snaps_.end() && it->t == t ? &*it : nullptr;
  }

  // Exact lookup, else a freshly computed snapshot.
  Snapshot<Dim> at(double t) const {
    if (const auto* s = find(t)) return *s;
    return Snapshot<Dim>::make(pushforward(*mu_, std::min(t, mu_->horizon())), t);
  }

  const TrajectoryMeasure<Dim>& measure() const { return *mu_; }

 private:
  std::shared_ptr<const TrajectoryMeasure<Dim>> mu_;
  std::vector<Snapshot<Dim>> snaps_;
};

// ℓ + F[m(t)].
template <int Dim>
class CouplingRunning final : public RunningCost<Dim> {
 public:
  static constexpr int S = 2 * Dim;
  CouplingRunning(std::shared_ptr<const RunningCost<Dim>> base, Coupling c,
                  std::shared_ptr<const PushforwardCache<Dim>> cache)
      : base_(std::move(base)), c_(c), cache_(std::move(cache)) {}

  std::string id() const override { return base_->id() + "+" + coupling_kind_name(c_.kind); }
  bool is_zero() const override { return base_->is_zero() && c_.kind == CouplingKind::Zero; }

  double value(const State<Dim>& s, double t) const override {
    double f = base_->value(s, t);
    if (c_.kind != CouplingKind::Zero) f += coupling(s, t, nullptr, nullptr);
    return f;
  }

  void eval(const State<Dim>& s, double t, Derivs<Dim>& d) const override {
    base_->eval(s, t, d);
    if (c_.kind == CouplingKind::Zero) return;
    Eigen::Matrix<double, S, 1> g = Eigen::Matrix<double, S, 1>::Zero();
    Eigen::Matrix<double, S, S> H = Eigen::Matrix<double, S, S>::Zero();
    d.f += coupling(s, t, &g, &H);
    d.g += g;
    d.H += H;
  }

 private:
  double coupling(const State<Dim>& s, double t, Eigen::Matrix<double, S, 1>* g, Eigen::Matrix<double, S, S>* H) const {
    Eigen::Matrix<double, S, 1> q;
    q << s.x, s.v;
    const double k = c_.sign() * c_.strength;
    double f;
    if (const auto* snap = cache_->find(t)) {
      f = snap->kernel_sum(q, c_.sigma, g, H);
    } else {
      f = cache_->at(t).kernel_sum(q, c_.sigma, g, H);
    }
    if (g) *g *= k;
    if (H) *H *= k;
    return k * f;
  }

  std::shared_ptr<const RunningCost<Dim>> base_;
  Coupling c_;
  std::shared_ptr<const PushforwardCache<Dim>> cache_;
};

// g + G[m(T)], G built from the same kernel.
template <int Dim>
class CouplingTerminal final : public TerminalCost<Dim> {
 public:
  static constexpr int S = 2 * Dim;
  CouplingTerminal(std::shared_ptr<const TerminalCost<Dim>> base, Coupling c, Snapshot<Dim> at_T)
      : base_(std::move(base)), c_(c), snap_(std::move(at_T)) {}

  std::string id() const override { return base_->id() + "+" + coupling_kind_name(c_.kind); }
  bool is_zero() const override { return base_->is_zero() && c_.kind == CouplingKind::Zero; }

  double value(const State<Dim>& s) const override {
    double f = base_->value(s);
    if (c_.kind == CouplingKind::Zero) return f;
    Eigen::Matrix<double, S, 1> q;
    q << s.x, s.v;
    return f + c_.sign() * c_.strength * snap_.kernel_sum(q, c_.sigma, nullptr, nullptr);
  }

  void eval(const State<Dim>& s, Derivs<Dim>& d) const override {
    base_->eval(s, d);
    if (c_.kind == CouplingKind::Zero) return;
    Eigen::Matrix<double, S, 1> q, g = Eigen::Matrix<double, S, 1>::Zero();
    Eigen::Matrix<double, S, S> H = Eigen::Matrix<double, S, S>::Zero();
    q << s.x, s.v;
    const double k = c_.sign() * c_.strength;
    d.f += k * snap_.kernel_sum(q, c_.sigma, &g, &H);
    d.g += k * g;
    d.H += k * H;
  }

 private:
  std::shared_ptr<const TerminalCost<Dim>> base_;
  Coupling c_;
  Snapshot<Dim> snap_;
};

// Cost J^μ as a CostSpec; the cache must already hold the quadrature times that will be queried.
template <int Dim>
CostSpec<Dim> coupled_spec(const CostSpec<Dim>& base, const Coupling& c,
                           std::shared_ptr<const PushforwardCache<Dim>> cache) {
  if (c.kind == CouplingKind::Zero) return base;
  CostSpec<Dim> s = base;
  const double T = cache->measure().horizon();
  s.running = std::make_shared<CouplingRunning<Dim>>(base.running, c, cache);
  s.terminal = std::make_shared<CouplingTerminal<Dim>>(base.terminal, c, cache->at(T));
  s.M = base.M + c.lower_bound() * 1.0;
  return s;
}

template <int Dim>
double mfg_cost(const Trajectory<Dim>& traj, const TrajectoryMeasure<Dim>& mu, const Coupling& c,
                const CostSpec<Dim>& base, double t0 = 0.0) {
  if (c.kind == CouplingKind::Zero) return cost_of(traj, base, t0);
  auto cache = std::make_shared<PushforwardCache<Dim>>(std::make_shared<const TrajectoryMeasure<Dim>>(mu));
  std::vector<double> ts{mu.horizon()};
  for (int i = 0; i < traj.segment_count(); ++i)
    for (int q = 0; q < 4; ++q) ts.push_back(quad_time(t0, traj.times(), i, q));
  cache->add_times(std::move(ts));
  return cost_of(traj, coupled_spec<Dim>(base, c, cache), t0);
}

struct EquilibriumConfig {
  int max_iters = 200;
  double exploitability_tol = 1e-2;
  std::uint64_t seed = 0;
  int threads = 0;            // 0: hardware concurrency
  double mixing_constant = 0; // 0: λ_k = 1/(k+1)
  double merge_tol = 1e-6;    // same-agent atoms closer than this share one trajectory
  double prune = 1e-8;
  OCPConfig ocp;

  double lambda(int k) const { return mixing_constant > 0.0 ? mixing_constant : 1.0 / (k + 1.0); }
};

inline void validate(const EquilibriumConfig& e) {
  if (e.max_iters < 1) fail(Errc::InvalidArgument, "max_iters must be >= 1");
  if (!(e.exploitability_tol > 0.0)) fail(Errc::InvalidArgument, "exploitability_tol must be positive");
  if (!(e.mixing_constant >= 0.0 && e.mixing_constant <= 1.0)) fail(Errc::InvalidArgument, "mixing constant in [0, 1]");
  if (!(e.merge_tol >= 0.0 && e.prune >= 0.0)) fail(Errc::InvalidArgument, "merge/prune tolerances must be >= 0");
  validate(e.ocp);
}

template <int Dim>
struct BestResponse {
  TrajectoryMeasure<Dim> measure;
  std::vector<double> values;       // J^μ of each agent's response
  std::vector<std::string> errors;  // empty when the agent's solve succeeded
};

template <int Dim>
std::shared_ptr<const PushforwardCache<Dim>> solver_cache(const TrajectoryMeasure<Dim>& mu, const OCPConfig& cfg,
                                                          double t0 = 0.0) {
  auto cache = std::make_shared<PushforwardCache<Dim>>(std::make_shared<const TrajectoryMeasure<Dim>>(mu));
  cache->add_solver_grid(t0, cfg.N);
  return cache;
}

// One optimal trajectory per agent against the frozen coupling of μ.
template <int Dim>
BestResponse<Dim> best_response(const TrajectoryMeasure<Dim>& mu, const Domain<Dim>& dom, const Coupling& c,
                                const CostSpec<Dim>& base, const EquilibriumConfig& cfg,
                                const std::vector<std::vector<Trajectory<Dim>>>& warm = {}) {
  const auto& m0 = mu.initial();
  const auto cache = solver_cache(mu, cfg.ocp);
  const CostSpec<Dim> spec = coupled_spec<Dim>(base, c, cache);
  struct Out {
    Trajectory<Dim> traj;
    double value;
    std::string err;
  };
  auto outs = parallel_map<Out>(m0.size(), cfg.threads, [&](int a) {
    OCPConfig oc = cfg.ocp;
    oc.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(a));
    OcpProblem<Dim> p{dom, m0.states[a], spec, mu.horizon(), 0.0, {}};
    oc.T = p.T;
    try {
      auto r = solve(p, oc, a < static_cast<int>(warm.size()) ? warm[a] : std::vector<Trajectory<Dim>>{});
      return Out{r.trajectory, r.value, ""};
    } catch (const Error& e) {
      const auto rest = Trajectory<Dim>::rest(m0.states[a].x, mu.horizon());
      // Keeping the agent's heaviest current atom leaves the measure well defined.
      const Atom<Dim>* keep = nullptr;
      for (const auto& at : mu.atoms())
        if (at.agent == a && (!keep || at.weight > keep->weight)) keep = &at;
      const auto& tr = keep ? keep->traj : rest;
      return Out{tr, cost_of(tr, spec), e.what()};
    }
  });
  BestResponse<Dim> br;
  std::vector<Trajectory<Dim>> trajs;
  for (auto& o : outs) {
    trajs.push_back(std::move(o.traj));
    br.values.push_back(o.value);
    br.errors.push_back(std::move(o.err));
  }
  br.measure = TrajectoryMeasure<Dim>::from_agents(m0, std::move(trajs));
  return br;
}

// Σ_atoms w [J^μ(atom) - J^μ(best response of its agent)]_+.
template <int Dim>
double exploitability_against(const TrajectoryMeasure<Dim>& mu, const std::vector<double>& br_values,
                              const Coupling& c, const CostSpec<Dim>& base, const OCPConfig& cfg) {
  const auto cache = solver_cache(mu, cfg);
  const CostSpec<Dim> spec = coupled_spec<Dim>(base, c, cache);
  return mu.integrate([&](const Atom<Dim>& a) {
    return std::max(0.0, cost_of(a.traj, spec) - br_values[a.agent]);
  });
}

template <int Dim>
double exploitability(const TrajectoryMeasure<Dim>& mu, const Domain<Dim>& dom, const Coupling& c,
                      const CostSpec<Dim>& base, const EquilibriumConfig& cfg) {
  const auto br = best_response(mu, dom, c, base, cfg);
  return exploitability_against(mu, br.values, c, base, cfg.ocp);
}

template <int Dim>
struct FictitiousPlayResult {
  TrajectoryMeasure<Dim> measure;
  std::vector<double> history;     // exploitability of μ_k, k = 1, 2, ...
  std::vector<int> atom_counts;
  bool converged = false;
  int iterations = 0;
  int failed_solves = 0;
};

template <int Dim>
FictitiousPlayResult<Dim> fictitious_play(const EmpiricalStateMeasure<Dim>& m0, const Domain<Dim>& dom,
                                          const Coupling& c, const CostSpec<Dim>& base, const EquilibriumConfig& cfg) {
  validate(cfg);
  validate(c);
  validate(base);
  for (const auto& s : m0.states)
    if (!is_admissible_state(dom, s)) fail(Errc::StateNotAdmissible, "initial sample state");
  // μ_1: each agent's optimum against the coupling of the all-at-rest measure.
  std::vector<Trajectory<Dim>> rest;
  for (const auto& s : m0.states) {
    std::vector<State<Dim>> ks(2, State<Dim>{s.x, Vec<Dim>::Zero()});
    ks[0] = s;
    rest.push_back(Trajectory<Dim>::uniform(cfg.ocp.T, ks));
  }
  auto first = best_response(TrajectoryMeasure<Dim>::from_agents(m0, rest), dom, c, base, cfg);
  FictitiousPlayResult<Dim> res;
  res.measure = first.measure;
  std::vector<std::vector<Trajectory<Dim>>> warm(m0.size());
  for (const auto& a : first.measure.atoms()) warm[a.agent] = {a.traj};
  TrajectoryMeasure<Dim> mu = first.measure;
  double best = kInf;
  for (int k = 1; k <= cfg.max_iters; ++k) {
    const auto br = best_response(mu, dom, c, base, cfg, warm);
    for (const auto& e : br.errors) res.failed_solves += e.empty() ? 0 : 1;
    const double e = exploitability_against(mu, br.values, c, base, cfg.ocp);
    res.history.push_back(e);
    res.atom_counts.push_back(mu.atom_count());
    res.iterations = k;
    if (e < best) {
      best = e;
      res.measure = mu;
    }
    if (e < cfg.exploitability_tol) {
      res.converged = true;
      res.measure = mu;
      break;
    }
    for (const auto& a : br.measure.atoms()) warm[a.agent] = {a.traj};
    mu = mu.mix(br.measure, cfg.lambda(k), cfg.merge_tol, cfg.prune);
  }
  return res;
}

// m0|Θ_r renormalized.
template <int Dim>
EmpiricalStateMeasure<Dim> truncate_m0(const EmpiricalStateMeasure<Dim>& m0, const ThetaRSpec<Dim>& spec) {
  EmpiricalStateMeasure<Dim> out;
  for (int i = 0; i < m0.size(); ++i) {
    if (!in_theta_r(spec, m0.states[i])) continue;
    out.states.push_back(m0.states[i]);
    out.weights.push_back(m0.weights[i]);
  }
  if (out.states.empty()) fail(Errc::EmptyTruncation, "no sample point inside the truncation set");
  const double mass = out.total();
  for (auto& w : out.weights) w /= mass;
  return out;
}

// n i.i.d. uniform draws from (box ∩ Θ_r ∩ admissible) by rejection, equal weights.
template <int Dim>
EmpiricalStateMeasure<Dim> sample_theta_r(const ThetaRSpec<Dim>& spec, int n, std::uint64_t seed,
                                          const Vec<Dim>& xlo, const Vec<Dim>& xhi, double vmax,
                                          long max_draws = 100000000) {
  if (n < 1) fail(Errc::InvalidArgument, "sample size must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  EmpiricalStateMeasure<Dim> m;
  long draws = 0;
  while (m.size() < n) {
    if (++draws > max_draws) fail(Errc::EmptyTruncation, "rejection sampler found too few points");
    State<Dim> s;
    for (int d = 0; d < Dim; ++d) s.x(d) = xlo(d) + (xhi(d) - xlo(d)) * U(rng);
    for (int d = 0; d < Dim; ++d) s.v(d) = vmax * (2.0 * U(rng) - 1.0);
    if (!in_theta_r(spec, s) || !is_admissible_state(spec.domain, s)) continue;
    m.states.push_back(s);
  }
  m.weights.assign(n, 1.0 / n);
  return m;
}

template <int Dim>
struct MildSolution {
  std::vector<double> u;
  std::vector<double> times;
  std::vector<EmpiricalStateMeasure<Dim>> m;
};

// u(x, v, t) against the frozen coupling of μ, plus m(t) at the distinct requested times.
template <int Dim>
MildSolution<Dim> mild_solution(const TrajectoryMeasure<Dim>& mu, const Domain<Dim>& dom, const Coupling& c,
                                const CostSpec<Dim>& base, const std::vector<std::pair<State<Dim>, double>>& grid,
                                const EquilibriumConfig& cfg) {
  const double T = mu.horizon();
  MildSolution<Dim> out;
  for (const auto& [s, t] : grid) {
    if (!(t >= 0.0 && t <= T)) fail(Errc::TimeOutOfRange, "grid time outside [0, T]");
    out.times.push_back(t);
  }
  std::sort(out.times.begin(), out.times.end());
  out.times.erase(std::unique(out.times.begin(), out.times.end()), out.times.end());
  for (double t : out.times) out.m.push_back(pushforward(mu, t));
  auto shared = std::make_shared<const TrajectoryMeasure<Dim>>(mu);
  out.u = parallel_map<double>(static_cast<int>(grid.size()), cfg.threads, [&](int i) {
    const auto& [s, t] = grid[i];
    auto cache = std::make_shared<PushforwardCache<Dim>>(shared);
    if (t == T) {
      cache->add_times({T});
      return coupled_spec<Dim>(base, c, cache).terminal->value(s);
    }
    cache->add_solver_grid(t, cfg.ocp.N);
    OCPConfig oc = cfg.ocp;
    oc.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(i));
    oc.T = T - t;
    OcpProblem<Dim> p{dom, s, coupled_spec<Dim>(base, c, cache), T - t, t, {}};
    return solve(p, oc).value;
  });
  return out;
}

}  // namespace cmfg
