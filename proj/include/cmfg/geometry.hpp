#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "cmfg/error.hpp"

namespace cmfg {

template <int Dim>
using Vec = Eigen::Matrix<double, Dim, 1>;
template <int Dim>
using Mat = Eigen::Matrix<double, Dim, Dim>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

template <int Dim>
struct State {
  Vec<Dim> x = Vec<Dim>::Zero();
  Vec<Dim> v = Vec<Dim>::Zero();
};

inline State<1> state1(double x, double v) {
  State<1> s;
  s.x(0) = x;
  s.v(0) = v;
  return s;
}

inline State<2> state2(double x0, double x1, double v0, double v1) {
  State<2> s;
  s.x << x0, x1;
  s.v << v0, v1;
  return s;
}

struct Interval {
  double a = -1.0;
  double b = 0.0;
};

struct Disc {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 1.0;
};

// Counter-clockwise, strictly convex. Edge j runs from vertex j to vertex j+1;
// normal(j) is its outward unit normal and offset(j) = normal(j)·vertex(j).
class ConvexPolygon {
 public:
  explicit ConvexPolygon(std::vector<Eigen::Vector2d> ccw) : v_(std::move(ccw)) {
    const int n = static_cast<int>(v_.size());
    if (n < 3) fail(Errc::InvalidArgument, "polygon needs at least 3 vertices");
    double scale = 0.0;
    for (const auto& p : v_) scale = std::max(scale, p.norm());
    scale = std::max(scale, 1.0);
    n_.resize(n);
    off_.resize(n);
    for (int j = 0; j < n; ++j) {
      Eigen::Vector2d e = v_[(j + 1) % n] - v_[j];
      const double len = e.norm();
      if (!(len > 1e-12 * scale)) fail(Errc::InvalidArgument, "degenerate polygon edge");
      n_[j] = Eigen::Vector2d(e.y(), -e.x()) / len;
      off_[j] = n_[j].dot(v_[j]);
    }
    for (int j = 0; j < n; ++j) {
      Eigen::Vector2d e0 = v_[(j + 1) % n] - v_[j];
      Eigen::Vector2d e1 = v_[(j + 2) % n] - v_[(j + 1) % n];
      const double cross = e0.x() * e1.y() - e0.y() * e1.x();
      if (!(cross > 1e-12 * e0.norm() * e1.norm()))
        fail(Errc::InvalidArgument, "polygon must be strictly convex and counter-clockwise");
    }
  }

  int size() const { return static_cast<int>(v_.size()); }
  const Eigen::Vector2d& vertex(int j) const { return v_[wrap(j)]; }
  const Eigen::Vector2d& normal(int j) const { return n_[wrap(j)]; }
  double offset(int j) const { return off_[wrap(j)]; }
  const std::vector<Eigen::Vector2d>& vertices() const { return v_; }
  int wrap(int j) const {
    const int n = size();
    return ((j % n) + n) % n;
  }

  static ConvexPolygon unit_square() {
    return ConvexPolygon({{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}});
  }

 private:
  std::vector<Eigen::Vector2d> v_;
  std::vector<Eigen::Vector2d> n_;
  std::vector<double> off_;
};

enum class DomainKind { Interval, Disc, ConvexPolygon };

inline const char* domain_kind_name(DomainKind k) {
  switch (k) {
    case DomainKind::Interval: return "interval";
    case DomainKind::Disc: return "disc";
    case DomainKind::ConvexPolygon: return "polygon";
  }
  return "?";
}

template <int Dim>
class Domain;

template <>
class Domain<1> {
 public:
  explicit Domain(Interval iv = {}) : iv_(iv) {
    if (!(iv.a < iv.b)) fail(Errc::InvalidArgument, "interval requires a < b");
  }
  DomainKind kind() const { return DomainKind::Interval; }
  const Interval& interval() const { return iv_; }

 private:
  Interval iv_;
};

template <>
class Domain<2> {
 public:
  explicit Domain(Disc d) : shape_(d) {
    if (!(d.radius > 0.0)) fail(Errc::InvalidArgument, "disc radius must be positive");
  }
  explicit Domain(ConvexPolygon p) : shape_(std::move(p)) {}
  DomainKind kind() const {
    return std::holds_alternative<Disc>(shape_) ? DomainKind::Disc : DomainKind::ConvexPolygon;
  }
  const Disc& disc() const { return std::get<Disc>(shape_); }
  const ConvexPolygon& polygon() const { return std::get<ConvexPolygon>(shape_); }

 private:
  std::variant<Disc, ConvexPolygon> shape_;
};

namespace detail {

inline double segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                               const Eigen::Vector2d& b, double* param = nullptr) {
  const Eigen::Vector2d e = b - a;
  double t = e.dot(p - a) / e.squaredNorm();
  t = std::clamp(t, 0.0, 1.0);
  if (param) *param = t;
  return (p - (a + t * e)).norm();
}

// Index of the edge whose line is least violated/most active at x (ties -> lowest index).
inline int most_active_edge(const ConvexPolygon& poly, const Eigen::Vector2d& x) {
  int best = 0;
  double bv = -kInf;
  for (int j = 0; j < poly.size(); ++j) {
    const double c = poly.normal(j).dot(x) - poly.offset(j);
    if (c > bv) {
      bv = c;
      best = j;
    }
  }
  return best;
}

inline double vertex_tol(const ConvexPolygon& poly) {
  double s = 1.0;
  for (const auto& v : poly.vertices()) s = std::max(s, v.norm());
  return 1e-12 * s;
}

}  // namespace detail

inline double signed_distance(const Domain<1>& dom, const Vec<1>& x) {
  const auto& iv = dom.interval();
  return std::max(iv.a - x(0), x(0) - iv.b);
}

inline double signed_distance(const Domain<2>& dom, const Vec<2>& x) {
  if (dom.kind() == DomainKind::Disc) {
    const auto& d = dom.disc();
    return (x - d.center).norm() - d.radius;
  }
  const auto& poly = dom.polygon();
  double inside = -kInf;
  for (int j = 0; j < poly.size(); ++j)
    inside = std::max(inside, poly.normal(j).dot(x) - poly.offset(j));
  if (inside <= 0.0) return inside;
  double out = kInf;
  for (int j = 0; j < poly.size(); ++j)
    out = std::min(out, detail::segment_distance(x, poly.vertex(j), poly.vertex(j + 1)));
  return out;
}

// Gradient of d near the boundary. At polygon vertices the pair (n_{j-1}, n_j) is returned.
template <int Dim>
struct NormalInfo {
  Vec<Dim> n = Vec<Dim>::Zero();
  bool at_vertex = false;
  Vec<Dim> n_prev = Vec<Dim>::Zero();
  int vertex = -1;
  int edge = -1;
};

inline NormalInfo<1> outward_normal(const Domain<1>& dom, const Vec<1>& x, double band = kInf) {
  const auto& iv = dom.interval();
  if (-signed_distance(dom, x) > band) fail(Errc::QueryTooDeepInside, "point deeper than band");
  NormalInfo<1> r;
  const bool right = x(0) >= 0.5 * (iv.a + iv.b);
  r.n(0) = right ? 1.0 : -1.0;
  r.edge = right ? 1 : 0;
  return r;
}

inline NormalInfo<2> outward_normal(const Domain<2>& dom, const Vec<2>& x, double band = kInf) {
  NormalInfo<2> r;
  const double d = signed_distance(dom, x);
  if (-d > band) fail(Errc::QueryTooDeepInside, "point deeper than band");
  if (dom.kind() == DomainKind::Disc) {
    const Eigen::Vector2d rel = x - dom.disc().center;
    const double len = rel.norm();
    if (len == 0.0) fail(Errc::QueryTooDeepInside, "normal undefined at the disc center");
    r.n = rel / len;
    return r;
  }
  const auto& poly = dom.polygon();
  const double vt = detail::vertex_tol(poly);
  for (int j = 0; j < poly.size(); ++j) {
    if ((x - poly.vertex(j)).norm() <= vt) {
      r.at_vertex = true;
      r.vertex = j;
      r.n_prev = poly.normal(j - 1);
      r.n = poly.normal(j);
      r.edge = j;
      return r;
    }
  }
  if (d <= 0.0) {
    r.edge = detail::most_active_edge(poly, x);
    r.n = poly.normal(r.edge);
    return r;
  }
  int best = 0;
  double bd = kInf, bt = 0.0;
  for (int j = 0; j < poly.size(); ++j) {
    double t = 0.0;
    const double dj = detail::segment_distance(x, poly.vertex(j), poly.vertex(j + 1), &t);
    if (dj < bd) {
      bd = dj;
      best = j;
      bt = t;
    }
  }
  r.edge = best;
  if (bt <= 0.0 || bt >= 1.0) {
    const Eigen::Vector2d& nu = poly.vertex(bt <= 0.0 ? best : best + 1);
    r.n = (x - nu).normalized();
  } else {
    r.n = poly.normal(best);
  }
  return r;
}

// Smooth containment constraints c_i(x) <= 0 whose intersection is the closed domain.
template <int Dim>
struct ConstraintEval {
  double c = 0.0;
  Vec<Dim> grad = Vec<Dim>::Zero();
  Mat<Dim> hess = Mat<Dim>::Zero();
};

inline int containment_count(const Domain<1>&) { return 2; }
inline int containment_count(const Domain<2>& dom) {
  return dom.kind() == DomainKind::Disc ? 1 : dom.polygon().size();
}

inline bool containment_is_linear(const Domain<1>&) { return true; }
inline bool containment_is_linear(const Domain<2>& dom) {
  return dom.kind() == DomainKind::ConvexPolygon;
}

inline ConstraintEval<1> containment(const Domain<1>& dom, int i, const Vec<1>& x) {
  ConstraintEval<1> e;
  const auto& iv = dom.interval();
  if (i == 0) {
    e.c = x(0) - iv.b;
    e.grad(0) = 1.0;
  } else {
    e.c = iv.a - x(0);
    e.grad(0) = -1.0;
  }
  return e;
}

inline ConstraintEval<2> containment(const Domain<2>& dom, int i, const Vec<2>& x) {
  ConstraintEval<2> e;
  if (dom.kind() == DomainKind::Disc) {
    const auto& d = dom.disc();
    const Eigen::Vector2d rel = x - d.center;
    const double len = rel.norm();
    e.c = len - d.radius;
    if (len > 0.0) {
      e.grad = rel / len;
      e.hess = (Eigen::Matrix2d::Identity() - e.grad * e.grad.transpose()) / len;
    }
    return e;
  }
  const auto& poly = dom.polygon();
  e.c = poly.normal(i).dot(x) - poly.offset(i);
  e.grad = poly.normal(i);
  return e;
}

template <int Dim>
bool is_admissible_state(const Domain<Dim>& dom, const State<Dim>& s, double tol = 1e-12) {
  if (signed_distance(dom, s.x) > tol) return false;
  for (int i = 0; i < containment_count(dom); ++i) {
    const auto e = containment(dom, i, s.x);
    if (e.c >= -tol && e.grad.dot(s.v) > tol) return false;
  }
  return true;
}

// ((v·∇d)_+)^{2p-1} / |d|^{p-1}; vertex mode uses the per-edge quantity at the nearest vertex.
inline double boundary_margin(const Domain<1>& dom, const State<1>& s, double p, bool = false) {
  const double d = signed_distance(dom, s.x);
  const auto nrm = outward_normal(dom, s.x);
  const double vn = std::max(0.0, nrm.n.dot(s.v));
  if (vn == 0.0) return 0.0;
  if (d == 0.0) return kInf;
  return std::pow(vn, 2.0 * p - 1.0) / std::pow(std::abs(d), p - 1.0);
}

inline double boundary_margin(const Domain<2>& dom, const State<2>& s, double p,
                              bool vertex_mode = false) {
  if (vertex_mode && dom.kind() == DomainKind::ConvexPolygon) {
    const auto& poly = dom.polygon();
    int j = 0;
    double best = kInf;
    for (int k = 0; k < poly.size(); ++k) {
      const double dist = (s.x - poly.vertex(k)).norm();
      if (dist < best) {
        best = dist;
        j = k;
      }
    }
    const Eigen::Vector2d rel = s.x - poly.vertex(j);
    double m = 0.0;
    for (int k : {j - 1, j}) {
      const Eigen::Vector2d& nk = poly.normal(k);
      const double num = std::max(0.0, s.v.dot(nk)) * (std::cbrt(rel.squaredNorm()) + s.v.squaredNorm());
      if (num == 0.0) continue;
      const double den = std::abs(rel.dot(nk));
      m = std::max(m, den == 0.0 ? kInf : num / den);
    }
    return m;
  }
  const double d = signed_distance(dom, s.x);
  Eigen::Vector2d n;
  if (dom.kind() == DomainKind::Disc) {
    const Eigen::Vector2d rel = s.x - dom.disc().center;
    if (rel.norm() == 0.0) return 0.0;
    n = rel.normalized();
  } else {
    const auto& poly = dom.polygon();
    n = poly.normal(detail::most_active_edge(poly, s.x));
    if (d > 0.0) n = outward_normal(dom, s.x).n;
  }
  const double vn = std::max(0.0, n.dot(s.v));
  if (vn == 0.0) return 0.0;
  if (d == 0.0) return kInf;
  return std::pow(vn, 2.0 * p - 1.0) / std::pow(std::abs(d), p - 1.0);
}

enum class ThetaMode { Interval1D, MarginSets };

template <int Dim>
struct ThetaRSpec {
  Domain<Dim> domain;
  double r = 1.0;
  ThetaMode mode = Dim == 1 ? ThetaMode::Interval1D : ThetaMode::MarginSets;
  double rho = 2.0;
};

inline bool in_theta_r(const ThetaRSpec<1>& spec, const State<1>& s) {
  const auto& iv = spec.domain.interval();
  const double x = s.x(0), v = s.v(0);
  if (spec.mode == ThetaMode::Interval1D) {
    if (x < iv.a || x > iv.b) return false;
    const double v3 = v * v * v;
    return -spec.r * (x - iv.a) <= v3 && v3 <= spec.r * (iv.b - x);
  }
  if (!is_admissible_state(spec.domain, s) || std::abs(v) > spec.r) return false;
  const double e = spec.rho / 3.0;
  return v <= std::pow(iv.b - x, e) && -v <= std::pow(x - iv.a, e);
}

inline bool in_theta_r(const ThetaRSpec<2>& spec, const State<2>& s) {
  if (spec.mode == ThetaMode::Interval1D)
    fail(Errc::ModeDomainMismatch, "Interval1D mode requires an interval domain");
  if (!is_admissible_state(spec.domain, s) || s.v.norm() > spec.r) return false;
  const double e = spec.rho / 3.0;
  if (spec.domain.kind() == DomainKind::Disc) {
    const Eigen::Vector2d rel = s.x - spec.domain.disc().center;
    if (rel.norm() == 0.0) return true;
    return s.v.dot(rel.normalized()) <= std::pow(std::abs(signed_distance(spec.domain, s.x)), e);
  }
  const auto& poly = spec.domain.polygon();
  const double vt = detail::vertex_tol(poly);
  for (int j = 0; j < poly.size(); ++j) {
    if ((s.x - poly.vertex(j)).norm() <= vt) return false;
    const double dist = std::abs(poly.normal(j).dot(s.x) - poly.offset(j));
    if (s.v.dot(poly.normal(j)) > std::pow(dist, e)) return false;
  }
  return true;
}

}  // namespace cmfg
