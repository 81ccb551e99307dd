#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "cmfg/error.hpp"
#include "cmfg/mfg.hpp"
#include "cmfg/trajectory.hpp"

namespace cmfg::io {

// Shortest decimal that round-trips to the same double.
inline std::string fmt(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc{}) fail(Errc::InvalidArgument, "float formatting failed");
  return std::string(buf, p);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  double x = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc{} || p != s.data() + s.size()) fail(Errc::ConfigError, "not a number: '" + std::string(s) + "'");
  return x;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto k = s.find(sep, start);
    out.emplace_back(s.substr(start, k == std::string_view::npos ? std::string_view::npos : k - start));
    if (k == std::string_view::npos) break;
    start = k + 1;
  }
  return out;
}

inline std::vector<double> parse_list(std::string_view s) {
  std::vector<double> out;
  for (const auto& tok : split(s, ',')) out.push_back(parse_double(tok));
  return out;
}

template <int Dim>
std::string csv_header() {
  std::string h = "t";
  for (int d = 0; d < Dim; ++d) h += ",x" + std::to_string(d);
  for (int d = 0; d < Dim; ++d) h += ",v" + std::to_string(d);
  return h;
}

template <int Dim>
void write_state_row(std::ostream& os, const State<Dim>& s) {
  for (int d = 0; d < Dim; ++d) os << ',' << fmt(s.x(d));
  for (int d = 0; d < Dim; ++d) os << ',' << fmt(s.v(d));
}

// Knot table `t,x…,v…`; read_trajectory_csv inverts it bit-exactly.
template <int Dim>
void write_trajectory_csv(std::ostream& os, const Trajectory<Dim>& tr) {
  os << csv_header<Dim>() << '\n';
  for (int i = 0; i < tr.knot_count(); ++i) {
    os << fmt(tr.times()[i]);
    write_state_row(os, tr.knot(i));
    os << '\n';
  }
}

template <int Dim>
Trajectory<Dim> read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != csv_header<Dim>()) fail(Errc::ConfigError, "unexpected trajectory header");
  std::vector<double> ts;
  std::vector<State<Dim>> ks;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (static_cast<int>(f.size()) != 1 + 2 * Dim) fail(Errc::ConfigError, "bad trajectory row");
    ts.push_back(parse_double(f[0]));
    State<Dim> s;
    for (int d = 0; d < Dim; ++d) s.x(d) = parse_double(f[1 + d]);
    for (int d = 0; d < Dim; ++d) s.v(d) = parse_double(f[1 + Dim + d]);
    ks.push_back(s);
  }
  return Trajectory<Dim>(std::move(ts), std::move(ks));
}

// Long table of all atoms: atom,agent,weight,t,x…,v…
template <int Dim>
void write_atoms_csv(std::ostream& os, const TrajectoryMeasure<Dim>& mu) {
  os << "atom,agent,weight," << csv_header<Dim>() << '\n';
  int k = 0;
  for (const auto& a : mu.atoms()) {
    for (int i = 0; i < a.traj.knot_count(); ++i) {
      os << k << ',' << a.agent << ',' << fmt(a.weight) << ',' << fmt(a.traj.times()[i]);
      write_state_row(os, a.traj.knot(i));
      os << '\n';
    }
    ++k;
  }
}

template <int Dim>
void write_snapshots_csv(std::ostream& os, const std::vector<double>& times,
                         const std::vector<EmpiricalStateMeasure<Dim>>& m) {
  os << "weight," << csv_header<Dim>() << '\n';
  for (std::size_t k = 0; k < times.size(); ++k)
    for (int i = 0; i < m[k].size(); ++i) {
      os << fmt(m[k].weights[i]) << ',' << fmt(times[k]);
      write_state_row(os, m[k].states[i]);
      os << '\n';
    }
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(Errc::ConfigError, "cannot write " + path);
  f << content;
}

}  // namespace cmfg::io
