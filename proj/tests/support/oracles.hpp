#pragma once

// Slow, independent reference computations used to cross-check the library.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "dynwire/semantics.hpp"

namespace ref {

using namespace dynwire;

// Boolean transitive closure by Warshall's algorithm.
inline Relation warshall_closure(const DiGraph& g, bool reflexive) {
  const std::size_t n = g.vertices().size();
  std::vector<std::vector<char>> m(n, std::vector<char>(n, 0));
  for (Index e = 0; e < g.edges().size(); ++e) m[g.src()(e)][g.tgt()(e)] = 1;
  for (Index k = 0; k < n; ++k)
    for (Index i = 0; i < n; ++i)
      if (m[i][k])
        for (Index j = 0; j < n; ++j)
          if (m[k][j]) m[i][j] = 1;
  std::vector<Relation::Pair> p;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (m[i][j] || (reflexive && i == j)) p.emplace_back(i, j);
  return Relation(g.vertices(), g.vertices(), p);
}

// Does the graph have a cycle? Plain DFS colouring.
inline bool has_cycle(const DiGraph& g) {
  const std::size_t n = g.vertices().size();
  auto adj = g.out_edges();
  std::vector<int> colour(n, 0);
  std::function<bool(Index)> visit = [&](Index v) {
    colour[v] = 1;
    for (Index e : adj[v]) {
      Index w = g.tgt()(e);
      if (colour[w] == 1) return true;
      if (colour[w] == 0 && visit(w)) return true;
    }
    colour[v] = 2;
    return false;
  };
  for (Index v = 0; v < n; ++v)
    if (colour[v] == 0 && visit(v)) return true;
  return false;
}

// Demand-driven fixed point for expression-backed machines: each inner
// output is evaluated with only its related inputs filled in, the rest set
// to NaN so that an undeclared read shows up as NaN.
struct DemandResult {
  Vec x_in, x_out;
};

inline DemandResult demand_fixed_point(const DepWiringDiagram& F, const MealyMachine& m, const Vec& a, const Vec& s) {
  const auto& wd = F.diagram();
  const std::size_t nin = wd.dom().inputs.size(), nout = wd.dom().outputs.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::optional<double>> xin(nin), xout(nout);
  std::function<double(Index)> input, output;
  input = [&](Index i) {
    if (xin[i]) return *xin[i];
    double v = a[i];
    for (Index w = 0; w < wd.w().size(); ++w) {
      auto [o, j] = wd.w().leg_pair(w);
      if (j == i) v += output(o);
    }
    xin[i] = v;
    return v;
  };
  output = [&](Index o) {
    if (xout[o]) return *xout[o];
    Vec env(nin, nan);
    for (Index i : m.dependency().related_to(o)) env[i] = input(i);
    std::span<const double> args[2] = {env, s};
    double v = m.readout_fun().eval_one(o, args);
    xout[o] = v;
    return v;
  };
  DemandResult r;
  for (Index i = 0; i < nin; ++i) r.x_in.push_back(input(i));
  for (Index o = 0; o < nout; ++o) r.x_out.push_back(output(o));
  return r;
}

// φ̄ by evaluating each variable once in a topological order of var links,
// with sum variables computed directly from their stocks.
inline Vec topo_vars(const StockFlowDiagram& sf, const Vec& a, const Vec& s) {
  const auto& p = sf.parts();
  Vec sums(p.sumvar.size(), 0.0);
  for (Index l = 0; l < p.stock_sum_link.size(); ++l) {
    auto [st, sv] = p.stock_sum_link.leg_pair(l);
    sums[sv] += s[st];
  }
  Vec x(p.var.size(), std::numeric_limits<double>::quiet_NaN());
  auto topo = topological_order(DiGraph(p.var_link));
  for (Index v : topo.order) {
    std::span<const double> env[4] = {s, sums, x, a};
    x[v] = sf.aux_fun().eval_one(v, env);
  }
  return x;
}

// The SIR equations written out by hand.
struct Sir {
  double c, beta, tau, omega;
  Vec update(const Vec& x) const {
    const double S = x[0], I = x[1], R = x[2];
    const double inf = c * beta * S * I / (S + I + R);
    return {omega * R - inf, inf - tau * I, tau * I - omega * R};
  }
  double readout(const Vec& x) const { return c * beta * x[0] * x[1] / (x[0] + x[1] + x[2]); }
};

inline bool close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

inline bool close(const Vec& a, const Vec& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!close(a[i], b[i], tol)) return false;
  return true;
}

}  // namespace ref
