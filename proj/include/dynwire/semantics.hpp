#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dynwire/mealy.hpp"
#include "dynwire/stockflow.hpp"

namespace dynwire {

// φ̄(a, s): the variable values. Sum variables come from the stock-sum links,
// then the aux map is iterated |var| times from zero; var-link acyclicity
// makes that enough, and a final residual check catches aux functions that
// read more than their links admit.
inline Vec var_fixed_point(const StockFlowDiagram& sf, std::span<const double> a, std::span<const double> s,
                           EvalStats& stats, double tol = 1e-9) {
  const auto& p = sf.parts();
  require_size(p.inport, a.size(), "var_fixed_point input");
  require_size(p.stock, s.size(), "var_fixed_point stocks");
  Vec sums = span_apply(p.stock_sum_link, s);
  Vec x(p.var.size(), 0.0);
  const auto& aux = sf.aux_fun();
  for (std::size_t k = 0; k < p.var.size(); ++k) x = aux.eval({s, sums, x, a});
  Vec again = aux.eval({s, sums, x, a});
  double res = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    if (again[i] == x[i]) continue;
    double d = std::abs(again[i] - x[i]);
    res = std::max(res, std::isnan(d) ? INFINITY : d);
  }
  stats.max_residual = std::max(stats.max_residual, res);
  if (!(res <= tol)) {
    throw NumericError("variable fixed point not reached (residual " + std::to_string(res) +
                       "): an aux expression reads a variable it is not linked to");
  }
  return x;
}

inline Vec var_fixed_point(const StockFlowDiagram& sf, std::span<const double> a, std::span<const double> s) {
  EvalStats stats;
  return var_fixed_point(sf, a, s, stats);
}

// Net rate of change of each stock: inflow rates minus outflow rates.
inline Vec stock_derivative(const StockFlowDiagram& sf, std::span<const double> vars) {
  const auto& p = sf.parts();
  Vec rates = pullback_vec(p.fv, vars);
  Vec in = pushforward_vec(p.is, pullback_vec(p.iflow, rates));
  Vec out = pushforward_vec(p.os, pullback_vec(p.oflow, rates));
  for (Index i = 0; i < in.size(); ++i) in[i] -= out[i];
  return in;
}

// Each variable as an expression over input ports and stocks.
inline std::vector<Expr> expand_vars(const StockFlowDiagram& sf) {
  const auto& p = sf.parts();
  auto topo = topological_order(DiGraph(p.var_link));
  if (!topo.acyclic) throw ValidationError("expand_vars: var links form a cycle");
  std::vector<Expr> sum_exprs;
  {
    std::vector<std::vector<Expr>> terms(p.sumvar.size());
    for (Index l = 0; l < p.stock_sum_link.size(); ++l) {
      auto [st, sv] = p.stock_sum_link.leg_pair(l);
      terms[sv].push_back(Expr::variable(p.stock.label(st)));
    }
    for (auto& t : terms) sum_exprs.push_back(sum_of(t));
  }
  std::vector<std::optional<Expr>> done(p.var.size());
  for (Index v : topo.order) {
    done[v] = substitute(p.aux[v], [&](const std::string& name) -> std::optional<Expr> {
      if (auto i = p.var.find(name)) return *done.at(*i);
      if (auto i = p.sumvar.find(name)) return sum_exprs[*i];
      return std::nullopt;
    });
  }
  std::vector<Expr> out;
  for (auto& e : done) out.push_back(*e);
  return out;
}

// α: the Mealy machine of a stock-flow diagram. States are the stocks, the
// update is the net flow (a tangent vector), the readout is out_link*(φ̄).
inline MealyMachine to_mealy(const StockFlowDiagram& sf) {
  require_valid(sf, "to_mealy");
  auto model = std::make_shared<const StockFlowDiagram>(sf);
  MealyFn update = [model](std::span<const double> a, std::span<const double> s, EvalStats& st) {
    return stock_derivative(*model, var_fixed_point(*model, a, s, st));
  };
  MealyFn readout = [model](std::span<const double> a, std::span<const double> s, EvalStats& st) {
    return span_apply(model->parts().out_link, var_fixed_point(*model, a, s, st));
  };

  const auto& p = sf.parts();
  auto vars = expand_vars(sf);
  MealyExprs e;
  std::vector<std::vector<Expr>> gains(p.stock.size()), losses(p.stock.size());
  for (Index i = 0; i < p.inflow.size(); ++i) gains[p.is(i)].push_back(vars[p.fv(p.iflow(i))]);
  for (Index o = 0; o < p.outflow.size(); ++o) losses[p.os(o)].push_back(vars[p.fv(p.oflow(o))]);
  for (Index k = 0; k < p.stock.size(); ++k) {
    if (losses[k].empty()) {
      e.update.push_back(sum_of(gains[k]));
    } else if (gains[k].empty()) {
      e.update.push_back(-sum_of(losses[k]));
    } else {
      e.update.push_back(sum_of(gains[k]) - sum_of(losses[k]));
    }
  }
  std::vector<std::vector<Expr>> outs(p.outport.size());
  for (Index l = 0; l < p.out_link.size(); ++l) {
    auto [v, o] = p.out_link.leg_pair(l);
    outs[o].push_back(vars[v]);
  }
  for (auto& t : outs) e.readout.push_back(sum_of(t));
  return MealyMachine::from_parts(sf.iface(), p.stock, std::move(update), std::move(readout), std::move(e));
}

// --- input signals ----------------------------------------------------------

// Time-varying input a(t): a piecewise-constant table (left-closed, holding
// the first value before the first breakpoint) or expressions in `t`.
class InputSignal {
 public:
  struct Breakpoint {
    double time;
    Vec value;
  };

  static InputSignal constant(FinSet ports, Vec value) {
    return table(std::move(ports), {{0.0, std::move(value)}});
  }

  static InputSignal table(FinSet ports, std::vector<Breakpoint> rows) {
    if (rows.empty()) {
      if (!ports.empty()) throw StructureError("input table has no rows");
      rows.push_back({0.0, {}});
    }
    for (std::size_t k = 0; k < rows.size(); ++k) {
      require_size(ports, rows[k].value.size(), "input table row");
      if (!std::isfinite(rows[k].time)) throw StructureError("input table time must be finite");
      if (k && !(rows[k].time > rows[k - 1].time)) throw StructureError("input table times must be strictly increasing");
    }
    InputSignal s;
    s.ports_ = std::move(ports);
    s.rep_ = std::move(rows);
    return s;
  }

  static InputSignal expressions(FinSet ports, std::vector<Expr> exprs) {
    InputSignal s;
    s.ports_ = ports;
    s.rep_ = std::make_shared<const ExprFun>(Signature{{Namespace::time, FinSet(std::vector<std::string>{"t"})}},
                                             std::move(ports), std::move(exprs));
    return s;
  }

  const FinSet& ports() const noexcept { return ports_; }
  bool is_table() const noexcept { return std::holds_alternative<std::vector<Breakpoint>>(rep_); }
  const std::vector<Breakpoint>& rows() const { return std::get<std::vector<Breakpoint>>(rep_); }
  const ExprFun& exprs() const { return *std::get<std::shared_ptr<const ExprFun>>(rep_); }

  Vec at(double t) const {
    if (auto* rows = std::get_if<std::vector<Breakpoint>>(&rep_)) {
      auto it = std::upper_bound(rows->begin(), rows->end(), t,
                                 [](double x, const Breakpoint& b) { return x < b.time; });
      return it == rows->begin() ? rows->front().value : std::prev(it)->value;
    }
    double tt[1] = {t};
    return exprs().eval({std::span<const double>(tt)});
  }

 private:
  FinSet ports_;
  std::variant<std::vector<Breakpoint>, std::shared_ptr<const ExprFun>> rep_;
};

// --- integration ------------------------------------------------------------

enum class Method { euler, rk4 };

inline std::string_view method_name(Method m) { return m == Method::euler ? "euler" : "rk4"; }

inline std::optional<Method> method_from_name(std::string_view n) {
  if (n == "euler") return Method::euler;
  if (n == "rk4") return Method::rk4;
  return std::nullopt;
}

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> outputs;
  FinSet state_names;
  FinSet output_names;
  struct Meta {
    Method method = Method::rk4;
    double dt = 0.0;
    double max_residual = 0.0;
  } meta;
};

// Fixed-step explicit integration of ds/dt = u(a(t), s). The last step is
// shortened so the final time is exactly t1; step counts within 1e-9 of an
// integer are rounded rather than given a sliver step.
inline Trajectory integrate(const MealyMachine& m, Vec s0, const InputSignal& signal, double t0, double t1,
                            double dt, Method method) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw MismatchError("integrate: dt must be positive and finite");
  if (!(t1 > t0)) throw MismatchError("integrate: t1 must exceed t0");
  require_size(m.states(), s0.size(), "integrate initial state");
  require_same(m.ports().inputs, signal.ports(), "integrate input signal");

  const double span = (t1 - t0) / dt;
  const double nearest = std::round(span);
  const std::size_t n = static_cast<std::size_t>(std::abs(span - nearest) <= 1e-9 * std::max(1.0, span) ? nearest
                                                                                                        : std::ceil(span));
  Trajectory tr;
  tr.state_names = m.states();
  tr.output_names = m.ports().outputs;
  tr.meta.method = method;
  tr.meta.dt = dt;
  EvalStats stats;

  auto check = [&](const Vec& v, std::size_t k, const char* what, const FinSet& names) {
    if (auto bad = nonfinite_entries(v); !bad.empty()) {
      throw NumericError(std::string("non-finite ") + what + " '" + names.label(bad.front()) + "' at step " +
                             std::to_string(k),
                         k, bad.front());
    }
  };
  auto deriv = [&](double t, const Vec& s, std::size_t k) {
    Vec d = m.update(signal.at(t), s, stats);
    check(d, k, "derivative of", m.states());
    return d;
  };
  auto record = [&](double t, const Vec& s, std::size_t k) {
    Vec y = m.readout(signal.at(t), s, stats);
    check(y, k, "output", m.ports().outputs);
    tr.times.push_back(t);
    tr.states.push_back(s);
    tr.outputs.push_back(std::move(y));
  };

  Vec s = std::move(s0);
  check(s, 0, "state", m.states());
  record(t0, s, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    const double next = (k + 1 == n) ? t1 : t0 + static_cast<double>(k + 1) * dt;
    const double h = next - t;
    if (method == Method::euler) {
      Vec d = deriv(t, s, k);
      for (Index i = 0; i < s.size(); ++i) s[i] += h * d[i];
    } else {
      auto shifted = [&](const Vec& d, double c) {
        Vec out = s;
        for (Index i = 0; i < out.size(); ++i) out[i] += c * d[i];
        return out;
      };
      Vec k1 = deriv(t, s, k);
      Vec k2 = deriv(t + h / 2, shifted(k1, h / 2), k);
      Vec k3 = deriv(t + h / 2, shifted(k2, h / 2), k);
      Vec k4 = deriv(t + h, shifted(k3, h), k);
      for (Index i = 0; i < s.size(); ++i) s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    check(s, k + 1, "state", m.states());
    record(next, s, k + 1);
  }
  tr.meta.max_residual = stats.max_residual;
  return tr;
}

inline Trajectory simulate_sf(const StockFlowDiagram& sf, Vec s0, const InputSignal& signal, double t0, double t1,
                              double dt, Method method) {
  return integrate(to_mealy(sf), std::move(s0), signal, t0, t1, dt, method);
}

}  // namespace dynwire
