#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dynwire/expr.hpp"
#include "dynwire/wiring.hpp"

namespace dynwire {

// Side channel for observability of nested fixed-point solves.
struct EvalStats {
  double max_residual = 0.0;
};

using MealyFn = std::function<Vec(std::span<const double> input, std::span<const double> state, EvalStats& stats)>;

// Update and readout written as expressions over the machine's input and
// state labels.
struct MealyExprs {
  std::vector<Expr> update;   // one per state
  std::vector<Expr> readout;  // one per output port
};

// A Mealy machine: states S, update u(a, s) and readout r(a, s), where r
// respects the declared input -> output dependency.
class MealyMachine {
 public:
  // Expression-backed machine; the readout's dependency is checked exactly
  // from its free variables.
  static MealyMachine from_expressions(DepInterface iface, FinSet states, std::vector<Expr> update,
                                       std::vector<Expr> readout) {
    MealyMachine m;
    m.iface_ = std::move(iface);
    m.states_ = std::move(states);
    m.attach_exprs(MealyExprs{std::move(update), std::move(readout)});
    auto u = m.update_fun_;
    auto r = m.readout_fun_;
    m.update_ = [u](std::span<const double> a, std::span<const double> s, EvalStats&) { return u->eval({a, s}); };
    m.readout_ = [r](std::span<const double> a, std::span<const double> s, EvalStats&) { return r->eval({a, s}); };
    return m;
  }

  // Opaque machine; its readout can only be probe-tested (see readout_respects).
  static MealyMachine from_functions(DepInterface iface, FinSet states, MealyFn update, MealyFn readout) {
    MealyMachine m;
    m.iface_ = std::move(iface);
    m.states_ = std::move(states);
    m.update_ = std::move(update);
    m.readout_ = std::move(readout);
    return m;
  }

  // Numeric behaviour given by closures, plus an equivalent symbolic form.
  static MealyMachine from_parts(DepInterface iface, FinSet states, MealyFn update, MealyFn readout,
                                 std::optional<MealyExprs> exprs) {
    MealyMachine m = from_functions(std::move(iface), std::move(states), std::move(update), std::move(readout));
    if (exprs) m.attach_exprs(*std::move(exprs));
    return m;
  }

  const DepInterface& iface() const noexcept { return iface_; }
  const Interface& ports() const noexcept { return iface_.iface; }
  const Dependency& dependency() const noexcept { return iface_.dep; }
  const FinSet& states() const noexcept { return states_; }

  bool expression_backed() const noexcept { return exprs_.has_value(); }
  const MealyExprs& exprs() const {
    if (!exprs_) throw std::logic_error("machine has no expression form");
    return *exprs_;
  }
  const MealyFn& update_fn() const noexcept { return update_; }
  const MealyFn& readout_fn() const noexcept { return readout_; }
  const ExprFun& update_fun() const { return *update_fun_; }
  const ExprFun& readout_fun() const { return *readout_fun_; }

  Vec update(std::span<const double> a, std::span<const double> s, EvalStats& stats) const {
    check_args(a, s);
    return update_(a, s, stats);
  }
  Vec update(std::span<const double> a, std::span<const double> s) const {
    EvalStats stats;
    return update(a, s, stats);
  }
  Vec readout(std::span<const double> a, std::span<const double> s, EvalStats& stats) const {
    check_args(a, s);
    return readout_(a, s, stats);
  }
  Vec readout(std::span<const double> a, std::span<const double> s) const {
    EvalStats stats;
    return readout(a, s, stats);
  }

 private:
  MealyMachine() = default;

  void check_args(std::span<const double> a, std::span<const double> s) const {
    require_size(ports().inputs, a.size(), "Mealy input");
    require_size(states_, s.size(), "Mealy state");
  }

  void attach_exprs(MealyExprs e) {
    Signature sig{{Namespace::input, ports().inputs}, {Namespace::state, states_}};
    update_fun_ = std::make_shared<const ExprFun>(sig, states_, e.update);
    readout_fun_ = std::make_shared<const ExprFun>(sig, ports().outputs, e.readout);
    for (Index o = 0; o < readout_fun_->size(); ++o) {
      for (auto ref : readout_fun_->dependencies(o)) {
        if (ref.space == 0 && !dependency().contains(ref.index, o)) {
          throw ValidationError("readout for output '" + ports().outputs.label(o) + "' reads input '" +
                                ports().inputs.label(ref.index) + "' outside its declared dependency");
        }
      }
    }
    exprs_ = std::move(e);
  }

  DepInterface iface_;
  FinSet states_;
  MealyFn update_;
  MealyFn readout_;
  std::optional<MealyExprs> exprs_;
  std::shared_ptr<const ExprFun> update_fun_;
  std::shared_ptr<const ExprFun> readout_fun_;
};

struct RespectsReport {
  bool exact = false;                          // decided from free variables
  std::vector<Relation::Pair> violations;      // (input, output) read without permission
  ProbeReport probe;                           // populated for opaque machines
  bool ok() const { return violations.empty() && probe.ok(); }
};

// Does the readout respect the declared dependency? Exact for
// expression-backed machines, probe-based otherwise (states are free).
inline RespectsReport readout_respects(const MealyMachine& m, ProbeOptions opt = {}) {
  RespectsReport rep;
  const auto& d = m.dependency();
  if (m.expression_backed()) {
    rep.exact = true;
    const auto& r = m.readout_fun();
    for (Index o = 0; o < r.size(); ++o)
      for (auto ref : r.dependencies(o))
        if (ref.space == 0 && !d.contains(ref.index, o)) rep.violations.emplace_back(ref.index, o);
    return rep;
  }
  const std::size_t nin = m.ports().inputs.size(), ns = m.states().size();
  auto pairs = d.pairs();
  for (Index s = 0; s < ns; ++s)
    for (Index o = 0; o < m.ports().outputs.size(); ++o) pairs.emplace_back(nin + s, o);
  Relation extended(FinSet(nin + ns), m.ports().outputs, std::move(pairs));
  rep.probe = respects_probe(
      [&](std::span<const double> x) { return m.readout(x.first(nin), x.subspan(nin)); }, extended, opt);
  for (const auto& v : rep.probe.violations) rep.violations.emplace_back(v.perturbed_input, v.output);
  std::sort(rep.violations.begin(), rep.violations.end());
  rep.violations.erase(std::unique(rep.violations.begin(), rep.violations.end()), rep.violations.end());
  return rep;
}

struct IOFixedPoint {
  Vec x_in;
  Vec x_out;
  double residual = 0.0;
};

struct FixedPointOptions {
  double tol = 1e-9;
  std::optional<std::pair<Vec, Vec>> initial;  // defaults to (a, 0)
};

// Fixed point of (x_in, x_out) |-> (w*(x_out) + a, r(x_in, s)). Acyclicity
// of the certified diagram makes |X_in| + |X_out| passes sufficient from any
// start; the residual check catches readouts that break their dependency.
inline IOFixedPoint io_fixed_point(const DepWiringDiagram& f, const MealyMachine& m, std::span<const double> a,
                                   std::span<const double> s, const FixedPointOptions& opt, EvalStats& stats) {
  const auto& wd = f.diagram();
  if (!same_shape(wd.dom(), m.ports())) throw MismatchError("io_fixed_point: machine interface does not match diagram");
  require_size(wd.dom().inputs, a.size(), "io_fixed_point input");
  IOFixedPoint fp;
  if (opt.initial) {
    fp.x_in = opt.initial->first;
    fp.x_out = opt.initial->second;
    require_size(wd.dom().inputs, fp.x_in.size(), "io_fixed_point initial inputs");
    require_size(wd.dom().outputs, fp.x_out.size(), "io_fixed_point initial outputs");
  } else {
    fp.x_in.assign(a.begin(), a.end());
    fp.x_out.assign(wd.dom().outputs.size(), 0.0);
  }
  auto step = [&](const Vec& xin, const Vec& xout) {
    Vec nin = span_apply(wd.w(), xout);
    for (Index i = 0; i < nin.size(); ++i) nin[i] += a[i];
    Vec nout = m.readout(xin, s, stats);
    return std::pair{std::move(nin), std::move(nout)};
  };
  const std::size_t passes = wd.dom().inputs.size() + wd.dom().outputs.size();
  for (std::size_t k = 0; k < passes; ++k) {
    auto [nin, nout] = step(fp.x_in, fp.x_out);
    fp.x_in = std::move(nin);
    fp.x_out = std::move(nout);
  }
  auto [cin, cout] = step(fp.x_in, fp.x_out);
  double res = 0.0;
  auto acc = [&](const Vec& x, const Vec& y) {
    for (Index i = 0; i < x.size(); ++i) {
      if (x[i] == y[i]) continue;
      double d = std::abs(x[i] - y[i]);
      res = std::max(res, std::isnan(d) ? INFINITY : d);
    }
  };
  acc(cin, fp.x_in);
  acc(cout, fp.x_out);
  fp.residual = res;
  stats.max_residual = std::max(stats.max_residual, res);
  if (!(res <= opt.tol)) {
    throw NumericError("fixed point not reached (residual " + std::to_string(res) +
                       "): the readout reads an undeclared dependency or the certificate is invalid");
  }
  return fp;
}

inline IOFixedPoint io_fixed_point(const DepWiringDiagram& f, const MealyMachine& m, std::span<const double> a,
                                   std::span<const double> s, const FixedPointOptions& opt = {}) {
  EvalStats stats;
  return io_fixed_point(f, m, a, s, opt, stats);
}

namespace detail {

// Expressions for the fixed point (x_in, x_out), written over the outer
// input labels and the machine's states, built in certificate order.
inline std::pair<std::vector<Expr>, std::vector<Expr>> symbolic_fixed_point(const DepWiringDiagram& f,
                                                                             const MealyMachine& m) {
  const auto& wd = f.diagram();
  const std::size_t nin = wd.dom().inputs.size();
  std::vector<std::optional<Expr>> xin(nin), xout(wd.dom().outputs.size());
  std::vector<std::vector<Index>> trace_into(nin), wires_into(nin);
  for (Index w = 0; w < wd.w().size(); ++w) trace_into[wd.w().right()(w)].push_back(w);
  for (Index w = 0; w < wd.w_in().size(); ++w) wires_into[wd.w_in().right()(w)].push_back(w);
  const auto& in_labels = m.ports().inputs;
  for (Index v : f.certificate()) {
    if (v < nin) {
      std::vector<Expr> trace, outer;
      for (Index w : trace_into[v]) trace.push_back(*xout.at(wd.w().left()(w)));
      for (Index w : wires_into[v]) outer.push_back(Expr::variable(wd.cod().inputs.label(wd.w_in().left()(w))));
      if (trace.empty()) {
        xin[v] = sum_of(outer);
      } else if (outer.empty()) {
        xin[v] = sum_of(trace);
      } else {
        xin[v] = sum_of(trace) + sum_of(outer);
      }
    } else {
      Index o = v - nin;
      xout[o] = substitute(m.exprs().readout[o], [&](const std::string& name) -> std::optional<Expr> {
        if (auto i = in_labels.find(name)) return *xin.at(*i);
        return std::nullopt;
      });
    }
  }
  std::vector<Expr> ins, outs;
  for (auto& e : xin) ins.push_back(*e);
  for (auto& e : xout) outs.push_back(*e);
  return {std::move(ins), std::move(outs)};
}

}  // namespace detail

// Mealy(f): same states; update (y, s) |-> u(x_in*, s) and readout
// (y, s) |-> w_out*(x_out*), where (x_in*, x_out*) is the fixed point driven
// by a = w_in*(y).
inline MealyMachine apply_wiring(const DepWiringDiagram& f, const MealyMachine& m, FixedPointOptions opt = {}) {
  const auto& wd = f.diagram();
  if (!same_shape(wd.dom(), m.ports())) throw MismatchError("apply_wiring: machine interface does not match diagram domain");
  if (!relation_leq(m.dependency(), f.dom_dep())) {
    throw MismatchError("apply_wiring: machine dependency is not contained in the diagram's inner dependency");
  }
  opt.initial.reset();
  auto inner = std::make_shared<const MealyMachine>(m);
  auto diagram = std::make_shared<const DepWiringDiagram>(f);
  MealyFn update = [inner, diagram, opt](std::span<const double> y, std::span<const double> s, EvalStats& st) {
    Vec a = span_apply(diagram->diagram().w_in(), y);
    auto fp = io_fixed_point(*diagram, *inner, a, s, opt, st);
    return inner->update(fp.x_in, s, st);
  };
  MealyFn readout = [inner, diagram, opt](std::span<const double> y, std::span<const double> s, EvalStats& st) {
    Vec a = span_apply(diagram->diagram().w_in(), y);
    auto fp = io_fixed_point(*diagram, *inner, a, s, opt, st);
    return span_apply(diagram->diagram().w_out(), fp.x_out);
  };

  std::optional<MealyExprs> exprs;
  if (m.expression_backed()) {
    auto [xin, xout] = detail::symbolic_fixed_point(f, m);
    MealyExprs e;
    for (const auto& u : m.exprs().update) {
      e.update.push_back(substitute(u, [&](const std::string& name) -> std::optional<Expr> {
        if (auto i = m.ports().inputs.find(name)) return xin[*i];
        return std::nullopt;
      }));
    }
    std::vector<std::vector<Expr>> terms(wd.cod().outputs.size());
    for (Index w = 0; w < wd.w_out().size(); ++w) terms[wd.w_out().right()(w)].push_back(xout[wd.w_out().left()(w)]);
    for (auto& t : terms) e.readout.push_back(sum_of(t));
    exprs = std::move(e);
  }
  return MealyMachine::from_parts(f.cod(), m.states(), std::move(update), std::move(readout), std::move(exprs));
}

namespace detail {

inline std::map<std::string, std::string> relabel_map(const FinSet& from, const FinSet& to, Index offset) {
  std::map<std::string, std::string> out;
  for (Index i = 0; i < from.size(); ++i) out.emplace(from.label(i), to.label(offset + i));
  return out;
}

inline std::vector<Expr> relabel_all(const std::vector<Expr>& es, const std::map<std::string, std::string>& names) {
  std::vector<Expr> out;
  out.reserve(es.size());
  for (const auto& e : es) out.push_back(rename_vars(e, names));
  return out;
}

inline std::map<std::string, std::string> merged(std::map<std::string, std::string> a,
                                                 const std::map<std::string, std::string>& b) {
  a.insert(b.begin(), b.end());
  return a;
}

}  // namespace detail

// The same machine with every port and state label prefixed, e.g. "A.".
inline MealyMachine with_prefix(const MealyMachine& m, const std::string& prefix) {
  Interface ports{m.ports().inputs.prefixed(prefix), m.ports().outputs.prefixed(prefix)};
  FinSet states = m.states().prefixed(prefix);
  DepInterface iface(ports, Relation(ports.inputs, ports.outputs, m.dependency().pairs()));
  if (!m.expression_backed()) return MealyMachine::from_functions(iface, states, m.update_fn(), m.readout_fn());
  auto names = detail::merged(detail::relabel_map(m.ports().inputs, ports.inputs, 0),
                              detail::relabel_map(m.states(), states, 0));
  return MealyMachine::from_expressions(iface, states, detail::relabel_all(m.exprs().update, names),
                                        detail::relabel_all(m.exprs().readout, names));
}

// m1 (+) m2: interfaces, dependencies and states side by side. Colliding
// labels pick up "left." / "right." prefixes.
inline MealyMachine parallel(const MealyMachine& m1, const MealyMachine& m2) {
  Interface ports = oplus_interface(m1.ports(), m2.ports());
  DepInterface iface(ports, oplus_dependency(m1.dependency(), m2.dependency(), ports));
  FinSet states = finset_coproduct(m1.states(), m2.states()).set;
  const std::size_t n1 = m1.ports().inputs.size(), s1 = m1.states().size();
  auto a = std::make_shared<const MealyMachine>(m1);
  auto b = std::make_shared<const MealyMachine>(m2);
  auto split = [a, b, n1, s1](auto pick) {
    return [a, b, n1, s1, pick](std::span<const double> x, std::span<const double> s, EvalStats& st) {
      Vec out = pick(*a, x.first(n1), s.first(s1), st);
      Vec rest = pick(*b, x.subspan(n1), s.subspan(s1), st);
      out.insert(out.end(), rest.begin(), rest.end());
      return out;
    };
  };
  MealyFn update = split([](const MealyMachine& m, auto x, auto s, EvalStats& st) { return m.update(x, s, st); });
  MealyFn readout = split([](const MealyMachine& m, auto x, auto s, EvalStats& st) { return m.readout(x, s, st); });
  std::optional<MealyExprs> exprs;
  if (m1.expression_backed() && m2.expression_backed()) {
    auto n_left = detail::merged(detail::relabel_map(m1.ports().inputs, ports.inputs, 0),
                                 detail::relabel_map(m1.states(), states, 0));
    auto n_right = detail::merged(detail::relabel_map(m2.ports().inputs, ports.inputs, n1),
                                  detail::relabel_map(m2.states(), states, s1));
    MealyExprs e{detail::relabel_all(m1.exprs().update, n_left), detail::relabel_all(m1.exprs().readout, n_left)};
    for (auto& x : detail::relabel_all(m2.exprs().update, n_right)) e.update.push_back(x);
    for (auto& x : detail::relabel_all(m2.exprs().readout, n_right)) e.readout.push_back(x);
    exprs = std::move(e);
  }
  return MealyMachine::from_parts(std::move(iface), std::move(states), std::move(update), std::move(readout),
                                  std::move(exprs));
}

inline MealyMachine parallel(const std::vector<MealyMachine>& ms) {
  if (ms.empty()) {
    return MealyMachine::from_functions(
        DepInterface(Interface{FinSet(0), FinSet(0)}, Relation(FinSet(0), FinSet(0))), FinSet(0),
        [](auto, auto, EvalStats&) { return Vec{}; }, [](auto, auto, EvalStats&) { return Vec{}; });
  }
  MealyMachine acc = ms.front();
  for (std::size_t k = 1; k < ms.size(); ++k) acc = parallel(acc, ms[k]);
  return acc;
}

struct StepResult {
  Vec next_state;
  Vec output;
};

inline StepResult step(const MealyMachine& m, std::span<const double> input, std::span<const double> state) {
  EvalStats st;
  StepResult r{m.update(input, state, st), m.readout(input, state, st)};
  if (auto bad = nonfinite_entries(r.next_state); !bad.empty()) {
    throw NumericError("non-finite state '" + m.states().label(bad.front()) + "'", NumericError::npos, bad.front());
  }
  if (auto bad = nonfinite_entries(r.output); !bad.empty()) {
    throw NumericError("non-finite output '" + m.ports().outputs.label(bad.front()) + "'", NumericError::npos, bad.front());
  }
  return r;
}

struct RunTrace {
  std::vector<Vec> states;   // state before each step
  std::vector<Vec> outputs;  // output at each step
  Vec final_state;
};

// Runs n steps; inputs(k) gives the input at step k.
inline RunTrace run(const MealyMachine& m, Vec s0, std::size_t n, const std::function<Vec(std::size_t)>& inputs) {
  require_size(m.states(), s0.size(), "run initial state");
  RunTrace trace;
  Vec s = std::move(s0);
  for (std::size_t k = 0; k < n; ++k) {
    Vec a = inputs(k);
    StepResult r;
    try {
      r = step(m, a, s);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at step " + std::to_string(k), k, e.coordinate());
    }
    trace.states.push_back(s);
    trace.outputs.push_back(std::move(r.output));
    s = std::move(r.next_state);
  }
  trace.final_state = std::move(s);
  return trace;
}

}  // namespace dynwire
