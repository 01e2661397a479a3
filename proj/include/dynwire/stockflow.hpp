#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dynwire/expr.hpp"
#include "dynwire/wiring.hpp"

namespace dynwire {

// Raw ingredients of an open stock-flow diagram. Inflow i feeds flow iflow(i)
// into stock is(i); outflow o drains stock os(o) through flow oflow(o).
struct StockFlowParts {
  FinSet stock, flow, var, sumvar, inport, outport;
  FinSet inflow, outflow;
  FinMap is, iflow, os, oflow, fv;
  Span stock_link;      // stock  -> var
  Span stock_sum_link;  // stock  -> sumvar
  Span sum_link;        // sumvar -> var
  Span var_link;        // var    -> var
  Span in_link;         // inport -> var
  Span out_link;        // var    -> outport
  std::vector<Expr> aux;  // one per var
  Dependency dependency;  // inport -> outport
};

// Namespace positions in the aux signature.
inline constexpr std::size_t kAuxStock = 0, kAuxSumvar = 1, kAuxVar = 2, kAuxInput = 3;

// Structurally consistent stock-flow diagram. Well-formedness (the four
// conditions plus aux locality) is checked separately by validate_stockflow.
class StockFlowDiagram {
 public:
  StockFlowDiagram() : StockFlowDiagram(empty_parts()) {}

  explicit StockFlowDiagram(StockFlowParts p) : p_(std::move(p)) {
    auto dom_cod = [](const FinMap& f, const FinSet& d, const FinSet& c, const char* what) {
      require_same(f.dom(), d, what);
      require_same(f.cod(), c, what);
    };
    dom_cod(p_.is, p_.inflow, p_.stock, "is");
    dom_cod(p_.iflow, p_.inflow, p_.flow, "iflow");
    dom_cod(p_.os, p_.outflow, p_.stock, "os");
    dom_cod(p_.oflow, p_.outflow, p_.flow, "oflow");
    dom_cod(p_.fv, p_.flow, p_.var, "fv");
    auto ends = [](const Span& s, const FinSet& a, const FinSet& b, const char* what) {
      require_same(s.src(), a, what);
      require_same(s.tgt(), b, what);
    };
    ends(p_.stock_link, p_.stock, p_.var, "stock_link");
    ends(p_.stock_sum_link, p_.stock, p_.sumvar, "stock_sum_link");
    ends(p_.sum_link, p_.sumvar, p_.var, "sum_link");
    ends(p_.var_link, p_.var, p_.var, "var_link");
    ends(p_.in_link, p_.inport, p_.var, "in_link");
    ends(p_.out_link, p_.var, p_.outport, "out_link");
    require_size(p_.var, p_.aux.size(), "aux expressions");
    require_dependency_on(Interface{p_.inport, p_.outport}, p_.dependency, "stock-flow dependency");
    Signature sig{{Namespace::stock, p_.stock},
                  {Namespace::sumvar, p_.sumvar},
                  {Namespace::var, p_.var},
                  {Namespace::input, p_.inport}};
    aux_ = std::make_shared<const ExprFun>(sig, p_.var, p_.aux);
  }

  const StockFlowParts& parts() const noexcept { return p_; }
  const FinSet& stocks() const noexcept { return p_.stock; }
  const FinSet& flows() const noexcept { return p_.flow; }
  const FinSet& vars() const noexcept { return p_.var; }
  const FinSet& sumvars() const noexcept { return p_.sumvar; }
  const FinSet& inports() const noexcept { return p_.inport; }
  const FinSet& outports() const noexcept { return p_.outport; }
  const std::vector<Expr>& aux() const noexcept { return p_.aux; }
  const ExprFun& aux_fun() const noexcept { return *aux_; }
  Interface ports() const { return {p_.inport, p_.outport}; }
  DepInterface iface() const { return {ports(), p_.dependency}; }
  const Dependency& dependency() const noexcept { return p_.dependency; }

 private:
  static StockFlowParts empty_parts() {
    StockFlowParts p;
    p.stock = p.flow = p.var = p.sumvar = p.inport = p.outport = p.inflow = p.outflow = FinSet(std::vector<std::string>{});
    p.is = p.os = FinMap::from_empty(p.stock);
    p.iflow = p.oflow = FinMap::from_empty(p.flow);
    p.fv = FinMap::from_empty(p.var);
    p.stock_link = p.stock_sum_link = p.sum_link = p.var_link = p.in_link = p.out_link = Span::empty(p.stock, p.stock);
    p.dependency = Relation(p.inport, p.outport);
    return p;
  }

  StockFlowParts p_;
  std::shared_ptr<const ExprFun> aux_;
};

// --- validation -------------------------------------------------------------

struct Finding {
  std::string condition;  // "1".."4" or "aux"
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;
  bool pass() const { return findings.empty(); }
  std::string describe() const {
    std::ostringstream os;
    for (std::size_t k = 0; k < findings.size(); ++k) {
      if (k) os << "\n";
      os << "condition (" << findings[k].condition << "): " << findings[k].message;
    }
    return os.str();
  }
};

// in_link ; Path*(var_link) ; out_link, with reflexive paths, as a relation
// inport -> outport. The tightest admissible dependency.
inline Dependency interface_dependency(const StockFlowDiagram& sf) {
  const auto& p = sf.parts();
  auto reach = path_closure(DiGraph(p.var_link), true);
  auto r = relation_compose(relation_compose(span_to_relation(p.in_link), reach), span_to_relation(p.out_link));
  return Relation(p.inport, p.outport, r.pairs());
}

inline ValidationReport validate_stockflow(const StockFlowDiagram& sf) {
  ValidationReport rep;
  const auto& p = sf.parts();
  auto add = [&](std::string c, std::string m) { rep.findings.push_back({std::move(c), std::move(m)}); };

  // (1) each flow feeds at most one stock and drains at most one stock
  for (auto [map, what] : {std::pair{&p.iflow, "inflow"}, std::pair{&p.oflow, "outflow"}}) {
    for (Index f = 0; f < p.flow.size(); ++f) {
      if (map->preimage(f).size() > 1) add("1", "flow '" + p.flow.label(f) + "' has more than one " + what);
    }
  }

  // (2) var links are acyclic
  auto topo = topological_order(DiGraph(p.var_link));
  if (!topo.acyclic) {
    std::string chain;
    for (Index e : topo.cycle_edges) {
      auto [a, b] = p.var_link.leg_pair(e);
      chain += p.var.label(a) + " -> " + p.var.label(b) + "; ";
    }
    if (!chain.empty()) chain.resize(chain.size() - 2);
    add("2", "var links form a cycle: " + chain);
  }

  // (3) ports of the interface are the in- and out-port sets; holds by
  // construction, checked for sizes in case a caller bypassed the builder
  if (!same_size(sf.ports().inputs, p.in_link.src()) || !same_size(sf.ports().outputs, p.out_link.tgt())) {
    add("3", "interface ports differ from the diagram's port sets");
  }

  // (4) declared dependency contains the link-induced relation
  for (auto [i, o] : relation_excess(interface_dependency(sf), p.dependency)) {
    add("4", "output '" + p.outport.label(o) + "' depends on input '" + p.inport.label(i) +
                 "' through links but the declared dependency omits it");
  }

  // aux: each variable reads only what is linked into it
  const auto& f = sf.aux_fun();
  const Relation stock_rel = span_to_relation(p.stock_link), sum_rel = span_to_relation(p.sum_link),
                 var_rel = span_to_relation(p.var_link), in_rel = span_to_relation(p.in_link);
  for (Index v = 0; v < p.var.size(); ++v) {
    for (auto ref : f.dependencies(v)) {
      bool ok = false;
      std::string name;
      switch (ref.space) {
        case kAuxStock:
          ok = stock_rel.contains(ref.index, v);
          name = "stock '" + p.stock.label(ref.index) + "'";
          break;
        case kAuxSumvar:
          ok = sum_rel.contains(ref.index, v);
          name = "sum variable '" + p.sumvar.label(ref.index) + "'";
          break;
        case kAuxVar:
          ok = var_rel.contains(ref.index, v);
          name = "variable '" + p.var.label(ref.index) + "'";
          break;
        default:
          ok = in_rel.contains(ref.index, v);
          name = "input '" + p.inport.label(ref.index) + "'";
          break;
      }
      if (!ok) add("aux", "variable '" + p.var.label(v) + "' reads " + name + " without a link");
    }
  }
  return rep;
}

inline void require_valid(const StockFlowDiagram& sf, const char* what) {
  auto rep = validate_stockflow(sf);
  if (!rep.pass()) throw ValidationError(std::string(what) + ": invalid stock-flow diagram\n" + rep.describe());
}

// --- builder ----------------------------------------------------------------

enum class LinkKind { stock, stock_sum, sum, var, in, out };

inline std::string_view link_kind_name(LinkKind k) {
  static constexpr std::array<std::string_view, 6> names{"stock_link", "stock_sum_link", "sum_link",
                                                         "var_link", "in_link", "out_link"};
  return names[static_cast<std::size_t>(k)];
}

inline std::optional<LinkKind> link_kind_from_name(std::string_view n) {
  for (int k = 0; k < 6; ++k)
    if (link_kind_name(static_cast<LinkKind>(k)) == n) return static_cast<LinkKind>(k);
  return std::nullopt;
}

// Name-based incremental construction. Nothing is resolved until seal().
class StockFlowBuilder {
 public:
  StockFlowBuilder& add_stock(std::string name) { return push(stocks_, std::move(name)); }
  StockFlowBuilder& add_sumvar(std::string name) { return push(sumvars_, std::move(name)); }
  StockFlowBuilder& add_inport(std::string name) { return push(inports_, std::move(name)); }
  StockFlowBuilder& add_outport(std::string name) { return push(outports_, std::move(name)); }

  StockFlowBuilder& add_var(std::string name, Expr e) {
    vars_.push_back(name);
    aux_[std::move(name)] = std::move(e);
    return *this;
  }
  StockFlowBuilder& add_var(std::string name, std::string_view expr) { return add_var(std::move(name), parse_expr(expr)); }
  StockFlowBuilder& set_aux(const std::string& var, Expr e) {
    aux_[var] = std::move(e);
    return *this;
  }

  // Empty `from` / `to` leave that end of the flow open (a cloud).
  StockFlowBuilder& add_flow(std::string name, std::string rate_var, std::string from = {}, std::string to = {}) {
    flows_.push_back({std::move(name), std::move(rate_var), std::move(from), std::move(to)});
    return *this;
  }

  StockFlowBuilder& add_link(LinkKind kind, std::string from, std::string to) {
    links_.push_back({kind, std::move(from), std::move(to)});
    return *this;
  }

  // Without this, the dependency defaults to the link-induced one.
  StockFlowBuilder& set_dependency(std::vector<std::pair<std::string, std::string>> pairs) {
    dependency_ = std::move(pairs);
    return *this;
  }

  StockFlowDiagram seal() const {
    StockFlowParts p;
    p.stock = FinSet(stocks_);
    p.var = FinSet(vars_);
    p.sumvar = FinSet(sumvars_);
    p.inport = FinSet(inports_);
    p.outport = FinSet(outports_);
    std::vector<std::string> flow_names;
    for (const auto& f : flows_) flow_names.push_back(f.name);
    p.flow = FinSet(flow_names);

    auto lookup = [](const FinSet& set, const std::string& name, const std::string& what) {
      auto i = set.find(name);
      if (!i) throw StructureError("unknown " + what + " '" + name + "'");
      return *i;
    };
    std::vector<Index> is, iflow, os, oflow, fv;
    for (Index k = 0; k < flows_.size(); ++k) {
      const auto& f = flows_[k];
      fv.push_back(lookup(p.var, f.rate, "rate variable of flow '" + f.name + "':"));
      if (!f.to.empty()) {
        is.push_back(lookup(p.stock, f.to, "target stock of flow '" + f.name + "':"));
        iflow.push_back(k);
      }
      if (!f.from.empty()) {
        os.push_back(lookup(p.stock, f.from, "source stock of flow '" + f.name + "':"));
        oflow.push_back(k);
      }
    }
    p.inflow = FinSet(is.size());
    p.outflow = FinSet(os.size());
    p.is = FinMap(p.inflow, p.stock, is);
    p.iflow = FinMap(p.inflow, p.flow, iflow);
    p.os = FinMap(p.outflow, p.stock, os);
    p.oflow = FinMap(p.outflow, p.flow, oflow);
    p.fv = FinMap(p.flow, p.var, fv);

    std::array<std::vector<std::pair<Index, Index>>, 6> pairs;
    auto ends = [&](LinkKind k) -> std::pair<const FinSet*, const FinSet*> {
      switch (k) {
        case LinkKind::stock: return {&p.stock, &p.var};
        case LinkKind::stock_sum: return {&p.stock, &p.sumvar};
        case LinkKind::sum: return {&p.sumvar, &p.var};
        case LinkKind::var: return {&p.var, &p.var};
        case LinkKind::in: return {&p.inport, &p.var};
        default: return {&p.var, &p.outport};
      }
    };
    for (const auto& l : links_) {
      auto [a, b] = ends(l.kind);
      std::string what(link_kind_name(l.kind));
      pairs[static_cast<std::size_t>(l.kind)].emplace_back(lookup(*a, l.from, what + " source"),
                                                           lookup(*b, l.to, what + " target"));
    }
    auto span = [&](LinkKind k) {
      auto [a, b] = ends(k);
      return Span::from_pairs(*a, *b, pairs[static_cast<std::size_t>(k)]);
    };
    p.stock_link = span(LinkKind::stock);
    p.stock_sum_link = span(LinkKind::stock_sum);
    p.sum_link = span(LinkKind::sum);
    p.var_link = span(LinkKind::var);
    p.in_link = span(LinkKind::in);
    p.out_link = span(LinkKind::out);

    for (const auto& [name, e] : aux_) lookup(p.var, name, "variable");
    for (const auto& v : vars_) p.aux.push_back(aux_.at(v));

    if (dependency_) {
      std::vector<Relation::Pair> d;
      for (const auto& [i, o] : *dependency_) d.emplace_back(lookup(p.inport, i, "input port"), lookup(p.outport, o, "output port"));
      p.dependency = Relation(p.inport, p.outport, std::move(d));
      return StockFlowDiagram(std::move(p));
    }
    p.dependency = Relation(p.inport, p.outport);
    StockFlowDiagram provisional(p);
    p.dependency = interface_dependency(provisional);
    return StockFlowDiagram(std::move(p));
  }

 private:
  struct FlowRec {
    std::string name, rate, from, to;
  };
  struct LinkRec {
    LinkKind kind;
    std::string from, to;
  };

  StockFlowBuilder& push(std::vector<std::string>& v, std::string name) {
    v.push_back(std::move(name));
    return *this;
  }

  std::vector<std::string> stocks_, sumvars_, inports_, outports_, vars_;
  std::map<std::string, Expr> aux_;
  std::vector<FlowRec> flows_;
  std::vector<LinkRec> links_;
  std::optional<std::vector<std::pair<std::string, std::string>>> dependency_;
};

// --- equality -----------------------------------------------------------------

// Same labels, same maps, same link relations and identical aux expressions.
inline bool equivalent_sf(const StockFlowDiagram& a, const StockFlowDiagram& b) {
  const auto& p = a.parts();
  const auto& q = b.parts();
  auto sets = [](const FinSet& x, const FinSet& y) { return x.size() == y.size() && x.labels() == y.labels(); };
  auto maps = [](const FinMap& x, const FinMap& y) { return x.targets() == y.targets(); };
  auto links = [](const Span& x, const Span& y) { return span_to_relation(x) == span_to_relation(y); };
  return sets(p.stock, q.stock) && sets(p.flow, q.flow) && sets(p.var, q.var) && sets(p.sumvar, q.sumvar) &&
         sets(p.inport, q.inport) && sets(p.outport, q.outport) && maps(p.is, q.is) && maps(p.iflow, q.iflow) &&
         maps(p.os, q.os) && maps(p.oflow, q.oflow) && maps(p.fv, q.fv) && links(p.stock_link, q.stock_link) &&
         links(p.stock_sum_link, q.stock_sum_link) && links(p.sum_link, q.sum_link) &&
         links(p.var_link, q.var_link) && links(p.in_link, q.in_link) && links(p.out_link, q.out_link) &&
         p.aux == q.aux && p.dependency == q.dependency;
}

// --- algebra ------------------------------------------------------------------

// SF(f): rewires ports through f. Stocks, flows, vars and sum variables are
// unchanged; an input port read by aux becomes the sum of the outer inputs
// wired to it and the variables feeding the outer ports traced back into it.
inline StockFlowDiagram apply_wiring_sf(const DepWiringDiagram& F, const StockFlowDiagram& sf) {
  const auto& wd = F.diagram();
  if (!same_shape(wd.dom(), sf.ports())) throw MismatchError("apply_wiring_sf: diagram domain does not match the model's ports");
  if (!relation_leq(sf.dependency(), F.dom_dep())) {
    throw MismatchError("apply_wiring_sf: model dependency is not contained in the diagram's inner dependency");
  }
  require_valid(sf, "apply_wiring_sf");
  const auto& p = sf.parts();
  StockFlowParts q = p;
  q.inport = wd.cod().inputs;
  q.outport = wd.cod().outputs;
  Span in_link = reseat_span(p.in_link, wd.dom().inputs, p.var);
  Span out_link = reseat_span(p.out_link, p.var, wd.dom().outputs);
  q.in_link = reseat_span(compose_spans(wd.w_in(), in_link), q.inport, q.var);
  q.out_link = reseat_span(compose_spans(out_link, wd.w_out()), q.var, q.outport);
  q.var_link = span_sum(p.var_link, compose_spans(compose_spans(out_link, wd.w()), in_link));
  q.dependency = F.cod_dep();

  std::vector<std::vector<Expr>> replacement(p.inport.size());
  for (Index w = 0; w < wd.w_in().size(); ++w) {
    auto [y, x] = wd.w_in().leg_pair(w);
    replacement[x].push_back(Expr::variable(q.inport.label(y)));
  }
  for (Index w = 0; w < wd.w().size(); ++w) {
    auto [xo, xi] = wd.w().leg_pair(w);
    for (Index l = 0; l < p.out_link.size(); ++l) {
      auto [v, o] = p.out_link.leg_pair(l);
      if (o == xo) replacement[xi].push_back(Expr::variable(p.var.label(v)));
    }
  }
  std::vector<Expr> subst;
  for (auto& r : replacement) subst.push_back(sum_of(r));
  q.aux.clear();
  for (const auto& e : p.aux) {
    q.aux.push_back(substitute(e, [&](const std::string& name) -> std::optional<Expr> {
      if (auto i = p.inport.find(name)) return subst[*i];
      return std::nullopt;
    }));
  }
  StockFlowDiagram out(std::move(q));
  auto rep = validate_stockflow(out);
  if (!rep.pass()) throw std::logic_error("apply_wiring_sf: composite failed validation\n" + rep.describe());
  return out;
}

// Every label prefixed, e.g. "P1.".
inline StockFlowDiagram with_prefix_sf(const StockFlowDiagram& sf, const std::string& prefix) {
  const auto& p = sf.parts();
  StockFlowParts q = p;
  q.stock = p.stock.prefixed(prefix);
  q.flow = p.flow.prefixed(prefix);
  q.var = p.var.prefixed(prefix);
  q.sumvar = p.sumvar.prefixed(prefix);
  q.inport = p.inport.prefixed(prefix);
  q.outport = p.outport.prefixed(prefix);
  q.is = reseat_map(p.is, q.inflow, q.stock);
  q.iflow = reseat_map(p.iflow, q.inflow, q.flow);
  q.os = reseat_map(p.os, q.outflow, q.stock);
  q.oflow = reseat_map(p.oflow, q.outflow, q.flow);
  q.fv = reseat_map(p.fv, q.flow, q.var);
  q.stock_link = reseat_span(p.stock_link, q.stock, q.var);
  q.stock_sum_link = reseat_span(p.stock_sum_link, q.stock, q.sumvar);
  q.sum_link = reseat_span(p.sum_link, q.sumvar, q.var);
  q.var_link = reseat_span(p.var_link, q.var, q.var);
  q.in_link = reseat_span(p.in_link, q.inport, q.var);
  q.out_link = reseat_span(p.out_link, q.var, q.outport);
  q.dependency = Relation(q.inport, q.outport, p.dependency.pairs());
  std::map<std::string, std::string> names;
  for (const FinSet* s : {&p.stock, &p.var, &p.sumvar, &p.inport})
    for (Index i = 0; i < s->size(); ++i) names.emplace(s->label(i), prefix + s->label(i));
  q.aux.clear();
  for (const auto& e : p.aux) q.aux.push_back(rename_vars(e, names));
  return StockFlowDiagram(std::move(q));
}

// sf (+) sf': blockwise coproduct of everything. Colliding labels in any one
// set pick up "left." / "right." prefixes.
inline StockFlowDiagram parallel_sf(const StockFlowDiagram& a, const StockFlowDiagram& b) {
  const auto& p = a.parts();
  const auto& r = b.parts();
  StockFlowParts q;
  q.stock = finset_coproduct(p.stock, r.stock).set;
  q.flow = finset_coproduct(p.flow, r.flow).set;
  q.var = finset_coproduct(p.var, r.var).set;
  q.sumvar = finset_coproduct(p.sumvar, r.sumvar).set;
  q.inport = finset_coproduct(p.inport, r.inport).set;
  q.outport = finset_coproduct(p.outport, r.outport).set;
  q.inflow = FinSet(p.inflow.size() + r.inflow.size());
  q.outflow = FinSet(p.outflow.size() + r.outflow.size());
  q.is = finmap_coproduct(p.is, r.is, q.inflow, q.stock);
  q.iflow = finmap_coproduct(p.iflow, r.iflow, q.inflow, q.flow);
  q.os = finmap_coproduct(p.os, r.os, q.outflow, q.stock);
  q.oflow = finmap_coproduct(p.oflow, r.oflow, q.outflow, q.flow);
  q.fv = finmap_coproduct(p.fv, r.fv, q.flow, q.var);
  q.stock_link = span_coproduct(p.stock_link, r.stock_link, q.stock, q.var);
  q.stock_sum_link = span_coproduct(p.stock_sum_link, r.stock_sum_link, q.stock, q.sumvar);
  q.sum_link = span_coproduct(p.sum_link, r.sum_link, q.sumvar, q.var);
  q.var_link = span_coproduct(p.var_link, r.var_link, q.var, q.var);
  q.in_link = span_coproduct(p.in_link, r.in_link, q.inport, q.var);
  q.out_link = span_coproduct(p.out_link, r.out_link, q.var, q.outport);
  q.dependency = relation_coproduct(p.dependency, r.dependency, q.inport, q.outport);
  auto rename = [&](const StockFlowParts& s, bool right) {
    std::map<std::string, std::string> names;
    auto add = [&](const FinSet& from, const FinSet& to, std::size_t offset) {
      for (Index i = 0; i < from.size(); ++i) names.emplace(from.label(i), to.label(offset + i));
    };
    add(s.stock, q.stock, right ? p.stock.size() : 0);
    add(s.var, q.var, right ? p.var.size() : 0);
    add(s.sumvar, q.sumvar, right ? p.sumvar.size() : 0);
    add(s.inport, q.inport, right ? p.inport.size() : 0);
    for (const auto& e : s.aux) q.aux.push_back(rename_vars(e, names));
  };
  rename(p, false);
  rename(r, true);
  return StockFlowDiagram(std::move(q));
}

inline StockFlowDiagram parallel_sf(const std::vector<StockFlowDiagram>& sfs) {
  if (sfs.empty()) return StockFlowDiagram();
  StockFlowDiagram acc = sfs.front();
  for (std::size_t k = 1; k < sfs.size(); ++k) acc = parallel_sf(acc, sfs[k]);
  return acc;
}

}  // namespace dynwire
