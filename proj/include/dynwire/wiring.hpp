#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dynwire/finset.hpp"

namespace dynwire {

// A box boundary: input ports and output ports.
struct Interface {
  FinSet inputs;
  FinSet outputs;

  friend bool same_shape(const Interface& a, const Interface& b) {
    return same_size(a.inputs, b.inputs) && same_size(a.outputs, b.outputs);
  }
};

// Which outputs may instantaneously depend on which inputs (inputs -> outputs).
using Dependency = Relation;

inline Dependency empty_dependency(const Interface& x) { return Relation(x.inputs, x.outputs); }
inline Dependency full_dependency(const Interface& x) { return Relation::full(x.inputs, x.outputs); }

inline void require_dependency_on(const Interface& x, const Dependency& d, const char* what) {
  require_same(x.inputs, d.src(), what);
  require_same(x.outputs, d.tgt(), what);
}

struct DepInterface {
  Interface iface;
  Dependency dep;

  DepInterface() = default;
  DepInterface(Interface i, Dependency d) : iface(std::move(i)), dep(std::move(d)) {
    require_dependency_on(iface, dep, "DepInterface");
  }
};

inline Interface oplus_interface(const Interface& a, const Interface& b) {
  return {finset_coproduct(a.inputs, b.inputs).set, finset_coproduct(a.outputs, b.outputs).set};
}

inline Dependency oplus_dependency(const Dependency& d, const Dependency& e, const Interface& sum) {
  return relation_coproduct(d, e, sum.inputs, sum.outputs);
}

// A directed wiring diagram X -> Y:
//   w_in  : Y_in  <- W_in  -> X_in     (input wires)
//   w     : X_out <- W     -> X_in     (trace wires)
//   w_out : X_out <- W_out -> Y_out    (output wires)
class WiringDiagram {
 public:
  WiringDiagram() = default;
  WiringDiagram(Interface dom, Interface cod, Span w_in, Span w, Span w_out)
      : dom_(std::move(dom)), cod_(std::move(cod)),
        w_in_(std::move(w_in)), w_(std::move(w)), w_out_(std::move(w_out)) {
    require_same(w_in_.src(), cod_.inputs, "input wires source");
    require_same(w_in_.tgt(), dom_.inputs, "input wires target");
    require_same(w_.src(), dom_.outputs, "trace wires source");
    require_same(w_.tgt(), dom_.inputs, "trace wires target");
    require_same(w_out_.src(), dom_.outputs, "output wires source");
    require_same(w_out_.tgt(), cod_.outputs, "output wires target");
  }

  using Wires = std::vector<std::pair<Index, Index>>;

  static WiringDiagram from_wires(const Interface& dom, const Interface& cod, const Wires& in,
                                  const Wires& trace, const Wires& out) {
    return WiringDiagram(dom, cod, Span::from_pairs(cod.inputs, dom.inputs, in),
                         Span::from_pairs(dom.outputs, dom.inputs, trace),
                         Span::from_pairs(dom.outputs, cod.outputs, out));
  }

  static WiringDiagram identity(const Interface& x) {
    return WiringDiagram(x, x, Span::identity(x.inputs), Span::empty(x.outputs, x.inputs),
                         Span::identity(x.outputs));
  }

  const Interface& dom() const noexcept { return dom_; }
  const Interface& cod() const noexcept { return cod_; }
  const Span& w_in() const noexcept { return w_in_; }
  const Span& w() const noexcept { return w_; }
  const Span& w_out() const noexcept { return w_out_; }

 private:
  Interface dom_;
  Interface cod_;
  Span w_in_;
  Span w_;
  Span w_out_;
};

inline bool spans_identical(const Span& a, const Span& b) {
  return same_size(a.src(), b.src()) && same_size(a.tgt(), b.tgt()) &&
         a.left().targets() == b.left().targets() && a.right().targets() == b.right().targets();
}

// Bit-exact equality of the three wire spans.
inline bool structurally_equal(const WiringDiagram& a, const WiringDiagram& b) {
  return same_shape(a.dom(), b.dom()) && same_shape(a.cod(), b.cod()) &&
         spans_identical(a.w_in(), b.w_in()) && spans_identical(a.w(), b.w()) &&
         spans_identical(a.w_out(), b.w_out());
}

// Equality up to isomorphism of wire sets: same induced relations and the
// same number of wires of each kind.
inline bool canonically_equal(const WiringDiagram& a, const WiringDiagram& b) {
  auto eq = [](const Span& x, const Span& y) {
    return x.size() == y.size() && span_to_relation(x) == span_to_relation(y);
  };
  return same_shape(a.dom(), b.dom()) && same_shape(a.cod(), b.cod()) && eq(a.w_in(), b.w_in()) &&
         eq(a.w(), b.w()) && eq(a.w_out(), b.w_out());
}

// Graph on X_in + X_out (inputs first) whose edges are the trace wires
// (X_out -> X_in) followed by the dependency pairs (X_in -> X_out).
struct DepGraph {
  DiGraph graph;
  std::size_t n_inputs = 0;
  std::size_t n_trace = 0;

  Index input_vertex(Index i) const { return i; }
  Index output_vertex(Index o) const { return n_inputs + o; }
  bool is_trace_edge(Index e) const { return e < n_trace; }
};

inline DepGraph dep_graph(const WiringDiagram& f, const Dependency& d) {
  require_dependency_on(f.dom(), d, "dep_graph");
  const std::size_t nin = f.dom().inputs.size();
  FinSet vertices = finset_coproduct(f.dom().inputs, f.dom().outputs).set;
  FinSet edges(f.w().size() + d.size());
  std::vector<Index> src, tgt;
  src.reserve(edges.size());
  tgt.reserve(edges.size());
  for (Index e = 0; e < f.w().size(); ++e) {
    src.push_back(nin + f.w().left()(e));
    tgt.push_back(f.w().right()(e));
  }
  for (auto [i, o] : d.pairs()) {
    src.push_back(i);
    tgt.push_back(nin + o);
  }
  return {DiGraph(FinMap(edges, vertices, std::move(src)), FinMap(edges, vertices, std::move(tgt))), nin,
          f.w().size()};
}

// One edge of a cycle in the dependency graph.
struct CycleStep {
  enum class Kind { trace, dependency };
  Kind kind;
  Index index;  // wire index in W, or pair index in the dependency
  Index from;   // X_out port for trace steps, X_in port for dependency steps
  Index to;     // X_in port for trace steps, X_out port for dependency steps
};

struct AcyclicityReport {
  bool acyclic = true;
  std::vector<Index> order;  // topological order of dep_graph vertices
  std::vector<CycleStep> witness;
};

inline AcyclicityReport is_acyclic_morphism(const WiringDiagram& f, const Dependency& d) {
  auto g = dep_graph(f, d);
  auto topo = topological_order(g.graph);
  AcyclicityReport rep{topo.acyclic, std::move(topo.order), {}};
  for (Index e : topo.cycle_edges) {
    if (g.is_trace_edge(e)) {
      auto [o, i] = f.w().leg_pair(e);
      rep.witness.push_back({CycleStep::Kind::trace, e, o, i});
    } else {
      Index k = e - g.n_trace;
      auto [i, o] = d.pairs()[k];
      rep.witness.push_back({CycleStep::Kind::dependency, k, i, o});
    }
  }
  return rep;
}

inline std::string describe_cycle(const Interface& x, const std::vector<CycleStep>& cycle) {
  std::ostringstream os;
  for (std::size_t k = 0; k < cycle.size(); ++k) {
    const auto& s = cycle[k];
    if (s.kind == CycleStep::Kind::trace) {
      os << x.outputs.label(s.from) << " -(wire)-> " << x.inputs.label(s.to);
    } else {
      os << x.inputs.label(s.from) << " -(depends)-> " << x.outputs.label(s.to);
    }
    if (k + 1 < cycle.size()) os << "; ";
  }
  return os.str();
}

// R(f)(d): (y_in, y_out) is related iff an input wire from y_in reaches, by
// alternating dependencies and trace wires, an output wire into y_out.
// Computed by reachability; the induced relation is the same as the one
// obtained from the path span since multiplicities collapse.
inline Dependency dependency_pushforward(const WiringDiagram& f, const Dependency& d) {
  auto g = dep_graph(f, d);
  auto reach = path_closure(g.graph, false);
  const std::size_t nin = g.n_inputs;
  std::vector<Relation::Pair> pairs;
  for (Index a = 0; a < f.w_in().size(); ++a) {
    auto [y_in, x_in] = f.w_in().leg_pair(a);
    for (Index b = 0; b < f.w_out().size(); ++b) {
      auto [x_out, y_out] = f.w_out().leg_pair(b);
      if (reach.contains(x_in, nin + x_out)) pairs.emplace_back(y_in, y_out);
    }
  }
  return Relation(f.cod().inputs, f.cod().outputs, std::move(pairs));
}

// g ∘ f, with composite wire sets enumerated in fiber-product order:
//   W_in  = g(W_in) x_{Y_in} f(W_in)
//   W     = f(W) + f(W_out) x_{Y_out} g(W) x_{Y_in} f(W_in)
//   W_out = f(W_out) x_{Y_out} g(W_out)
inline WiringDiagram compose_dwd(const WiringDiagram& f, const WiringDiagram& g) {
  if (!same_shape(f.cod(), g.dom())) throw MismatchError("compose_dwd: codomain of f does not match domain of g");
  Span w_in = compose_spans(g.w_in(), f.w_in());
  Span feedback = compose_spans(compose_spans(f.w_out(), g.w()), f.w_in());
  Span w = span_sum(f.w(), feedback);
  Span w_out = compose_spans(f.w_out(), g.w_out());
  return WiringDiagram(f.dom(), g.cod(), std::move(w_in), std::move(w), std::move(w_out));
}

inline WiringDiagram oplus_dwd(const WiringDiagram& f, const WiringDiagram& g) {
  Interface dom = oplus_interface(f.dom(), g.dom());
  Interface cod = oplus_interface(f.cod(), g.cod());
  return WiringDiagram(dom, cod, span_coproduct(f.w_in(), g.w_in(), cod.inputs, dom.inputs),
                       span_coproduct(f.w(), g.w(), dom.outputs, dom.inputs),
                       span_coproduct(f.w_out(), g.w_out(), dom.outputs, cod.outputs));
}

// A wiring diagram between dependency-carrying interfaces, certified acyclic
// and dependency-preserving. Only obtainable through validate_ddwd.
struct DdwdValidation;

class DepWiringDiagram {
 public:
  const WiringDiagram& diagram() const noexcept { return diagram_; }
  const Dependency& dom_dep() const noexcept { return dom_dep_; }
  const Dependency& cod_dep() const noexcept { return cod_dep_; }
  // Topological order of dep_graph(diagram, dom_dep), inputs numbered first.
  const std::vector<Index>& certificate() const noexcept { return certificate_; }

  DepInterface dom() const { return {diagram_.dom(), dom_dep_}; }
  DepInterface cod() const { return {diagram_.cod(), cod_dep_}; }

 private:
  friend struct DdwdValidation;
  friend DdwdValidation validate_ddwd(const WiringDiagram&, const Dependency&, const Dependency&);

  DepWiringDiagram(WiringDiagram f, Dependency d_dom, Dependency d_cod, std::vector<Index> cert)
      : diagram_(std::move(f)), dom_dep_(std::move(d_dom)), cod_dep_(std::move(d_cod)),
        certificate_(std::move(cert)) {}

  WiringDiagram diagram_;
  Dependency dom_dep_;
  Dependency cod_dep_;
  std::vector<Index> certificate_;
};

struct DdwdValidation {
  std::optional<DepWiringDiagram> value;
  std::vector<CycleStep> cycle;              // non-empty when the morphism is cyclic
  std::vector<Relation::Pair> excess;        // pushed-forward pairs missing from d_cod
  Dependency pushforward;                    // R(f)(d_dom)

  bool ok() const { return value.has_value(); }

  std::string describe(const WiringDiagram& f) const {
    std::ostringstream os;
    if (!cycle.empty()) {
      os << "cycle of length " << cycle.size() << " through trace wires and dependencies: "
         << describe_cycle(f.dom(), cycle);
    }
    if (!excess.empty()) {
      if (!cycle.empty()) os << "\n";
      os << "outer dependency does not contain:";
      for (auto [i, o] : excess) os << " (" << f.cod().inputs.label(i) << "," << f.cod().outputs.label(o) << ")";
    }
    return os.str();
  }
};

inline DdwdValidation validate_ddwd(const WiringDiagram& f, const Dependency& d_dom, const Dependency& d_cod) {
  require_dependency_on(f.dom(), d_dom, "validate_ddwd inner dependency");
  require_dependency_on(f.cod(), d_cod, "validate_ddwd outer dependency");
  DdwdValidation out;
  auto acyc = is_acyclic_morphism(f, d_dom);
  out.cycle = std::move(acyc.witness);
  out.pushforward = dependency_pushforward(f, d_dom);
  out.excess = relation_excess(out.pushforward, d_cod);
  if (acyc.acyclic && out.excess.empty()) {
    out.value = DepWiringDiagram(f, d_dom, d_cod, std::move(acyc.order));
  }
  return out;
}

// Throwing form of validate_ddwd.
inline DepWiringDiagram certify(const WiringDiagram& f, const Dependency& d_dom, const Dependency& d_cod) {
  auto v = validate_ddwd(f, d_dom, d_cod);
  if (!v.ok()) throw ValidationError(v.describe(f));
  return *std::move(v.value);
}

// Certify with the tightest outer dependency, R(f)(d_dom).
inline DepWiringDiagram certify_minimal(const WiringDiagram& f, const Dependency& d_dom) {
  return certify(f, d_dom, dependency_pushforward(f, d_dom));
}

inline DepWiringDiagram identity_ddwd(const DepInterface& x) {
  return certify(WiringDiagram::identity(x.iface), x.dep, x.dep);
}

// Composition of certified diagrams; acyclicity of the composite is a
// theorem, so a failed re-validation is an internal error.
inline DepWiringDiagram compose_ddwd(const DepWiringDiagram& f, const DepWiringDiagram& g) {
  if (!same_shape(f.diagram().cod(), g.diagram().dom())) {
    throw MismatchError("compose_ddwd: interfaces do not match");
  }
  if (!(f.cod_dep() == g.dom_dep())) throw MismatchError("compose_ddwd: dependencies do not match");
  auto h = compose_dwd(f.diagram(), g.diagram());
  auto v = validate_ddwd(h, f.dom_dep(), g.cod_dep());
  if (!v.ok()) throw std::logic_error("compose_ddwd: composite of certified diagrams failed validation: " + v.describe(h));
  return *std::move(v.value);
}

inline DepWiringDiagram oplus_ddwd(const DepWiringDiagram& f, const DepWiringDiagram& g) {
  auto h = oplus_dwd(f.diagram(), g.diagram());
  return certify(h, oplus_dependency(f.dom_dep(), g.dom_dep(), h.dom()),
                 oplus_dependency(f.cod_dep(), g.cod_dep(), h.cod()));
}

}  // namespace dynwire
