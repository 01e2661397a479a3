#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dynwire/semantics.hpp"

namespace dynwire::io {

using Json = nlohmann::ordered_json;

inline constexpr const char* kFormatVersion = "1";

// Schema problem in a model file; the message carries source and JSON pointer.
class SchemaError : public StructureError {
 public:
  using StructureError::StructureError;
};

// Unreadable or unwritable file.
class IoError : public Error {
 public:
  using Error::Error;
};

// --- low-level reading ----------------------------------------------------------

// A JSON value plus where it came from, for located diagnostics.
class Node {
 public:
  Node(const Json& j, std::string source, std::string pointer = "")
      : j_(&j), source_(std::move(source)), pointer_(std::move(pointer)) {}

  const Json& json() const noexcept { return *j_; }
  const std::string& pointer() const noexcept { return pointer_; }
  std::string where() const { return source_ + ":" + (pointer_.empty() ? "/" : pointer_); }

  [[noreturn]] void fail(const std::string& msg) const { throw SchemaError(where() + ": " + msg); }

  bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

  Node at(const std::string& key) const {
    if (!j_->is_object()) fail("expected an object");
    auto it = j_->find(key);
    if (it == j_->end()) fail("missing field '" + key + "'");
    return Node(*it, source_, pointer_ + "/" + key);
  }

  Node at(std::size_t i) const { return Node(j_->at(i), source_, pointer_ + "/" + std::to_string(i)); }

  std::size_t size() const {
    if (!j_->is_array()) fail("expected an array");
    return j_->size();
  }

  std::string str() const {
    if (!j_->is_string()) fail("expected a string");
    return j_->get<std::string>();
  }

  double num() const {
    if (!j_->is_number()) fail("expected a number");
    return j_->get<double>();
  }

  void object() const {
    if (!j_->is_object()) fail("expected an object");
  }

  // Rejects keys outside `allowed`.
  void only(std::initializer_list<const char*> allowed) const {
    object();
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || it.key() == a;
      if (!ok) fail("unknown field '" + it.key() + "'");
    }
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).str());
    return out;
  }

  FinSet name_set() const {
    try {
      return FinSet(names());
    } catch (const StructureError& e) {
      if (dynamic_cast<const SchemaError*>(&e)) throw;
      fail(e.what());
    }
  }

  Index resolve(const FinSet& set, const std::string& what) const {
    auto name = str();
    auto i = set.find(name);
    if (!i) fail("unknown " + what + " '" + name + "'");
    return *i;
  }

  std::vector<std::pair<Index, Index>> pairs(const FinSet& a, const FinSet& b, const std::string& wa,
                                             const std::string& wb) const {
    std::vector<std::pair<Index, Index>> out;
    for (std::size_t k = 0; k < size(); ++k) {
      Node p = at(k);
      if (p.size() != 2) p.fail("expected a pair of names");
      out.emplace_back(p.at(std::size_t{0}).resolve(a, wa), p.at(std::size_t{1}).resolve(b, wb));
    }
    return out;
  }

  Expr expr() const {
    try {
      return parse_expr(str());
    } catch (const ParseError& e) {
      fail(std::string("bad expression: ") + e.what());
    }
  }

 private:
  const Json* j_;
  std::string source_;
  std::string pointer_;
};

struct Document {
  std::string kind;
  Json root;
  std::string source;
  Node body() const { return Node(root, source).at("body"); }
};

inline Document parse_document(const std::string& text, const std::string& source) {
  Document d;
  d.source = source;
  try {
    d.root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(source + ": " + e.what(), e.byte);
  }
  Node root(d.root, source);
  root.only({"format_version", "kind", "body"});
  auto version = root.at("format_version").str();
  if (version != kFormatVersion) root.at("format_version").fail("unsupported format_version '" + version + "'");
  d.kind = root.at("kind").str();
  static const char* kinds[] = {"interface", "dependency", "wiring", "dep_wiring", "mealy", "stockflow", "signal", "scenario"};
  if (std::find(std::begin(kinds), std::end(kinds), d.kind) == std::end(kinds)) root.at("kind").fail("unknown kind '" + d.kind + "'");
  if (!root.has("body")) d.root["body"] = Json::object();
  return d;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline Document load_document(const std::filesystem::path& path) {
  return parse_document(read_file(path), path.string());
}

inline void expect_kind(const Document& d, const std::string& kind) {
  if (d.kind != kind) throw SchemaError(d.source + ":/kind: expected kind '" + kind + "', found '" + d.kind + "'");
}

// --- low-level writing ----------------------------------------------------------

inline Json names_json(const FinSet& s) {
  Json a = Json::array();
  for (Index i = 0; i < s.size(); ++i) a.push_back(s.label(i));
  return a;
}

inline Json pairs_json(const std::vector<std::pair<Index, Index>>& ps, const FinSet& a, const FinSet& b) {
  Json arr = Json::array();
  for (auto [x, y] : ps) arr.push_back(Json::array({a.label(x), b.label(y)}));
  return arr;
}

inline Json span_json(const Span& s) {
  std::vector<std::pair<Index, Index>> ps;
  for (Index e = 0; e < s.size(); ++e) ps.push_back(s.leg_pair(e));
  return pairs_json(ps, s.src(), s.tgt());
}

inline std::string document_text(const std::string& kind, Json body) {
  Json root;
  root["format_version"] = kFormatVersion;
  root["kind"] = kind;
  root["body"] = std::move(body);
  return root.dump(2) + "\n";
}

// --- interface and dependency -----------------------------------------------

inline Interface read_interface(const Node& n) {
  n.only({"inputs", "outputs"});
  return {n.at("inputs").name_set(), n.at("outputs").name_set()};
}

inline Json interface_json(const Interface& x) {
  Json j;
  j["inputs"] = names_json(x.inputs);
  j["outputs"] = names_json(x.outputs);
  return j;
}

inline Dependency read_dependency_pairs(const Node& n, const Interface& x) {
  return Relation(x.inputs, x.outputs, n.pairs(x.inputs, x.outputs, "input port", "output port"));
}

inline DepInterface read_dep_interface(const Node& n) {
  n.only({"inputs", "outputs", "pairs"});
  Interface x{n.at("inputs").name_set(), n.at("outputs").name_set()};
  return {x, n.has("pairs") ? read_dependency_pairs(n.at("pairs"), x) : empty_dependency(x)};
}

inline Json dep_interface_json(const DepInterface& d) {
  Json j = interface_json(d.iface);
  j["pairs"] = pairs_json(d.dep.pairs(), d.iface.inputs, d.iface.outputs);
  return j;
}

// --- wiring -------------------------------------------------------------------

// A wiring file before certification: the diagram and whatever
// dependencies it declares.
struct WiringFile {
  WiringDiagram diagram;
  std::vector<std::string> boxes;         // box names in order, empty for a flat inner interface
  std::optional<Dependency> inner;        // inner_dependency plus per-box dependencies
  std::optional<Dependency> outer;
};

inline WiringFile read_wiring(const Node& n, bool dependent) {
  if (dependent) {
    n.only({"outer", "inner", "boxes", "wires", "inner_dependency", "outer_dependency"});
  } else {
    n.only({"outer", "inner", "boxes", "wires"});
  }
  WiringFile wf;
  Interface outer = read_interface(n.at("outer"));
  Interface inner;
  std::vector<std::pair<std::string, std::string>> box_deps;  // qualified names
  std::vector<Node> box_dep_nodes;
  if (n.has("boxes") == n.has("inner")) n.fail("give exactly one of 'inner' and 'boxes'");
  if (n.has("inner")) {
    inner = read_interface(n.at("inner"));
  } else {
    Node boxes = n.at("boxes");
    std::vector<std::string> ins, outs;
    for (std::size_t b = 0; b < boxes.size(); ++b) {
      Node box = boxes.at(b);
      box.only({"name", "inputs", "outputs", "dependency"});
      auto name = box.at("name").str();
      if (name.empty() || name.find('.') != std::string::npos) box.at("name").fail("box names must be non-empty and dot-free");
      wf.boxes.push_back(name);
      for (auto& p : box.at("inputs").names()) ins.push_back(name + "." + p);
      for (auto& p : box.at("outputs").names()) outs.push_back(name + "." + p);
      if (box.has("dependency")) box_dep_nodes.push_back(box);
    }
    try {
      inner = Interface{FinSet(ins), FinSet(outs)};
    } catch (const StructureError& e) {
      boxes.fail(e.what());
    }
  }
  Node wires = n.at("wires");
  wires.only({"in", "trace", "out"});
  auto get = [&](const char* key, const FinSet& a, const FinSet& b, const char* wa, const char* wb) {
    if (!wires.has(key)) return std::vector<std::pair<Index, Index>>{};
    return wires.at(key).pairs(a, b, wa, wb);
  };
  wf.diagram = WiringDiagram::from_wires(inner, outer,
                                         get("in", outer.inputs, inner.inputs, "outer input", "inner input"),
                                         get("trace", inner.outputs, inner.inputs, "inner output", "inner input"),
                                         get("out", inner.outputs, outer.outputs, "inner output", "outer output"));
  if (dependent) {
    std::vector<Relation::Pair> d;
    if (n.has("inner_dependency")) {
      for (auto p : n.at("inner_dependency").pairs(inner.inputs, inner.outputs, "inner input", "inner output")) d.push_back(p);
    }
    for (const auto& box : box_dep_nodes) {
      auto name = box.at("name").str();
      Node deps = box.at("dependency");
      for (std::size_t k = 0; k < deps.size(); ++k) {
        Node p = deps.at(k);
        if (p.size() != 2) p.fail("expected a pair of names");
        auto i = inner.inputs.find(name + "." + p.at(std::size_t{0}).str());
        auto o = inner.outputs.find(name + "." + p.at(std::size_t{1}).str());
        if (!i) p.at(std::size_t{0}).fail("unknown input of box '" + name + "'");
        if (!o) p.at(std::size_t{1}).fail("unknown output of box '" + name + "'");
        d.emplace_back(*i, *o);
      }
    }
    if (n.has("inner_dependency") || !box_dep_nodes.empty()) wf.inner = Relation(inner.inputs, inner.outputs, d);
    if (n.has("outer_dependency")) {
      wf.outer = read_dependency_pairs(n.at("outer_dependency"), outer);
    }
  }
  return wf;
}

inline Json wiring_json(const WiringDiagram& f) {
  Json j;
  j["outer"] = interface_json(f.cod());
  j["inner"] = interface_json(f.dom());
  Json w;
  w["in"] = span_json(f.w_in());
  w["trace"] = span_json(f.w());
  w["out"] = span_json(f.w_out());
  j["wires"] = std::move(w);
  return j;
}

inline Json dep_wiring_json(const DepWiringDiagram& f) {
  Json j = wiring_json(f.diagram());
  j["inner_dependency"] = pairs_json(f.dom_dep().pairs(), f.diagram().dom().inputs, f.diagram().dom().outputs);
  j["outer_dependency"] = pairs_json(f.cod_dep().pairs(), f.diagram().cod().inputs, f.diagram().cod().outputs);
  return j;
}

// Certifies a dependent wiring file. A missing inner dependency defaults to
// `fallback_inner` (or empty); a missing outer one to the pushforward.
inline DdwdValidation validate_wiring_file(const WiringFile& wf, std::optional<Dependency> fallback_inner = std::nullopt) {
  const auto& f = wf.diagram;
  Dependency inner = wf.inner ? *wf.inner : fallback_inner ? *fallback_inner : empty_dependency(f.dom());
  Dependency outer = wf.outer ? *wf.outer : dependency_pushforward(f, inner);
  return validate_ddwd(f, inner, outer);
}

// --- mealy --------------------------------------------------------------------

inline MealyMachine read_mealy(const Node& n) {
  n.only({"inputs", "outputs", "states", "dependency", "update", "readout"});
  Interface x{n.at("inputs").name_set(), n.at("outputs").name_set()};
  FinSet states = n.at("states").name_set();
  Dependency d = n.has("dependency") ? read_dependency_pairs(n.at("dependency"), x) : empty_dependency(x);
  auto exprs = [&](const char* key, const FinSet& names) {
    Node table = n.at(key);
    table.object();
    std::vector<Expr> out;
    for (Index i = 0; i < names.size(); ++i) out.push_back(table.at(names.label(i)).expr());
    if (table.json().size() != names.size()) table.fail("entries must match the declared names exactly");
    return out;
  };
  auto update = exprs("update", states);
  auto readout = exprs("readout", x.outputs);
  try {
    return MealyMachine::from_expressions(DepInterface(x, d), states, std::move(update), std::move(readout));
  } catch (const StructureError& e) {
    n.fail(e.what());
  }
}

inline Json mealy_json(const MealyMachine& m) {
  if (!m.expression_backed()) throw SchemaError("only expression-backed machines can be saved");
  Json j = interface_json(m.ports());
  j["states"] = names_json(m.states());
  j["dependency"] = pairs_json(m.dependency().pairs(), m.ports().inputs, m.ports().outputs);
  Json u = Json::object(), r = Json::object();
  for (Index i = 0; i < m.states().size(); ++i) u[m.states().label(i)] = to_string(m.exprs().update[i]);
  for (Index o = 0; o < m.ports().outputs.size(); ++o) r[m.ports().outputs.label(o)] = to_string(m.exprs().readout[o]);
  j["update"] = std::move(u);
  j["readout"] = std::move(r);
  return j;
}

// --- stock-flow -----------------------------------------------------------------

inline StockFlowDiagram read_stockflow(const Node& n) {
  n.only({"stocks", "sumvars", "inputs", "outputs", "flows", "vars", "links", "dependency"});
  StockFlowBuilder b;
  auto list = [&](const char* key) { return n.has(key) ? n.at(key).names() : std::vector<std::string>{}; };
  for (auto& s : list("stocks")) b.add_stock(s);
  for (auto& s : list("sumvars")) b.add_sumvar(s);
  for (auto& s : list("inputs")) b.add_inport(s);
  for (auto& s : list("outputs")) b.add_outport(s);
  if (n.has("vars")) {
    Node vars = n.at("vars");
    for (std::size_t k = 0; k < vars.size(); ++k) {
      Node v = vars.at(k);
      v.only({"name", "expr"});
      b.add_var(v.at("name").str(), v.at("expr").expr());
    }
  }
  if (n.has("flows")) {
    Node flows = n.at("flows");
    for (std::size_t k = 0; k < flows.size(); ++k) {
      Node f = flows.at(k);
      f.only({"name", "rate", "from", "to"});
      auto opt = [&](const char* key) { return f.has(key) && !f.at(key).json().is_null() ? f.at(key).str() : std::string(); };
      b.add_flow(f.at("name").str(), f.at("rate").str(), opt("from"), opt("to"));
    }
  }
  if (n.has("links")) {
    Node links = n.at("links");
    links.object();
    for (auto it = links.json().begin(); it != links.json().end(); ++it) {
      Node group = links.at(it.key());
      auto kind = link_kind_from_name(it.key());
      if (!kind) group.fail("unknown link kind");
      for (std::size_t k = 0; k < group.size(); ++k) {
        Node p = group.at(k);
        if (p.size() != 2) p.fail("expected a pair of names");
        b.add_link(*kind, p.at(std::size_t{0}).str(), p.at(std::size_t{1}).str());
      }
    }
  }
  if (n.has("dependency")) {
    std::vector<std::pair<std::string, std::string>> d;
    Node dep = n.at("dependency");
    for (std::size_t k = 0; k < dep.size(); ++k) {
      Node p = dep.at(k);
      if (p.size() != 2) p.fail("expected a pair of names");
      d.emplace_back(p.at(std::size_t{0}).str(), p.at(std::size_t{1}).str());
    }
    b.set_dependency(std::move(d));
  }
  try {
    return b.seal();
  } catch (const SchemaError&) {
    throw;
  } catch (const StructureError& e) {
    n.fail(e.what());
  }
}

inline Json stockflow_json(const StockFlowDiagram& sf) {
  const auto& p = sf.parts();
  Json j;
  j["stocks"] = names_json(p.stock);
  j["sumvars"] = names_json(p.sumvar);
  j["inputs"] = names_json(p.inport);
  j["outputs"] = names_json(p.outport);
  Json flows = Json::array();
  for (Index f = 0; f < p.flow.size(); ++f) {
    auto ins = p.iflow.preimage(f), outs = p.oflow.preimage(f);
    if (ins.size() > 1 || outs.size() > 1) throw SchemaError("flow '" + p.flow.label(f) + "' has several stocks on one side");
    Json fj;
    fj["name"] = p.flow.label(f);
    fj["rate"] = p.var.label(p.fv(f));
    if (!outs.empty()) fj["from"] = p.stock.label(p.os(outs[0]));
    if (!ins.empty()) fj["to"] = p.stock.label(p.is(ins[0]));
    flows.push_back(std::move(fj));
  }
  j["flows"] = std::move(flows);
  Json vars = Json::array();
  for (Index v = 0; v < p.var.size(); ++v) vars.push_back(Json{{"name", p.var.label(v)}, {"expr", to_string(p.aux[v])}});
  j["vars"] = std::move(vars);
  Json links;
  links["stock_link"] = span_json(p.stock_link);
  links["stock_sum_link"] = span_json(p.stock_sum_link);
  links["sum_link"] = span_json(p.sum_link);
  links["var_link"] = span_json(p.var_link);
  links["in_link"] = span_json(p.in_link);
  links["out_link"] = span_json(p.out_link);
  j["links"] = std::move(links);
  j["dependency"] = pairs_json(p.dependency.pairs(), p.inport, p.outport);
  return j;
}

// --- signals and scenarios --------------------------------------------------------

inline InputSignal read_signal(const Node& n) {
  n.only({"inputs", "table", "exprs"});
  FinSet ports = n.at("inputs").name_set();
  if (n.has("table") == n.has("exprs")) n.fail("give exactly one of 'table' and 'exprs'");
  try {
    if (n.has("table")) {
      Node t = n.at("table");
      std::vector<InputSignal::Breakpoint> rows;
      for (std::size_t k = 0; k < t.size(); ++k) {
        Node row = t.at(k);
        row.only({"t", "value"});
        Vec v;
        Node vals = row.at("value");
        for (std::size_t i = 0; i < vals.size(); ++i) v.push_back(vals.at(i).num());
        if (v.size() != ports.size()) vals.fail("expected " + std::to_string(ports.size()) + " values");
        rows.push_back({row.at("t").num(), std::move(v)});
      }
      return InputSignal::table(ports, std::move(rows));
    }
    Node e = n.at("exprs");
    e.object();
    std::vector<Expr> exprs;
    for (Index i = 0; i < ports.size(); ++i) exprs.push_back(e.at(ports.label(i)).expr());
    if (e.json().size() != ports.size()) e.fail("entries must match the declared inputs exactly");
    return InputSignal::expressions(ports, std::move(exprs));
  } catch (const SchemaError&) {
    throw;
  } catch (const StructureError& err) {
    n.fail(err.what());
  }
}

inline Json signal_json(const InputSignal& s) {
  Json j;
  j["inputs"] = names_json(s.ports());
  if (s.is_table()) {
    Json t = Json::array();
    for (const auto& r : s.rows()) t.push_back(Json{{"t", r.time}, {"value", r.value}});
    j["table"] = std::move(t);
  } else {
    Json e = Json::object();
    for (Index i = 0; i < s.ports().size(); ++i) e[s.ports().label(i)] = to_string(s.exprs().exprs()[i]);
    j["exprs"] = std::move(e);
  }
  return j;
}

// One simulation: a model reference (relative to the scenario file), an
// initial state by name, an input signal and solver settings.
struct Scenario {
  std::string model;
  std::filesystem::path base_dir;
  std::vector<std::pair<std::string, double>> initial;
  Json signal_body;
  double t0 = 0.0, t1 = 1.0, dt = 0.1;
  Method method = Method::rk4;

  std::filesystem::path model_path() const { return base_dir / model; }
};

inline Scenario read_scenario(const Node& n, std::filesystem::path base_dir) {
  n.only({"model", "initial", "signal", "t0", "t1", "dt", "method"});
  Scenario s;
  s.base_dir = std::move(base_dir);
  s.model = n.at("model").str();
  Node init = n.at("initial");
  init.object();
  for (auto it = init.json().begin(); it != init.json().end(); ++it) s.initial.emplace_back(it.key(), init.at(it.key()).num());
  if (n.has("signal")) {
    read_signal(n.at("signal"));  // validate now
    s.signal_body = n.at("signal").json();
  }
  s.t0 = n.has("t0") ? n.at("t0").num() : 0.0;
  s.t1 = n.at("t1").num();
  s.dt = n.at("dt").num();
  if (n.has("method")) {
    auto m = method_from_name(n.at("method").str());
    if (!m) n.at("method").fail("method must be 'euler' or 'rk4'");
    s.method = *m;
  }
  return s;
}

inline Json scenario_json(const Scenario& s) {
  Json j;
  j["model"] = s.model;
  Json init = Json::object();
  for (const auto& [k, v] : s.initial) init[k] = v;
  j["initial"] = std::move(init);
  if (!s.signal_body.is_null()) j["signal"] = s.signal_body;
  j["t0"] = s.t0;
  j["t1"] = s.t1;
  j["dt"] = s.dt;
  j["method"] = std::string(method_name(s.method));
  return j;
}

// Initial state vector over `states` from the scenario's name table.
inline Vec initial_state(const Scenario& s, const FinSet& states) {
  Vec v(states.size(), 0.0);
  std::vector<bool> set(states.size(), false);
  for (const auto& [name, value] : s.initial) {
    auto i = states.find(name);
    if (!i) throw SchemaError("scenario: initial value for unknown state '" + name + "'");
    v[*i] = value;
    set[*i] = true;
  }
  for (Index i = 0; i < states.size(); ++i)
    if (!set[i]) throw SchemaError("scenario: no initial value for state '" + states.label(i) + "'");
  return v;
}

inline InputSignal scenario_signal(const Scenario& s, const FinSet& inputs) {
  if (s.signal_body.is_null()) {
    if (!inputs.empty()) throw SchemaError("scenario: the model has inputs but no signal is given");
    return InputSignal::table(inputs, {});
  }
  auto sig = read_signal(Node(s.signal_body, "scenario", "/body/signal"));
  if (sig.ports().labels() != inputs.labels()) throw SchemaError("scenario: signal inputs differ from the model's inputs");
  return sig;
}

// --- whole files -------------------------------------------------------------------

using Model = std::variant<Interface, DepInterface, WiringFile, MealyMachine, StockFlowDiagram, InputSignal, Scenario>;

inline Model read_model(const Document& d) {
  Node body = d.body();
  if (d.kind == "interface") return read_interface(body);
  if (d.kind == "dependency") return read_dep_interface(body);
  if (d.kind == "wiring") return read_wiring(body, false);
  if (d.kind == "dep_wiring") return read_wiring(body, true);
  if (d.kind == "mealy") return read_mealy(body);
  if (d.kind == "stockflow") return read_stockflow(body);
  if (d.kind == "signal") return read_signal(body);
  return read_scenario(body, std::filesystem::path(d.source).parent_path());
}

inline Model load(const std::filesystem::path& path) { return read_model(load_document(path)); }

inline StockFlowDiagram load_stockflow(const std::filesystem::path& path) {
  auto text = read_file(path);
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return StockFlowDiagram();
  auto d = parse_document(text, path.string());
  expect_kind(d, "stockflow");
  return read_stockflow(d.body());
}

inline MealyMachine load_mealy(const std::filesystem::path& path) {
  auto d = load_document(path);
  expect_kind(d, "mealy");
  return read_mealy(d.body());
}

inline WiringFile load_wiring(const std::filesystem::path& path) {
  auto d = load_document(path);
  if (d.kind != "wiring") expect_kind(d, "dep_wiring");
  return read_wiring(d.body(), d.kind == "dep_wiring");
}

inline std::string to_text(const Interface& x) { return document_text("interface", interface_json(x)); }
inline std::string to_text(const DepInterface& x) { return document_text("dependency", dep_interface_json(x)); }
inline std::string to_text(const WiringDiagram& f) { return document_text("wiring", wiring_json(f)); }
inline std::string to_text(const DepWiringDiagram& f) { return document_text("dep_wiring", dep_wiring_json(f)); }
inline std::string to_text(const MealyMachine& m) { return document_text("mealy", mealy_json(m)); }
inline std::string to_text(const StockFlowDiagram& sf) { return document_text("stockflow", stockflow_json(sf)); }
inline std::string to_text(const InputSignal& s) { return document_text("signal", signal_json(s)); }
inline std::string to_text(const Scenario& s) { return document_text("scenario", scenario_json(s)); }

template <class T>
void save(const T& obj, const std::filesystem::path& path) {
  write_file(path, to_text(obj));
}

// --- DOT ----------------------------------------------------------------------

namespace detail {

inline std::string dot_id(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

inline void dot_nodes(std::ostringstream& os, const std::string& prefix, const FinSet& set, const char* attrs) {
  for (Index i = 0; i < set.size(); ++i) {
    os << "  " << dot_id(prefix + set.label(i)) << " [label=" << dot_id(set.label(i)) << ", " << attrs << "];\n";
  }
}

inline void dot_edges(std::ostringstream& os, const Span& s, const std::string& pa, const std::string& pb,
                      const char* attrs) {
  for (Index e = 0; e < s.size(); ++e) {
    auto [a, b] = s.leg_pair(e);
    os << "  " << dot_id(pa + s.src().label(a)) << " -> " << dot_id(pb + s.tgt().label(b)) << " [" << attrs << "];\n";
  }
}

inline std::string wiring_dot(const WiringDiagram& f, const Dependency* inner) {
  std::ostringstream os;
  os << "digraph wiring {\n";
  const bool empty = f.dom().inputs.empty() && f.dom().outputs.empty() && f.cod().inputs.empty() && f.cod().outputs.empty();
  if (!empty) {
    os << "  rankdir=TB;\n";
    dot_nodes(os, "outer_in:", f.cod().inputs, "shape=invtriangle");
    dot_nodes(os, "inner_in:", f.dom().inputs, "shape=box");
    dot_nodes(os, "inner_out:", f.dom().outputs, "shape=box");
    dot_nodes(os, "outer_out:", f.cod().outputs, "shape=triangle");
    dot_edges(os, f.w_in(), "outer_in:", "inner_in:", "style=solid");
    dot_edges(os, f.w_out(), "inner_out:", "outer_out:", "style=solid");
    dot_edges(os, f.w(), "inner_out:", "inner_in:", "style=solid, color=violet, constraint=false");
    if (inner) {
      for (auto [i, o] : inner->pairs()) {
        os << "  " << dot_id("inner_in:" + f.dom().inputs.label(i)) << " -> "
           << dot_id("inner_out:" + f.dom().outputs.label(o)) << " [style=dashed, color=blue];\n";
      }
    }
  }
  os << "}\n";
  return os.str();
}

}  // namespace detail

// Wires solid (trace wires violet), inner dependencies dashed blue.
inline std::string export_dot(const WiringDiagram& f) { return detail::wiring_dot(f, nullptr); }
inline std::string export_dot(const DepWiringDiagram& f) { return detail::wiring_dot(f.diagram(), &f.dom_dep()); }

// Nodes grouped by kind; flows drawn stock -> flow -> stock, links dashed.
inline std::string export_dot(const StockFlowDiagram& sf) {
  const auto& p = sf.parts();
  std::ostringstream os;
  os << "digraph stockflow {\n";
  auto cluster = [&](const char* name, const char* label, const std::string& prefix, const FinSet& set, const char* attrs) {
    if (set.empty()) return;
    os << "  subgraph cluster_" << name << " {\n    label=" << detail::dot_id(label) << ";\n";
    std::ostringstream inner;
    detail::dot_nodes(inner, prefix, set, attrs);
    std::istringstream lines(inner.str());
    for (std::string line; std::getline(lines, line);) os << "  " << line << "\n";
    os << "  }\n";
  };
  cluster("stocks", "stocks", "stock:", p.stock, "shape=box, style=bold");
  cluster("flows", "flows", "flow:", p.flow, "shape=diamond");
  cluster("vars", "variables", "var:", p.var, "shape=ellipse");
  cluster("sumvars", "sum variables", "sumvar:", p.sumvar, "shape=doublecircle");
  cluster("inports", "input ports", "in:", p.inport, "shape=invtriangle");
  cluster("outports", "output ports", "out:", p.outport, "shape=triangle");
  for (Index i = 0; i < p.outflow.size(); ++i) {
    os << "  " << detail::dot_id("stock:" + p.stock.label(p.os(i))) << " -> "
       << detail::dot_id("flow:" + p.flow.label(p.oflow(i))) << " [style=bold];\n";
  }
  for (Index i = 0; i < p.inflow.size(); ++i) {
    os << "  " << detail::dot_id("flow:" + p.flow.label(p.iflow(i))) << " -> "
       << detail::dot_id("stock:" + p.stock.label(p.is(i))) << " [style=bold];\n";
  }
  for (Index f = 0; f < p.flow.size(); ++f) {
    os << "  " << detail::dot_id("var:" + p.var.label(p.fv(f))) << " -> " << detail::dot_id("flow:" + p.flow.label(f))
       << " [style=dotted, arrowhead=none];\n";
  }
  detail::dot_edges(os, p.stock_link, "stock:", "var:", "style=dashed");
  detail::dot_edges(os, p.stock_sum_link, "stock:", "sumvar:", "style=dashed");
  detail::dot_edges(os, p.sum_link, "sumvar:", "var:", "style=dashed");
  detail::dot_edges(os, p.var_link, "var:", "var:", "style=dashed");
  detail::dot_edges(os, p.in_link, "in:", "var:", "style=dashed");
  detail::dot_edges(os, p.out_link, "var:", "out:", "style=dashed");
  os << "}\n";
  return os.str();
}

// --- CSV ------------------------------------------------------------------------

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {

inline std::vector<std::string> column_names(const FinSet& set, const char* fallback) {
  std::vector<std::string> out;
  for (Index i = 0; i < set.size(); ++i) out.push_back(set.has_labels() ? set.label(i) : fallback + std::to_string(i));
  return out;
}

}  // namespace detail

// Header `t,<states>,<outputs>`, then one row per recorded time.
inline std::string trajectory_csv(const Trajectory& tr) {
  std::ostringstream os;
  os << "t";
  for (auto& n : detail::column_names(tr.state_names, "s")) os << "," << n;
  for (auto& n : detail::column_names(tr.output_names, "y")) os << "," << n;
  os << "\n";
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    os << format_double(tr.times[k]);
    for (double x : tr.states[k]) os << "," << format_double(x);
    for (double x : tr.outputs[k]) os << "," << format_double(x);
    os << "\n";
  }
  return os.str();
}

inline void write_trajectory(const Trajectory& tr, const std::filesystem::path& path) {
  write_file(path, trajectory_csv(tr));
}

// Discrete run as CSV: `step,<states>,<outputs>`, the state being the one
// before the step, plus a final row with the last state.
inline std::string run_csv(const RunTrace& run, const FinSet& states, const FinSet& outputs) {
  std::ostringstream os;
  os << "step";
  for (auto& n : detail::column_names(states, "s")) os << "," << n;
  for (auto& n : detail::column_names(outputs, "y")) os << "," << n;
  os << "\n";
  for (std::size_t k = 0; k < run.states.size(); ++k) {
    os << k;
    for (double x : run.states[k]) os << "," << format_double(x);
    for (double x : run.outputs[k]) os << "," << format_double(x);
    os << "\n";
  }
  os << run.states.size();
  for (double x : run.final_state) os << "," << format_double(x);
  for (std::size_t i = 0; i < outputs.size(); ++i) os << ",";
  os << "\n";
  return os.str();
}

// Input rows for a discrete run: a header naming the inputs (any order),
// then one row of numbers per step.
inline std::vector<Vec> read_input_csv(const std::string& text, const FinSet& inputs, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) {
      auto b = cell.find_first_not_of(" \t\r"), e = cell.find_last_not_of(" \t\r");
      out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  if (!std::getline(in, line)) {
    if (inputs.empty()) return {};
    throw SchemaError(source + ":1: missing header");
  }
  auto header = split(line);
  std::vector<Index> column(inputs.size(), static_cast<Index>(-1));
  for (Index c = 0; c < header.size(); ++c) {
    auto i = inputs.find(header[c]);
    if (!i) throw SchemaError(source + ":1: unknown input column '" + header[c] + "'");
    column[*i] = c;
  }
  for (Index i = 0; i < inputs.size(); ++i)
    if (column[i] == static_cast<Index>(-1)) throw SchemaError(source + ":1: missing column for input '" + inputs.label(i) + "'");
  std::vector<Vec> rows;
  for (std::size_t ln = 2; std::getline(in, line); ++ln) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split(line);
    if (cells.size() != header.size()) throw SchemaError(source + ":" + std::to_string(ln) + ": wrong number of cells");
    Vec row(inputs.size());
    for (Index i = 0; i < inputs.size(); ++i) {
      const auto& cell = cells[column[i]];
      std::size_t used = 0;
      try {
        row[i] = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cell.size() || cell.empty()) {
        throw SchemaError(source + ":" + std::to_string(ln) + ": not a number: '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace dynwire::io
