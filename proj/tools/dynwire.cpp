// Command-line front end. Exit codes: 0 pass, 1 domain finding, 2 usage or I/O.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dynwire/model_io.hpp"
#include "dynwire/oracle.hpp"

namespace fs = std::filesystem;
using namespace dynwire;
using io::Json;

namespace {

constexpr int kOk = 0, kFinding = 1, kUsage = 2;

struct Globals {
  std::string format = "text";
  std::uint64_t seed = 0xC0FFEE;
  std::size_t trials = 32;
  bool json() const { return format == "json"; }
};

// Thrown for usage problems detected after parsing (bad flag values).
struct UsageError : Error {
  using Error::Error;
};

void emit(const std::string& text, const std::optional<std::string>& out) {
  if (out) {
    io::write_file(*out, text);
  } else {
    std::cout << text;
  }
}

std::string pair_list(const Relation& r) {
  std::ostringstream os;
  for (auto [i, o] : r.pairs()) os << r.src().label(i) << " -> " << r.tgt().label(o) << "\n";
  return os.str();
}

Json pair_json(const Relation& r) {
  Json a = Json::array();
  for (auto [i, o] : r.pairs()) a.push_back(Json::array({r.src().label(i), r.tgt().label(o)}));
  return a;
}

// --- check ------------------------------------------------------------------

struct CheckResult {
  std::string path;
  std::string kind;
  bool error = false;  // I/O or schema
  std::vector<std::string> findings;
};

void check_model(const io::Document& doc, CheckResult& res, const Globals& g) {
  auto model = io::read_model(doc);
  if (auto* wf = std::get_if<io::WiringFile>(&model)) {
    if (doc.kind == "dep_wiring") {
      auto v = io::validate_wiring_file(*wf);
      if (!v.ok()) {
        std::istringstream lines(v.describe(wf->diagram));
        for (std::string l; std::getline(lines, l);) res.findings.push_back(l);
      }
    }
  } else if (auto* m = std::get_if<MealyMachine>(&model)) {
    ProbeOptions opt;
    opt.seed = g.seed;
    opt.trials = g.trials;
    auto exact = readout_respects(*m, opt);
    for (auto [i, o] : exact.violations) {
      res.findings.push_back("readout '" + m->ports().outputs.label(o) + "' reads input '" +
                             m->ports().inputs.label(i) + "' outside its dependency");
    }
  } else if (auto* sf = std::get_if<StockFlowDiagram>(&model)) {
    for (const auto& f : validate_stockflow(*sf).findings) res.findings.push_back("condition (" + f.condition + "): " + f.message);
  } else if (auto* sc = std::get_if<io::Scenario>(&model)) {
    auto sub = io::load_document(sc->model_path());
    auto inner = io::read_model(sub);
    FinSet states, inputs;
    if (auto* m2 = std::get_if<MealyMachine>(&inner)) {
      states = m2->states();
      inputs = m2->ports().inputs;
    } else if (auto* sf2 = std::get_if<StockFlowDiagram>(&inner)) {
      for (const auto& f : validate_stockflow(*sf2).findings) res.findings.push_back("model: condition (" + f.condition + "): " + f.message);
      states = sf2->stocks();
      inputs = sf2->inports();
    } else {
      throw io::SchemaError(doc.source + ":/body/model: scenario model must be a mealy or stockflow file");
    }
    io::initial_state(*sc, states);
    io::scenario_signal(*sc, inputs);
    if (!(sc->dt > 0.0)) res.findings.push_back("dt must be positive");
    if (!(sc->t1 > sc->t0)) res.findings.push_back("t1 must exceed t0");
  }
}

int cmd_check(const std::vector<std::string>& files, const Globals& g) {
  std::vector<CheckResult> results;
  for (const auto& path : files) {
    CheckResult r;
    r.path = path;
    try {
      auto doc = io::load_document(path);
      r.kind = doc.kind;
      check_model(doc, r, g);
    } catch (const ValidationError& e) {
      r.findings.push_back(e.what());
    } catch (const NumericError& e) {
      r.findings.push_back(e.what());
    } catch (const Error& e) {
      r.error = true;
      r.findings.push_back(e.what());
    }
    results.push_back(std::move(r));
  }
  bool any_error = false, any_finding = false;
  Json out = Json::array();
  for (const auto& r : results) {
    any_error = any_error || r.error;
    any_finding = any_finding || !r.findings.empty();
    if (g.json()) {
      out.push_back(Json{{"path", r.path},
                         {"kind", r.kind},
                         {"status", r.error ? "error" : r.findings.empty() ? "pass" : "fail"},
                         {"findings", r.findings}});
    } else {
      std::cout << r.path << ": " << (r.error ? "error" : r.findings.empty() ? "pass" : "fail") << "\n";
      for (const auto& f : r.findings) std::cout << "  " << f << "\n";
    }
  }
  if (g.json()) std::cout << Json{{"command", "check"}, {"results", out}}.dump(2) << "\n";
  return any_error ? kUsage : any_finding ? kFinding : kOk;
}

// --- deps -------------------------------------------------------------------

int cmd_deps(const std::string& wiring, const std::optional<std::string>& dep_file, bool oracle, const Globals& g) {
  auto wf = io::load_wiring(wiring);
  const auto& f = wf.diagram;
  Dependency d = wf.inner ? *wf.inner : empty_dependency(f.dom());
  if (dep_file) {
    auto doc = io::load_document(*dep_file);
    io::expect_kind(doc, "dependency");
    auto di = io::read_dep_interface(doc.body());
    if (di.iface.inputs.labels() != f.dom().inputs.labels() || di.iface.outputs.labels() != f.dom().outputs.labels()) {
      throw io::SchemaError(*dep_file + ": dependency ports differ from the wiring's inner interface");
    }
    d = Relation(f.dom().inputs, f.dom().outputs, di.dep.pairs());
  }
  auto acyc = is_acyclic_morphism(f, d);
  auto r = dependency_pushforward(f, d);
  std::optional<bool> agree;
  if (oracle) agree = oracle::pushforward_by_tuples(f, d) == r;
  if (g.json()) {
    Json j{{"command", "deps"}, {"pairs", pair_json(r)}, {"acyclic", acyc.acyclic}};
    if (agree) j["oracle_agrees"] = *agree;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << pair_list(r);
    if (!acyc.acyclic) std::cout << "warning: cyclic: " << describe_cycle(f.dom(), acyc.witness) << "\n";
    if (agree) std::cout << "oracle: " << (*agree ? "agrees" : "DISAGREES") << "\n";
  }
  return (agree && !*agree) ? kFinding : kOk;
}

// --- compose ----------------------------------------------------------------

void require_labels(const FinSet& have, const FinSet& want, const std::string& what) {
  if (have.labels() != want.labels()) {
    std::string h, w;
    for (auto& l : have.labels()) h += " " + l;
    for (auto& l : want.labels()) w += " " + l;
    throw io::SchemaError(what + ": model ports [" + h + " ] do not match wiring ports [" + w + " ]");
  }
}

void report_validation(const DdwdValidation& v, const WiringDiagram& f, const Globals& g) {
  if (g.json()) {
    std::cout << Json{{"status", "fail"}, {"findings", v.describe(f)}}.dump(2) << "\n";
  } else {
    std::cerr << "wiring is not admissible:\n" << v.describe(f) << "\n";
  }
}

int cmd_compose(const std::string& wiring, const std::vector<std::string>& models, const std::string& out,
                const Globals& g) {
  auto wf = io::load_wiring(wiring);
  const std::size_t expected = wf.boxes.empty() ? 1 : wf.boxes.size();
  if (models.size() != expected) {
    throw UsageError("compose: the wiring has " + std::to_string(expected) + " box(es) but " +
                     std::to_string(models.size()) + " model(s) were given");
  }
  std::vector<io::Model> loaded;
  for (const auto& m : models) loaded.push_back(io::load(m));
  const bool mealy = std::holds_alternative<MealyMachine>(loaded.front());
  for (std::size_t k = 0; k < loaded.size(); ++k) {
    bool ok = mealy ? std::holds_alternative<MealyMachine>(loaded[k]) : std::holds_alternative<StockFlowDiagram>(loaded[k]);
    if (!ok) throw UsageError("compose: models must all be mealy machines or all stock-flow diagrams (" + models[k] + ")");
  }
  const auto& f = wf.diagram;
  std::string text;
  if (mealy) {
    std::vector<MealyMachine> parts;
    for (std::size_t k = 0; k < loaded.size(); ++k) {
      auto m = std::get<MealyMachine>(loaded[k]);
      parts.push_back(wf.boxes.empty() ? m : with_prefix(m, wf.boxes[k] + "."));
    }
    auto joint = parallel(parts);
    require_labels(joint.ports().inputs, f.dom().inputs, "inner inputs");
    require_labels(joint.ports().outputs, f.dom().outputs, "inner outputs");
    auto v = io::validate_wiring_file(wf, Relation(f.dom().inputs, f.dom().outputs, joint.dependency().pairs()));
    if (!v.ok()) {
      report_validation(v, f, g);
      return kFinding;
    }
    text = io::to_text(apply_wiring(*v.value, joint));
  } else {
    std::vector<StockFlowDiagram> parts;
    for (std::size_t k = 0; k < loaded.size(); ++k) {
      const auto& sf = std::get<StockFlowDiagram>(loaded[k]);
      auto rep = validate_stockflow(sf);
      if (!rep.pass()) {
        std::cerr << models[k] << ": invalid stock-flow diagram\n" << rep.describe() << "\n";
        return kFinding;
      }
      parts.push_back(wf.boxes.empty() ? sf : with_prefix_sf(sf, wf.boxes[k] + "."));
    }
    auto joint = parallel_sf(parts);
    require_labels(joint.inports(), f.dom().inputs, "inner inputs");
    require_labels(joint.outports(), f.dom().outputs, "inner outputs");
    auto v = io::validate_wiring_file(wf, Relation(f.dom().inputs, f.dom().outputs, joint.dependency().pairs()));
    if (!v.ok()) {
      report_validation(v, f, g);
      return kFinding;
    }
    text = io::to_text(apply_wiring_sf(*v.value, joint));
  }
  io::write_file(out, text);
  if (g.json()) std::cout << Json{{"command", "compose"}, {"status", "pass"}, {"output", out}}.dump(2) << "\n";
  return kOk;
}

// --- to-mealy ---------------------------------------------------------------

int cmd_to_mealy(const std::string& path, const std::string& out, const Globals& g) {
  auto sf = io::load_stockflow(path);
  auto rep = validate_stockflow(sf);
  if (!rep.pass()) {
    std::cerr << path << ": invalid stock-flow diagram\n" << rep.describe() << "\n";
    return kFinding;
  }
  io::write_file(out, io::to_text(to_mealy(sf)));
  if (g.json()) std::cout << Json{{"command", "to-mealy"}, {"status", "pass"}, {"output", out}}.dump(2) << "\n";
  return kOk;
}

// --- simulate ---------------------------------------------------------------

int cmd_simulate(const std::string& path, const std::optional<std::string>& out, std::optional<double> dt,
                 std::optional<double> t1, std::optional<std::string> method, const Globals& g) {
  if (dt && !(*dt > 0.0)) throw UsageError("--dt must be positive");
  auto doc = io::load_document(path);
  io::expect_kind(doc, "scenario");
  auto sc = io::read_scenario(doc.body(), fs::path(path).parent_path());
  if (dt) sc.dt = *dt;
  if (t1) sc.t1 = *t1;
  if (method) {
    auto m = method_from_name(*method);
    if (!m) throw UsageError("--method must be 'euler' or 'rk4'");
    sc.method = *m;
  }
  if (!(sc.dt > 0.0)) throw UsageError("dt must be positive");
  if (!(sc.t1 > sc.t0)) throw UsageError("t1 must exceed t0");
  auto model = io::load(sc.model_path());
  std::optional<MealyMachine> machine;
  if (auto* m = std::get_if<MealyMachine>(&model)) {
    machine = *m;
  } else if (auto* sf = std::get_if<StockFlowDiagram>(&model)) {
    auto rep = validate_stockflow(*sf);
    if (!rep.pass()) {
      std::cerr << sc.model << ": invalid stock-flow diagram\n" << rep.describe() << "\n";
      return kFinding;
    }
    machine = to_mealy(*sf);
  } else {
    throw io::SchemaError(path + ":/body/model: scenario model must be a mealy or stockflow file");
  }
  auto s0 = io::initial_state(sc, machine->states());
  auto signal = io::scenario_signal(sc, machine->ports().inputs);
  auto tr = integrate(*machine, s0, signal, sc.t0, sc.t1, sc.dt, sc.method);
  emit(io::trajectory_csv(tr), out);
  if (out) {
    if (g.json()) {
      std::cout << Json{{"command", "simulate"}, {"status", "pass"}, {"steps", tr.times.size() - 1},
                        {"max_residual", tr.meta.max_residual}, {"output", *out}}.dump(2) << "\n";
    } else {
      std::cout << "steps: " << tr.times.size() - 1 << "\nmax residual: " << tr.meta.max_residual << "\n";
    }
  }
  return kOk;
}

// --- run-discrete -----------------------------------------------------------

Vec parse_vector(const std::string& text, std::size_t n, const char* what) {
  Vec v;
  std::istringstream ss(text);
  for (std::string cell; std::getline(ss, cell, ',');) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0) throw UsageError(std::string(what) + ": not a number: '" + cell + "'");
    v.push_back(x);
  }
  if (v.size() != n) throw UsageError(std::string(what) + ": expected " + std::to_string(n) + " values");
  return v;
}

int cmd_run_discrete(const std::string& path, const std::optional<std::string>& inputs, std::optional<std::size_t> steps,
                     const std::optional<std::string>& init, const std::optional<std::string>& out) {
  auto m = io::load_mealy(path);
  std::vector<Vec> rows;
  if (inputs) rows = io::read_input_csv(io::read_file(*inputs), m.ports().inputs, *inputs);
  std::size_t n = 0;
  if (steps) {
    n = *steps;
    if (inputs && n > rows.size()) throw UsageError("--steps exceeds the number of input rows");
    if (!inputs && !m.ports().inputs.empty() && n > 0) throw UsageError("the machine has inputs; pass --inputs");
  } else if (inputs) {
    n = rows.size();
  } else {
    throw UsageError("give --steps or --inputs");
  }
  Vec s0 = init ? parse_vector(*init, m.states().size(), "--init") : Vec(m.states().size(), 0.0);
  const std::size_t nin = m.ports().inputs.size();
  auto trace = run(m, s0, n, [&](std::size_t k) { return inputs ? rows[k] : Vec(nin, 0.0); });
  emit(io::run_csv(trace, m.states(), m.ports().outputs), out);
  return kOk;
}

// --- export-dot -------------------------------------------------------------

int cmd_export_dot(const std::string& path, const std::optional<std::string>& out) {
  auto doc = io::load_document(path);
  auto model = io::read_model(doc);
  std::string text;
  if (auto* wf = std::get_if<io::WiringFile>(&model)) {
    if (doc.kind == "dep_wiring") {
      auto v = io::validate_wiring_file(*wf);
      if (v.ok()) {
        text = io::export_dot(*v.value);
      } else {
        text = io::export_dot(wf->diagram);
      }
    } else {
      text = io::export_dot(wf->diagram);
    }
  } else if (auto* sf = std::get_if<StockFlowDiagram>(&model)) {
    text = io::export_dot(*sf);
  } else {
    throw UsageError("export-dot: expected a wiring, dep_wiring or stockflow file");
  }
  emit(text, out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compose and simulate Mealy machines and stock-flow models along wiring diagrams"};
  app.require_subcommand(1);
  Globals g;
  if (const char* env = std::getenv("DYNWIRE_FORMAT")) g.format = env;
  app.add_option("--format", g.format, "Report format (default from DYNWIRE_FORMAT, else text)")
      ->check(CLI::IsMember({"text", "json"}));
  app.add_option("--seed", g.seed, "Seed for randomized checks");
  app.add_option("--trials", g.trials, "Trials for randomized checks");

  std::vector<std::string> check_files;
  auto* check = app.add_subcommand("check", "Validate model files");
  check->add_option("files", check_files)->required();

  std::string wiring;
  std::optional<std::string> dep_file;
  bool use_oracle = false;
  auto* deps = app.add_subcommand("deps", "Push a dependency forward along a wiring diagram");
  deps->add_option("wiring", wiring)->required();
  deps->add_option("--dep", dep_file, "Inner dependency file (default: the wiring's own)");
  deps->add_flag("--oracle", use_oracle, "Cross-check against brute-force tuple enumeration");

  std::vector<std::string> models;
  std::string out_required;
  auto* compose = app.add_subcommand("compose", "Apply a wiring diagram to models");
  compose->add_option("wiring", wiring)->required();
  compose->add_option("models", models)->required();
  compose->add_option("-o,--output", out_required)->required();

  std::string model;
  auto* tomealy = app.add_subcommand("to-mealy", "Translate a stock-flow diagram into a Mealy machine");
  tomealy->add_option("stockflow", model)->required();
  tomealy->add_option("-o,--output", out_required)->required();

  std::optional<std::string> out;
  std::optional<double> dt, t1;
  std::optional<std::string> method;
  auto* simulate = app.add_subcommand("simulate", "Integrate a scenario; CSV to -o or stdout");
  simulate->add_option("scenario", model)->required();
  simulate->add_option("-o,--output", out);
  simulate->add_option("--dt", dt);
  simulate->add_option("--t1", t1);
  simulate->add_option("--method", method);

  std::optional<std::string> inputs, init;
  std::optional<std::size_t> steps;
  auto* rund = app.add_subcommand("run-discrete", "Step a Mealy machine; CSV to -o or stdout");
  rund->add_option("machine", model)->required();
  rund->add_option("--inputs", inputs, "CSV of inputs, one row per step");
  rund->add_option("--steps", steps);
  rund->add_option("--init", init, "Comma-separated initial state (default zeros)");
  rund->add_option("-o,--output", out);

  auto* dot = app.add_subcommand("export-dot", "Render a wiring or stock-flow model as DOT");
  dot->add_option("model", model)->required();
  dot->add_option("-o,--output", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  if (g.format != "text" && g.format != "json") {
    std::cerr << "error: format must be text or json\n";
    return kUsage;
  }

  try {
    if (*check) return cmd_check(check_files, g);
    if (*deps) return cmd_deps(wiring, dep_file, use_oracle, g);
    if (*compose) return cmd_compose(wiring, models, out_required, g);
    if (*tomealy) return cmd_to_mealy(model, out_required, g);
    if (*simulate) return cmd_simulate(model, out, dt, t1, method, g);
    if (*rund) return cmd_run_discrete(model, inputs, steps, init, out);
    if (*dot) return cmd_export_dot(model, out);
  } catch (const ValidationError& e) {
    std::cerr << "finding: " << e.what() << "\n";
    return kFinding;
  } catch (const NumericError& e) {
    std::cerr << "finding: " << e.what() << "\n";
    return kFinding;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
