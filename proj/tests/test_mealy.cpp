#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "support/laws.hpp"

using namespace dynwire;

namespace {

FinSet labels(std::vector<std::string> v) { return FinSet(std::move(v)); }

DepInterface one_port(bool dependent) {
  Interface x{labels({"i"}), labels({"o"})};
  return {x, dependent ? full_dependency(x) : empty_dependency(x)};
}

// One port looped back onto itself.
WiringDiagram self_loop(const Interface& x) {
  return WiringDiagram::from_wires(x, Interface{labels({"u"}), labels({"v"})}, {{0, 0}}, {{0, 0}}, {{0, 0}});
}

std::vector<std::string> texts(const std::vector<Expr>& es) {
  std::vector<std::string> out;
  for (const auto& e : es) out.push_back(to_string(e));
  return out;
}

}  // namespace

TEST(Machine, ExpressionReadoutMustRespectDependency) {
  EXPECT_THROW(MealyMachine::from_expressions(one_port(false), labels({"s"}), {parse_expr("s")}, {parse_expr("i + s")}),
               ValidationError);
  EXPECT_NO_THROW(MealyMachine::from_expressions(one_port(true), labels({"s"}), {parse_expr("s")}, {parse_expr("i + s")}));
  // Updates may read anything.
  EXPECT_NO_THROW(MealyMachine::from_expressions(one_port(false), labels({"s"}), {parse_expr("i * s")}, {parse_expr("s")}));
}

TEST(Machine, RespectsReportIsExactForExpressions) {
  auto m = MealyMachine::from_expressions(one_port(true), labels({"s"}), {parse_expr("s")}, {parse_expr("i")});
  auto rep = readout_respects(m);
  EXPECT_TRUE(rep.exact);
  EXPECT_TRUE(rep.ok());
}

TEST(Machine, ProbeCatchesOpaqueLiar) {
  auto liar = MealyMachine::from_functions(
      one_port(false), labels({"s"}), [](auto, auto s, EvalStats&) { return Vec{s[0]}; },
      [](auto a, auto s, EvalStats&) { return Vec{a[0] + s[0]}; });
  auto rep = readout_respects(liar);
  EXPECT_FALSE(rep.exact);
  EXPECT_FALSE(rep.ok());
}

TEST(FixedPoint, LiarInFeedbackIsDetected) {
  auto x = one_port(false);
  auto liar = MealyMachine::from_functions(
      x, FinSet(0), [](auto, auto, EvalStats&) { return Vec{}; },
      [](auto a, auto, EvalStats&) { return Vec{a[0] + 1}; });
  auto F = certify(self_loop(x.iface), x.dep, full_dependency(Interface{labels({"u"}), labels({"v"})}));
  Vec a{1};
  EXPECT_THROW(io_fixed_point(F, liar, a, Vec{}), NumericError);
  auto composite = apply_wiring(F, liar);
  EXPECT_THROW(composite.readout(Vec{1}, Vec{}), NumericError);
}

TEST(FixedPoint, MooreFeedbackIsADelay) {
  auto x = one_port(false);
  auto m = MealyMachine::from_expressions(x, labels({"s"}), {parse_expr("i")}, {parse_expr("s")});
  auto F = certify_minimal(self_loop(x.iface), x.dep);
  auto composite = apply_wiring(F, m);
  // x_in = u + s, next s = u + s: a running sum.
  auto trace = run(composite, {0}, 5, [](std::size_t k) { return Vec{double(k + 1)}; });
  EXPECT_EQ(trace.final_state, (Vec{15}));
  EXPECT_EQ(trace.outputs[2], (Vec{3}));
}

TEST(FixedPoint, FeedbackExampleByHand) {
  auto m = fixtures::compose_files("feedback.wiring.json", {"feedback.mealy.json"});
  EXPECT_EQ(texts(m.exprs().readout), (std::vector<std::string>{"2*(a1 + 1 + a2)"}));
  for (double a1 : {-1.0, 0.0, 2.5})
    for (double a2 : {-3.0, 4.0}) EXPECT_DOUBLE_EQ(m.readout(Vec{a1, a2}, Vec{})[0], 2 * ((a1 + 1) + a2));
}

TEST(FixedPoint, UniqueAndLocal) {
  auto r = laws::fixed_point_laws(51, 150, 10);
  EXPECT_TRUE(r.ok) << r.detail;
}

TEST(Composite, FibonacciSymbolicForm) {
  auto m = fixtures::compose_files("fibonacci.wiring.json", {"fib_a.mealy.json", "fib_b.mealy.json"});
  EXPECT_EQ(m.states().labels(), (std::vector<std::string>{"A.x", "B.y"}));
  EXPECT_EQ(texts(m.exprs().update), (std::vector<std::string>{"B.y + A.x", "A.x"}));
  auto trace = run(m, {1, 0}, 12, [](std::size_t) { return Vec{}; });
  EXPECT_EQ(trace.final_state, (Vec{233, 144}));
}

TEST(Composite, SymbolicAndNumericFormsAgree) {
  gen::Rng rng(52);
  for (int k = 0; k < 150; ++k) {
    auto x = laws::random_dep_interface(rng, "x", 4);
    auto F = gen::certified(rng, x, "y", 4);
    auto composite = apply_wiring(F, gen::machine(rng, x));
    ASSERT_TRUE(composite.expression_backed());
    auto symbolic = MealyMachine::from_expressions(composite.iface(), composite.states(), composite.exprs().update,
                                                   composite.exprs().readout);
    std::string why;
    EXPECT_TRUE(laws::machines_agree(rng, composite, symbolic, 10, 1e-9, why)) << why;
  }
}

TEST(Composite, RejectsLooserMachineDependency) {
  auto x = one_port(true);
  auto m = MealyMachine::from_expressions(x, FinSet(0), {}, {parse_expr("i")});
  auto id = WiringDiagram::identity(x.iface);
  auto F = certify(id, empty_dependency(x.iface), empty_dependency(x.iface));
  EXPECT_THROW(apply_wiring(F, m), MismatchError);
}

TEST(Composite, MachineMayBeTighterThanDiagram) {
  auto loose = one_port(true);
  auto m = MealyMachine::from_expressions(one_port(false), labels({"s"}), {parse_expr("i")}, {parse_expr("s")});
  auto F = identity_ddwd(loose);
  auto c = apply_wiring(F, m);
  EXPECT_EQ(c.update(Vec{3}, Vec{1}), (Vec{3}));
}

TEST(Parallel, LabelsAndBlocks) {
  auto m = MealyMachine::from_expressions(one_port(true), labels({"s"}), {parse_expr("s + i")}, {parse_expr("2*i")});
  auto p = parallel(m, m);
  EXPECT_EQ(p.states().labels(), (std::vector<std::string>{"left.s", "right.s"}));
  EXPECT_EQ(p.ports().inputs.labels(), (std::vector<std::string>{"left.i", "right.i"}));
  EXPECT_EQ(texts(p.exprs().update), (std::vector<std::string>{"left.s + left.i", "right.s + right.i"}));
  EXPECT_EQ(p.update(Vec{1, 2}, Vec{10, 20}), (Vec{11, 22}));
  EXPECT_EQ(p.readout(Vec{1, 2}, Vec{10, 20}), (Vec{2, 4}));
  EXPECT_EQ(p.dependency().pairs(), (std::vector<Relation::Pair>{{0, 0}, {1, 1}}));
  auto none = parallel(std::vector<MealyMachine>{});
  EXPECT_EQ(none.states().size(), 0u);
}

TEST(Parallel, Laxity) {
  auto r = laws::laxity(53, 120, 10);
  EXPECT_TRUE(r.ok) << r.detail;
}

TEST(Run, NonFiniteStateIsReportedWithCoordinate) {
  Interface x{labels({"i"}), labels({})};
  auto m = MealyMachine::from_expressions({x, empty_dependency(x)}, labels({"p", "q"}),
                                          {parse_expr("p"), parse_expr("1 / i")}, {});
  try {
    run(m, {0, 0}, 3, [](std::size_t k) { return Vec{k == 2 ? 0.0 : 1.0}; });
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.step(), 2u);
    EXPECT_EQ(e.coordinate(), 1u);
    EXPECT_NE(std::string(e.what()).find("'q'"), std::string::npos);
  }
}

TEST(Run, InputSizeIsChecked) {
  auto m = MealyMachine::from_expressions(one_port(true), labels({"s"}), {parse_expr("s")}, {parse_expr("i")});
  EXPECT_THROW(step(m, Vec{1, 2}, Vec{0}), MismatchError);
  EXPECT_THROW(run(m, {}, 1, [](std::size_t) { return Vec{1}; }), MismatchError);
}
