#include <gtest/gtest.h>

#include <cmath>

#include "support/fixtures.hpp"
#include "support/laws.hpp"

using namespace dynwire;

namespace {

StockFlowDiagram sir() { return io::load_stockflow(fixtures::model_path("sir.stockflow.json")); }

// dx/dt = r * x through a single inflow.
StockFlowDiagram growth() {
  return StockFlowBuilder()
      .add_stock("x")
      .add_inport("r")
      .add_var("rate", "r * x")
      .add_link(LinkKind::stock, "x", "rate")
      .add_link(LinkKind::in, "r", "rate")
      .add_flow("g", "rate", "", "x")
      .seal();
}

std::vector<std::string> texts(const std::vector<Expr>& es) {
  std::vector<std::string> out;
  for (const auto& e : es) out.push_back(to_string(e));
  return out;
}

}  // namespace

TEST(Vars, FixedPointMatchesTopologicalEvaluation) {
  gen::Rng rng(71);
  for (int k = 0; k < 300; ++k) {
    auto sf = gen::stockflow(rng);
    Vec a = gen::vec(rng, sf.inports().size()), s = gen::vec(rng, sf.stocks().size());
    EXPECT_TRUE(ref::close(var_fixed_point(sf, a, s), ref::topo_vars(sf, a, s), 1e-12));
  }
}

TEST(Vars, ExpansionMatchesNumericValues) {
  gen::Rng rng(72);
  for (int k = 0; k < 100; ++k) {
    auto sf = gen::stockflow(rng);
    auto exprs = expand_vars(sf);
    Signature sig{{Namespace::stock, sf.stocks()}, {Namespace::input, sf.inports()}};
    ExprFun f(sig, sf.vars(), exprs);
    Vec a = gen::vec(rng, sf.inports().size()), s = gen::vec(rng, sf.stocks().size());
    EXPECT_TRUE(ref::close(f.eval({s, a}), var_fixed_point(sf, a, s), 1e-12));
  }
}

TEST(Vars, UnlinkedVariableReadIsCaughtAtRuntime) {
  // Reads without var links, forming a loop: the iteration never settles and
  // the residual check fires.
  auto good = StockFlowBuilder().add_var("a", "1").add_var("b", "1").add_var("c", "1").seal();
  auto p = good.parts();
  p.aux[0] = parse_expr("b + 1");
  p.aux[1] = parse_expr("c + 1");
  p.aux[2] = parse_expr("a + 1");
  StockFlowDiagram bad(p);
  EXPECT_THROW(var_fixed_point(bad, Vec{}, Vec{}), NumericError);
  EXPECT_THROW(to_mealy(bad), ValidationError);
}

TEST(Alpha, SirMatchesHandWrittenEquations) {
  auto m = to_mealy(sir());
  gen::Rng rng(73);
  for (int k = 0; k < 100; ++k) {
    Vec p = gen::vec(rng, 4, 0.01, 3.0), s = gen::vec(rng, 3, 0.1, 1000.0);
    ref::Sir hand{p[0], p[1], p[2], p[3]};
    EXPECT_TRUE(ref::close(m.update(p, s), hand.update(s), 1e-12));
    EXPECT_TRUE(ref::close(m.readout(p, s)[0], hand.readout(s), 1e-12));
  }
}

TEST(Alpha, SirSymbolicEquations) {
  auto m = to_mealy(sir());
  EXPECT_EQ(m.states().labels(), (std::vector<std::string>{"S", "I", "R"}));
  EXPECT_EQ(texts(m.exprs().update), (std::vector<std::string>{
                                         "R*omega - S*(c*beta*(I/(S + I + R)))",
                                         "S*(c*beta*(I/(S + I + R))) - I*tau",
                                         "I*tau - R*omega",
                                     }));
  EXPECT_EQ(texts(m.exprs().readout), (std::vector<std::string>{"S*(c*beta*(I/(S + I + R)))"}));
}

TEST(Alpha, SymbolicAndNumericFormsAgree) {
  gen::Rng rng(74);
  for (int k = 0; k < 150; ++k) {
    auto sf = gen::stockflow(rng);
    auto m = to_mealy(sf);
    auto symbolic = MealyMachine::from_expressions(m.iface(), m.states(), m.exprs().update, m.exprs().readout);
    std::string why;
    EXPECT_TRUE(laws::machines_agree(rng, m, symbolic, 10, 1e-12, why)) << why;
  }
}

TEST(Alpha, CloudFlowsOnlyTouchOneStock) {
  auto sf = StockFlowBuilder()
                .add_stock("a")
                .add_stock("b")
                .add_var("one", "1")
                .add_var("two", "2")
                .add_flow("into_a", "one", "", "a")
                .add_flow("a_to_b", "two", "a", "b")
                .add_flow("out_of_b", "one", "b", "")
                .seal();
  EXPECT_EQ(to_mealy(sf).update(Vec{}, Vec{0, 0}), (Vec{-1, 1}));
}

TEST(Alpha, Naturality) {
  auto r = laws::naturality(75, 100, 50);
  EXPECT_TRUE(r.ok) << r.detail;
}

TEST(Signal, TableIsPiecewiseConstant) {
  auto s = InputSignal::table(FinSet(1), {{0.0, {1}}, {2.0, {5}}});
  EXPECT_EQ(s.at(-1)[0], 1);
  EXPECT_EQ(s.at(1.999)[0], 1);
  EXPECT_EQ(s.at(2.0)[0], 5);
  EXPECT_EQ(s.at(100)[0], 5);
  EXPECT_THROW(InputSignal::table(FinSet(1), {{1.0, {1}}, {1.0, {2}}}), StructureError);
  EXPECT_THROW(InputSignal::table(FinSet(2), {{0.0, {1}}}), MismatchError);
}

TEST(Signal, ExpressionsOfTime) {
  auto s = InputSignal::expressions(FinSet(std::vector<std::string>{"u"}), {parse_expr("2*t + 1")});
  EXPECT_EQ(s.at(3)[0], 7);
  EXPECT_THROW(InputSignal::expressions(FinSet(std::vector<std::string>{"u"}), {parse_expr("x")}), StructureError);
}

TEST(Integrate, StepCountAndFinalShortStep) {
  auto m = to_mealy(growth());
  auto sig = InputSignal::constant(m.ports().inputs, {0.0});
  auto even = integrate(m, {1}, sig, 0, 1, 0.1, Method::euler);
  EXPECT_EQ(even.times.size(), 11u);
  EXPECT_EQ(even.times.back(), 1.0);
  auto uneven = integrate(m, {1}, sig, 0, 1, 0.3, Method::rk4);
  const std::vector<double> want{0, 0.3, 0.6, 0.9, 1.0};
  ASSERT_EQ(uneven.times.size(), want.size());
  for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(uneven.times[k], want[k], 1e-15);
  EXPECT_EQ(uneven.times.back(), 1.0);
  EXPECT_THROW(integrate(m, {1}, sig, 0, 1, 0, Method::euler), MismatchError);
  EXPECT_THROW(integrate(m, {1}, sig, 1, 1, 0.1, Method::euler), MismatchError);
}

TEST(Integrate, ExponentialGrowthAccuracy) {
  auto m = to_mealy(growth());
  auto sig = InputSignal::constant(m.ports().inputs, {0.5});
  const double exact = std::exp(0.5 * 2.0);
  auto rk4 = integrate(m, {1}, sig, 0, 2, 0.01, Method::rk4);
  EXPECT_NEAR(rk4.states.back()[0], exact, 1e-9);
  auto euler = integrate(m, {1}, sig, 0, 2, 0.001, Method::euler);
  EXPECT_NEAR(euler.states.back()[0], exact, 2e-3);
  EXPECT_GT(std::abs(euler.states.back()[0] - exact), 1e-6);
}

TEST(Integrate, TimeVaryingInputIsSampledPerStage) {
  // dx/dt = u(t) = t, so x(2) = 2 exactly under RK4 (quadrature of a line).
  auto sf = StockFlowBuilder()
                .add_stock("x")
                .add_inport("u")
                .add_var("rate", "u")
                .add_link(LinkKind::in, "u", "rate")
                .add_flow("f", "rate", "", "x")
                .seal();
  auto sig = InputSignal::expressions(sf.inports(), {parse_expr("t")});
  auto tr = simulate_sf(sf, {0}, sig, 0, 2, 0.25, Method::rk4);
  EXPECT_NEAR(tr.states.back()[0], 2.0, 1e-12);
}

TEST(Integrate, BlowUpIsReportedWithStep) {
  auto sf = StockFlowBuilder()
                .add_stock("x")
                .add_var("rate", "x*x*x*x")
                .add_link(LinkKind::stock, "x", "rate")
                .add_flow("f", "rate", "", "x")
                .seal();
  try {
    simulate_sf(sf, {10}, InputSignal::constant(FinSet(std::vector<std::string>{}), {}), 0, 10, 0.5, Method::euler);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(e.step(), NumericError::npos);
    EXPECT_EQ(e.coordinate(), 0u);
  }
}

TEST(Integrate, SirPopulationIsConserved) {
  auto s = sir();
  auto m = to_mealy(s);
  auto tr = integrate(m, {990, 10, 0}, InputSignal::constant(s.inports(), {2, 0.5, 0.1, 0.05}), 0, 100, 0.01,
                      Method::rk4);
  ASSERT_EQ(tr.states.size(), 10001u);
  for (const auto& x : tr.states) EXPECT_NEAR(x[0] + x[1] + x[2], 1000.0, 1e-9);
  EXPECT_LE(tr.meta.max_residual, 1e-9);
}

TEST(Integrate, ConvergenceOrders) {
  auto s = sir();
  auto euler = laws::sir_order(s, Method::euler, 10.0, 0.01);
  auto rk4 = laws::sir_order(s, Method::rk4, 10.0, 0.1);
  EXPECT_GE(euler.order, 0.8);
  EXPECT_LE(euler.order, 1.2);
  EXPECT_GE(rk4.order, 3.7);
  EXPECT_LE(rk4.order, 4.3);
}
