#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "support/laws.hpp"

using namespace dynwire;

namespace {

bool has_condition(const ValidationReport& rep, const std::string& c) {
  for (const auto& f : rep.findings)
    if (f.condition == c) return true;
  return false;
}

// One stock feeding an output, one input feeding a variable that is not read
// by any output. Tracing q back into p makes `a` depend on `b`.
StockFlowDiagram delay_loop() {
  return StockFlowBuilder()
      .add_stock("st")
      .add_inport("p")
      .add_outport("q")
      .add_var("a", "p")
      .add_var("b", "3*st")
      .add_link(LinkKind::in, "p", "a")
      .add_link(LinkKind::stock, "st", "b")
      .add_link(LinkKind::out, "b", "q")
      .add_flow("f", "a", "", "st")
      .seal();
}

}  // namespace

TEST(Builder, SirModelIsValid) {
  auto sir = io::load_stockflow(fixtures::model_path("sir.stockflow.json"));
  EXPECT_TRUE(validate_stockflow(sir).pass()) << validate_stockflow(sir).describe();
  EXPECT_EQ(sir.stocks().labels(), (std::vector<std::string>{"S", "I", "R"}));
  EXPECT_EQ(sir.sumvars().labels(), (std::vector<std::string>{"N"}));
  EXPECT_EQ(sir.outports().labels(), (std::vector<std::string>{"infections"}));
}

TEST(Builder, DefaultDependencyIsLinkInduced) {
  auto sf = StockFlowBuilder()
                .add_inport("p")
                .add_outport("q")
                .add_outport("r")
                .add_var("v", "2*p")
                .add_var("w", "v + 1")
                .add_var("z", "4")
                .add_link(LinkKind::in, "p", "v")
                .add_link(LinkKind::var, "v", "w")
                .add_link(LinkKind::out, "w", "q")
                .add_link(LinkKind::out, "z", "r")
                .seal();
  EXPECT_EQ(sf.dependency().pairs(), (std::vector<Relation::Pair>{{0, 0}}));
  EXPECT_TRUE(validate_stockflow(sf).pass());
}

TEST(Builder, DirectInToOutPathCounts) {
  auto sf = StockFlowBuilder()
                .add_inport("p")
                .add_outport("q")
                .add_var("v", "p")
                .add_link(LinkKind::in, "p", "v")
                .add_link(LinkKind::out, "v", "q")
                .set_dependency({})
                .seal();
  auto rep = validate_stockflow(sf);
  EXPECT_TRUE(has_condition(rep, "4")) << rep.describe();
}

TEST(Builder, DanglingNamesAreStructureErrors) {
  EXPECT_THROW(StockFlowBuilder().add_var("v", "1").add_flow("f", "nope").seal(), StructureError);
  EXPECT_THROW(StockFlowBuilder().add_var("v", "1").add_link(LinkKind::stock, "s", "v").seal(), StructureError);
  EXPECT_THROW(StockFlowBuilder().add_var("v", "1").set_dependency({{"p", "q"}}).seal(), StructureError);
  EXPECT_THROW(StockFlowBuilder().add_var("v", "unknown_name").seal(), StructureError);
}

TEST(Validate, VarCycleIsCondition2) {
  auto sf = StockFlowBuilder()
                .add_var("a", "b")
                .add_var("b", "a")
                .add_link(LinkKind::var, "a", "b")
                .add_link(LinkKind::var, "b", "a")
                .seal();
  auto rep = validate_stockflow(sf);
  ASSERT_TRUE(has_condition(rep, "2"));
  EXPECT_NE(rep.describe().find("a -> b"), std::string::npos);
}

TEST(Validate, UnlinkedReadIsAnAuxFinding) {
  auto sf = StockFlowBuilder().add_stock("s").add_var("v", "s").seal();
  auto rep = validate_stockflow(sf);
  ASSERT_TRUE(has_condition(rep, "aux"));
  EXPECT_NE(rep.describe().find("stock 's'"), std::string::npos);
}

TEST(Validate, FlowWithTwoTargetsIsCondition1) {
  auto base = StockFlowBuilder().add_stock("s").add_stock("t").add_var("v", "1").add_flow("f", "v", "", "s").seal();
  auto p = base.parts();
  p.inflow = FinSet(2);
  p.is = FinMap(p.inflow, p.stock, {0, 1});
  p.iflow = FinMap(p.inflow, p.flow, {0, 0});
  auto rep = validate_stockflow(StockFlowDiagram(p));
  EXPECT_TRUE(has_condition(rep, "1"));
}

TEST(Validate, GeneratedDiagramsAreValid) {
  gen::Rng rng(61);
  for (int k = 0; k < 300; ++k) {
    auto sf = gen::stockflow(rng);
    auto rep = validate_stockflow(sf);
    EXPECT_TRUE(rep.pass()) << rep.describe();
  }
}

TEST(Wiring, TraceSubstitutesFeedingVariables) {
  auto sf = delay_loop();
  Interface outer{FinSet(std::vector<std::string>{"y"}), FinSet(std::vector<std::string>{"z"})};
  auto f = WiringDiagram::from_wires(sf.ports(), outer, {{0, 0}}, {{0, 0}}, {{0, 0}});
  auto F = certify_minimal(f, sf.dependency());
  auto out = apply_wiring_sf(F, sf);
  EXPECT_EQ(out.inports().labels(), (std::vector<std::string>{"y"}));
  EXPECT_EQ(to_string(out.aux()[0]), "y + b");
  EXPECT_EQ(span_to_relation(out.parts().var_link).pairs(), (std::vector<Relation::Pair>{{1, 0}}));
  EXPECT_EQ(span_to_relation(out.parts().in_link).pairs(), (std::vector<Relation::Pair>{{0, 0}}));
  EXPECT_EQ(span_to_relation(out.parts().out_link).pairs(), (std::vector<Relation::Pair>{{1, 0}}));
  EXPECT_TRUE(validate_stockflow(out).pass());
}

TEST(Wiring, UnwiredInputReadsZero) {
  auto sf = delay_loop();
  Interface outer{FinSet(std::vector<std::string>{}), FinSet(std::vector<std::string>{})};
  auto F = certify_minimal(WiringDiagram::from_wires(sf.ports(), outer, {}, {}, {}), sf.dependency());
  EXPECT_EQ(to_string(apply_wiring_sf(F, sf).aux()[0]), "0");
}

TEST(Wiring, RejectsInvalidModel) {
  auto sf = StockFlowBuilder().add_stock("s").add_var("v", "s").seal();
  auto F = identity_ddwd(sf.iface());
  EXPECT_THROW(apply_wiring_sf(F, sf), ValidationError);
}

TEST(Wiring, Functoriality) {
  auto r = laws::sf_functoriality(62, 150, 10);
  EXPECT_TRUE(r.ok) << r.detail;
}

TEST(Algebra, PrefixAndParallel) {
  auto sf = delay_loop();
  auto a = with_prefix_sf(sf, "A.");
  EXPECT_EQ(a.vars().labels(), (std::vector<std::string>{"A.a", "A.b"}));
  EXPECT_EQ(to_string(a.aux()[1]), "3*A.st");
  EXPECT_TRUE(validate_stockflow(a).pass());
  auto both = parallel_sf(sf, sf);
  EXPECT_EQ(both.stocks().labels(), (std::vector<std::string>{"left.st", "right.st"}));
  EXPECT_EQ(to_string(both.aux()[3]), "3*right.st");
  EXPECT_EQ(both.parts().fv.targets(), (std::vector<Index>{0, 2}));
  EXPECT_TRUE(validate_stockflow(both).pass()) << validate_stockflow(both).describe();
  EXPECT_TRUE(equivalent_sf(parallel_sf(std::vector<StockFlowDiagram>{sf}), sf));
  EXPECT_EQ(parallel_sf(std::vector<StockFlowDiagram>{}).vars().size(), 0u);
}

TEST(Algebra, EquivalenceNoticesAuxChanges) {
  auto sf = delay_loop();
  EXPECT_TRUE(equivalent_sf(sf, delay_loop()));
  auto p = sf.parts();
  p.aux[1] = parse_expr("2*st");
  EXPECT_FALSE(equivalent_sf(sf, StockFlowDiagram(p)));
}
