#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fairtoll/verify.hpp"
#include "support/random_scenarios.hpp"

using namespace fairtoll;

namespace {

PathFlow on(EdgeIndex e, GroupIndex g, double flow) { return PathFlow{Path{{e}, g}, flow}; }

// Three-class instance under a toll of 8 on e1, with the middle group moved onto e1.
FlowPattern middle_on_tolled_edge(const Scenario& s) {
    return FlowPattern(s, {{on(0, 0, 2.0)}, {on(0, 1, 1.0)}, {on(1, 2, 5.0)}});
}

const char* kSingleEdge = R"({
  "nodes": ["s", "t"],
  "edges": [{"id": "only", "tail": "s", "head": "t", "a": 1, "b": 1, "p": 1}],
  "groups": [
    {"id": "A", "vot": 1, "income": 10, "demand": 1, "origin": "s", "destination": "t"},
    {"id": "B", "vot": 2, "income": 20, "demand": 1, "origin": "s", "destination": "t"}
  ],
  "beta": 1
})";

}  // namespace

TEST(GroupCost, HandComputedDeviationFlow) {
    const Scenario s = builtin_scenario("appendix-g");
    const TollVector tolls = make_tolls(s, {{"e1", 8.0}});
    const FlowPattern f = middle_on_tolled_edge(s);
    EXPECT_NEAR(group_cost_under_flow(s, tolls, f, 0), 20.0, 1e-12);
    EXPECT_NEAR(group_cost_under_flow(s, tolls, f, 1), 14.0, 1e-12);
}

TEST(GroupCost, SplitGroupIsDemandWeighted) {
    const Scenario s = builtin_scenario("appendix-g");
    const TollVector tolls = TollVector::zero(s);
    // x1 = 3, x2 = 5: t1 = 6, t2 = 9.
    const FlowPattern f(s, {{on(0, 0, 1.0), on(1, 0, 1.0)}, {on(0, 1, 1.0)}, {on(0, 2, 1.0), on(1, 2, 4.0)}});
    EXPECT_NEAR(group_cost_under_flow(s, tolls, f, 0), 2.0 * 7.5, 1e-12);
    EXPECT_NEAR(group_cost_under_flow(s, tolls, f, 1), 6.0, 1e-12);
}

TEST(VerifyExogenous, SolvedFlowPasses) {
    const Scenario s = builtin_scenario("appendix-g");
    const TollVector tolls = make_tolls(s, {{"e1", 8.0}});
    const auto eq = solve_exogenous_equilibrium(s, tolls);
    const auto report = verify_exogenous_equilibrium(s, tolls, eq.flows);
    EXPECT_TRUE(report.pass);
    ASSERT_EQ(report.groups.size(), 3u);
    EXPECT_EQ(report.groups[0].group, "H");
    EXPECT_NEAR(report.groups[0].min_cost, 16.0, 1e-9);
    EXPECT_NEAR(report.groups[1].min_cost, 10.0, 1e-9);
}

TEST(VerifyExogenous, OverloadedTolledEdgeFails) {
    const Scenario s = builtin_scenario("appendix-g");
    const TollVector tolls = make_tolls(s, {{"e1", 8.0}});
    // x1 = 4: both edges take 8 time units, so the toll makes e1 strictly worse.
    const FlowPattern f(s, {{on(0, 0, 2.0)}, {on(0, 1, 1.0)}, {on(0, 2, 1.0), on(1, 2, 4.0)}});
    const auto report = verify_exogenous_equilibrium(s, tolls, f);
    EXPECT_FALSE(report.pass);
    EXPECT_NEAR(report.groups[0].gap, 8.0, 1e-12);
    EXPECT_FALSE(report.groups[0].pass);
    EXPECT_NEAR(report.groups[2].gap, 8.0, 1e-12);
}

TEST(VerifyExogenous, UntolledSolutionPasses) {
    const Scenario s = builtin_scenario("appendix-d");
    const TollVector tolls = TollVector::zero(s);
    const auto eq = solve_exogenous_equilibrium(s, tolls);
    EXPECT_TRUE(verify_exogenous_equilibrium(s, tolls, eq.flows).pass);
}

TEST(CostIdentity, ResidualOfSolvedAndCorruptedSolutions) {
    const Scenario s = builtin_scenario("appendix-g");
    auto eq = solve_exogenous_equilibrium(s, make_tolls(s, {{"e1", 8.0}}));
    EXPECT_LE(verify_cost_identity(eq), 1e-9);
    eq.total_cost += 1.0;
    EXPECT_NEAR(verify_cost_identity(eq), 1.0, 1e-9);
}

TEST(Endogenous, MiddleGroupGainsByMovingToTolledEdge) {
    const Scenario s = builtin_scenario("appendix-g");
    const TollVector tolls = make_tolls(s, {{"e1", 8.0}});
    const auto untolled = solve_exogenous_equilibrium(s, TollVector::zero(s));
    const auto eq = solve_exogenous_equilibrium(s, tolls);
    const RefundPolicy policy(PolicyKind::MaxMin, make_baseline(s, untolled));
    const auto deviations = verify_endogenous_equilibrium(s, tolls, policy, eq.flows);
    ASSERT_FALSE(deviations.empty());
    const auto shift = std::find_if(deviations.begin(), deviations.end(), [](const DeviationReport& d) {
        return d.group == "M" && d.split.size() == 1 && d.split[0].path.edges == std::vector<EdgeIndex>{0};
    });
    ASSERT_NE(shift, deviations.end());
    EXPECT_GT(shift->gain, 0.1);
    EXPECT_LT(shift->gain, 0.2);
    EXPECT_NEAR(shift->gain, 0.165993, 1e-5);
    EXPECT_NEAR(shift->cost_before, 8.0, 1e-9);
    for (const auto& d : deviations) {
        EXPECT_TRUE(d.profitable);
        EXPECT_GT(d.gain, kDeviationGainTolerance);
        EXPECT_NEAR(d.gain, d.cost_before - d.cost_after, 1e-12);
    }
}

TEST(Endogenous, SinglePathHasNoDeviation) {
    const Scenario s = load_scenario(kSingleEdge);
    const TollVector tolls = TollVector::zero(s);
    const auto eq = solve_exogenous_equilibrium(s, tolls);
    const RefundPolicy policy(PolicyKind::MaxMin, make_baseline(s, eq));
    EXPECT_TRUE(verify_endogenous_equilibrium(s, tolls, policy, eq.flows).empty());
}

TEST(Endogenous, RejectsInfeasibleFlow) {
    const Scenario s = builtin_scenario("appendix-g");
    const auto untolled = solve_exogenous_equilibrium(s, TollVector::zero(s));
    const RefundPolicy policy(PolicyKind::MaxMin, make_baseline(s, untolled));
    const FlowPattern f(s, {{on(0, 0, 1.0)}, {on(0, 1, 1.0)}, {on(1, 2, 5.0)}});
    EXPECT_THROW(verify_endogenous_equilibrium(s, TollVector::zero(s), policy, f), Error);
}

TEST(Endogenous, CostMinimizingTollIsStableAndExogenous) {
    const Scenario s = builtin_scenario("appendix-g");
    const TollVector tolls = make_tolls(s, {{"e1", 4.0}});
    const auto untolled = solve_exogenous_equilibrium(s, TollVector::zero(s));
    const auto eq = solve_exogenous_equilibrium(s, tolls);
    const RefundPolicy policy(PolicyKind::MaxMin, make_baseline(s, untolled));
    EXPECT_TRUE(verify_endogenous_equilibrium(s, tolls, policy, eq.flows).empty());
    EXPECT_TRUE(verify_exogenous_equilibrium(s, tolls, eq.flows).pass);
}

TEST(Endogenous, TransfersGrowWithSurplus) {
    const Scenario s = builtin_scenario("appendix-g");
    const auto untolled = solve_exogenous_equilibrium(s, TollVector::zero(s));
    const RefundPolicy policy(PolicyKind::MaxMin, make_baseline(s, untolled));
    std::vector<double> previous(3, -1.0);
    for (int step = 0; step <= 40; ++step) {
        const double revenue = 0.5 * step;
        const auto c = policy.transfers(untolled.group_cost, revenue).per_group;
        for (std::size_t g = 0; g < 3; ++g) EXPECT_GE(c[g], previous[g] - 1e-12);
        previous = c;
    }
}

TEST(VerifyProperties, SolvedFlowsPassOnRandomScenarios) {
    std::mt19937_64 rng(53);
    for (int k = 0; k < 100; ++k) {
        const Scenario s = fixtures::random_scenario(rng);
        const TollVector tolls = fixtures::random_tolls(rng, s);
        const auto eq = solve_exogenous_equilibrium(s, tolls);
        EXPECT_TRUE(verify_exogenous_equilibrium(s, tolls, eq.flows).pass) << "instance " << k;
        EXPECT_LE(verify_cost_identity(eq), 1e-8 * std::max(1.0, eq.total_cost));
    }
}

TEST(VerifyProperties, NoDeviationImpliesExogenousEquilibrium) {
    std::mt19937_64 rng(59);
    fixtures::RandomShape shape;
    shape.max_edges = 4;
    shape.max_groups = 3;
    int stable = 0;
    for (int k = 0; k < 30; ++k) {
        Scenario s = fixtures::random_scenario(rng, shape);
        const auto untolled = solve_exogenous_equilibrium(s, TollVector::zero(s));
        fixtures::fit_beta(s, untolled.group_cost);
        const RefundPolicy policy(PolicyKind::MaxMin, make_baseline(s, untolled));
        const TollVector tolls = fixtures::random_tolls(rng, s, 1.0);
        const auto eq = solve_exogenous_equilibrium(s, tolls);
        if (eq.total_cost > untolled.total_cost) continue;
        if (!verify_endogenous_equilibrium(s, tolls, policy, eq.flows, 20).empty()) continue;
        ++stable;
        EXPECT_TRUE(verify_exogenous_equilibrium(s, tolls, eq.flows).pass);
    }
    EXPECT_GT(stable, 0);
}
