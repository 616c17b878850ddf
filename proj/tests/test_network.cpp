#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "fairtoll/network.hpp"
#include "support/random_scenarios.hpp"

using namespace fairtoll;

namespace {

const char* kTriangle = R"({
  "nodes": ["a", "b", "c"],
  "edges": [
    {"id": "ab", "tail": "a", "head": "b", "a": 1, "b": 1, "p": 1},
    {"id": "bc", "tail": "b", "head": "c", "a": 1, "b": 1, "p": 1},
    {"id": "ac", "tail": "a", "head": "c", "a": "2.5", "b": "0.5", "p": "2"}
  ],
  "groups": [
    {"id": "g", "vot": 1, "income": 10, "demand": 1, "origin": "a", "destination": "c"}
  ],
  "beta": 1
})";

std::string with_replaced(std::string text, const std::string& from, const std::string& to) {
    auto pos = text.find(from);
    EXPECT_NE(pos, std::string::npos) << from;
    text.replace(pos, from.size(), to);
    return text;
}

bool contains_issue(const std::vector<std::string>& issues, const std::string& needle) {
    return std::any_of(issues.begin(), issues.end(),
                       [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

}  // namespace

TEST(LoadScenario, ParallelThreeClassBuiltin) {
    const Scenario s = builtin_scenario("appendix-g");
    ASSERT_EQ(s.network.nodes.size(), 2u);
    ASSERT_EQ(s.edge_count(), 2u);
    EXPECT_EQ(s.network.edges[0].latency(3.0), 6.0);
    EXPECT_EQ(s.network.edges[1].latency(3.0), 7.0);
    ASSERT_EQ(s.group_count(), 3u);
    EXPECT_EQ(s.groups[0].id, "H");
    EXPECT_EQ(s.groups[0].demand, 2.0);
    EXPECT_EQ(s.groups[1].demand, 1.0);
    EXPECT_EQ(s.groups[2].demand, 5.0);
    EXPECT_DOUBLE_EQ(s.groups[2].income, 989.2 / 0.99);
    EXPECT_DOUBLE_EQ(s.groups[2].vot, 0.001 * (989.2 / 0.99));
    EXPECT_EQ(s.beta, 1.0);
}

TEST(LoadScenario, TwoPairBuiltin) {
    const Scenario s = builtin_scenario("appendix-d");
    ASSERT_EQ(s.network.nodes.size(), 4u);
    ASSERT_EQ(s.edge_count(), 3u);
    EXPECT_EQ(s.network.edges[0].latency(1.0), 0.5);
    EXPECT_EQ(s.network.edges[1].latency(0.25), 0.25);
    EXPECT_EQ(s.network.edges[2].latency(7.0), 1.0);
    ASSERT_EQ(s.group_count(), 2u);
    EXPECT_NE(s.groups[0].origin, s.groups[1].origin);
    EXPECT_EQ(s.groups[0].demand, 1.0);
    EXPECT_EQ(s.groups[1].demand, 1.0);
}

TEST(LoadScenario, NegativeDemandNamesTheGroup) {
    const std::string text = with_replaced(kTriangle, R"("demand": 1)", R"("demand": -1)");
    try {
        load_scenario(text);
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_TRUE(contains_issue(e.issues(), "group 'g'"));
        EXPECT_TRUE(contains_issue(e.issues(), "demand"));
    }
}

TEST(LoadScenario, MalformedDocumentReportsLine) {
    const std::string text = "{\n  \"nodes\": [\"a\",\n  ]\n}";
    try {
        load_scenario(text);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.location(), "line 3");
    }
}

TEST(LoadScenario, UnknownKeyReportsField) {
    const std::string text = with_replaced(kTriangle, R"("p": 1})", R"("p": 1, "capacity": 3})");
    try {
        load_scenario(text);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.location(), "edges[0].capacity");
    }
}

TEST(LoadScenario, BadDecimalString) {
    const std::string text = with_replaced(kTriangle, R"("a": "2.5")", R"("a": "2,5")");
    EXPECT_THROW(load_scenario(text), ParseError);
}

TEST(LoadScenario, UnknownNodeReference) {
    const std::string text = with_replaced(kTriangle, R"("destination": "c")", R"("destination": "z")");
    EXPECT_THROW(load_scenario(text), ParseError);
}

TEST(LoadScenario, UnknownBuiltinOrMissingFile) {
    EXPECT_THROW(builtin_scenario("appendix-x"), Error);
    EXPECT_THROW(load_scenario_source("/nonexistent/scenario.json"), Error);
}

TEST(ValidateScenario, BuiltinsAreWellPosed) {
    for (const auto& name : builtin_scenario_names()) EXPECT_TRUE(validate_scenario(builtin_scenario(name)).empty()) << name;
}

TEST(ValidateScenario, UnreachableDestination) {
    Scenario s = load_scenario(kTriangle);
    s.groups[0].origin = 2;
    s.groups[0].destination = 0;
    const auto issues = validate_scenario(s);
    EXPECT_TRUE(contains_issue(issues, "disconnected O-D pair for group 'g'"));
}

TEST(ValidateScenario, ExponentBelowOne) {
    Scenario s = load_scenario(kTriangle);
    s.network.edges[2].latency.exponent = 0.5;
    EXPECT_TRUE(contains_issue(validate_scenario(s), "latency exponent below 1"));
}

TEST(ValidateScenario, SelfLoopDuplicateIdsAndBeta) {
    Scenario s = load_scenario(kTriangle);
    s.network.edges.push_back(Edge{"ab", 1, 1, LatencyFn{1, 0, 1}});
    s.beta = 0.0;
    const auto issues = validate_scenario(s);
    EXPECT_TRUE(contains_issue(issues, "self-loop"));
    EXPECT_TRUE(contains_issue(issues, "duplicate edge id 'ab'"));
    EXPECT_TRUE(contains_issue(issues, "beta must be positive"));
}

TEST(TravelTime, AffineExamples) {
    const Scenario s = builtin_scenario("appendix-g");
    EXPECT_EQ(travel_time(s.network.edges[0], 4.0), 8.0);
    EXPECT_EQ(travel_time(s.network.edges[1], 6.0), 10.0);
    for (const auto& e : s.network.edges) EXPECT_EQ(travel_time(e, 0.0), e.latency.free_flow);
}

TEST(TravelTime, NegativeFlowRejected) {
    const Scenario s = builtin_scenario("appendix-g");
    EXPECT_THROW(travel_time(s.network.edges[0], -1e-9), DomainError);
}

TEST(TravelTime, IntegralMatchesQuadrature) {
    const LatencyFn l{1.5, 0.3, 4.0};
    const double x = 2.7;
    // Composite Simpson rule as an independent check of the closed form.
    const int n = 2000;
    double sum = l(0.0) + l(x);
    for (int i = 1; i < n; ++i) sum += (i % 2 ? 4.0 : 2.0) * l(x * i / n);
    EXPECT_NEAR(l.integral(x), sum * x / (3.0 * n), 1e-9);
}

TEST(TravelTime, MonotoneAndConvexOnRandomEdges) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> flow(0.0, 20.0), unit(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        const Scenario s = fixtures::random_scenario(rng);
        for (const auto& e : s.network.edges) {
            double x1 = flow(rng), x2 = flow(rng);
            if (x1 > x2) std::swap(x1, x2);
            EXPECT_GE(travel_time(e, x2), travel_time(e, x1));
            const double lam = unit(rng);
            const double mid = travel_time(e, lam * x1 + (1 - lam) * x2);
            EXPECT_LE(mid, lam * travel_time(e, x1) + (1 - lam) * travel_time(e, x2) + 1e-12 * (1 + std::abs(mid)));
        }
    }
}

TEST(EnumeratePaths, ParallelEdges) {
    const Scenario s = builtin_scenario("appendix-g");
    for (GroupIndex g = 0; g < s.group_count(); ++g) {
        const auto set = enumerate_paths(s, g);
        ASSERT_EQ(set.paths.size(), 2u);
        EXPECT_FALSE(set.truncated);
        EXPECT_EQ(describe_path(s.network, set.paths[0]), "e1");
        EXPECT_EQ(describe_path(s.network, set.paths[1]), "e2");
    }
}

TEST(EnumeratePaths, TwoPairSecondGroup) {
    const Scenario s = builtin_scenario("appendix-d");
    const auto set = enumerate_paths(s, *s.find_group("L"));
    ASSERT_EQ(set.paths.size(), 2u);
    EXPECT_EQ(describe_path(s.network, set.paths[0]), "e2");
    EXPECT_EQ(describe_path(s.network, set.paths[1]), "e3");
}

TEST(EnumeratePaths, OriginEqualsDestination) {
    Scenario s = load_scenario(kTriangle);
    s.groups[0].destination = s.groups[0].origin;
    EXPECT_THROW(enumerate_paths(s, 0), DomainError);
}

TEST(EnumeratePaths, LexicographicOrderAndCap) {
    const Scenario s = load_scenario(kTriangle);
    const auto all = enumerate_paths(s, 0);
    ASSERT_EQ(all.paths.size(), 2u);
    EXPECT_EQ(describe_path(s.network, all.paths[0]), "ab>bc");
    EXPECT_EQ(describe_path(s.network, all.paths[1]), "ac");
    const auto capped = enumerate_paths(s, 0, 1);
    EXPECT_EQ(capped.paths.size(), 1u);
    EXPECT_TRUE(capped.truncated);
}

TEST(EnumeratePaths, DeterministicSimpleAndUnique) {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 100; ++k) {
        const Scenario s = fixtures::random_scenario(rng);
        for (GroupIndex g = 0; g < s.group_count(); ++g) {
            const auto a = enumerate_paths(s, g);
            const auto b = enumerate_paths(s, g);
            ASSERT_EQ(a.paths.size(), b.paths.size());
            std::set<std::string> seen;
            for (std::size_t i = 0; i < a.paths.size(); ++i) {
                EXPECT_EQ(a.paths[i], b.paths[i]);
                EXPECT_TRUE(is_simple_od_path(s, a.paths[i]));
                EXPECT_TRUE(seen.insert(describe_path(s.network, a.paths[i])).second);
                if (i > 0) {
                    EXPECT_TRUE(path_less(s.network, a.paths[i - 1], a.paths[i]));
                }
            }
        }
    }
}

TEST(PathText, RoundTrip) {
    const Scenario s = load_scenario(kTriangle);
    const Path p = parse_path(s, 0, "ab>bc");
    EXPECT_EQ(describe_path(s.network, p), "ab>bc");
    EXPECT_THROW(parse_path(s, 0, "ab>zz"), ParseError);
    EXPECT_THROW(parse_path(s, 0, "bc"), ParseError);
}

TEST(Interchange, RoundTripIsExact) {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 100; ++k) {
        const Scenario s = fixtures::random_scenario(rng);
        const Scenario t = load_scenario(save_scenario(s));
        ASSERT_EQ(t.network.nodes, s.network.nodes);
        ASSERT_EQ(t.edge_count(), s.edge_count());
        for (EdgeIndex e = 0; e < s.edge_count(); ++e) {
            const auto& a = s.network.edges[e];
            const auto& b = t.network.edges[e];
            EXPECT_EQ(a.id, b.id);
            EXPECT_EQ(a.tail, b.tail);
            EXPECT_EQ(a.head, b.head);
            EXPECT_EQ(a.latency.free_flow, b.latency.free_flow);
            EXPECT_EQ(a.latency.coeff, b.latency.coeff);
            EXPECT_EQ(a.latency.exponent, b.latency.exponent);
        }
        ASSERT_EQ(t.group_count(), s.group_count());
        for (GroupIndex g = 0; g < s.group_count(); ++g) {
            EXPECT_EQ(s.groups[g].id, t.groups[g].id);
            EXPECT_EQ(s.groups[g].vot, t.groups[g].vot);
            EXPECT_EQ(s.groups[g].income, t.groups[g].income);
            EXPECT_EQ(s.groups[g].demand, t.groups[g].demand);
            EXPECT_EQ(s.groups[g].origin, t.groups[g].origin);
            EXPECT_EQ(s.groups[g].destination, t.groups[g].destination);
        }
        EXPECT_EQ(s.beta, t.beta);
        EXPECT_EQ(save_scenario(t), save_scenario(s));
    }
}
