#include "fairtoll/reproduce.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fairtoll/cprr.hpp"
#include "fairtoll/inequality.hpp"
#include "fairtoll/verify.hpp"
#include "report.hpp"

namespace fairtoll {

namespace {

using detail::Json;

class Claims {
public:
    explicit Claims(Reproduction& r) : r_(r) {}

    void check(bool ok, const std::string& claim, const std::string& expected, double computed) {
        if (ok) return;
        std::ostringstream os;
        os.precision(12);
        os << claim << ": expected " << expected << ", computed " << computed;
        r_.ok = false;
        r_.mismatches.push_back(os.str());
    }

private:
    Reproduction& r_;
};

std::string num(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

Reproduction prop1(const SolverOptions& options) {
    Reproduction r{"prop1", true, Json::object(), {}};
    Claims claims(r);
    const Scenario s = builtin_scenario("appendix-g");
    const auto untolled = solve_exogenous_equilibrium(s, TollVector::zero(s), options);

    Json cases = Json::array();
    for (double toll : {8.0, 0.0}) {
        const TollVector tolls = make_tolls(s, {{"e1", toll}});
        const auto tolled = tolls.is_zero() ? untolled : solve_exogenous_equilibrium(s, tolls, options);
        const auto refunds = pareto_refund(tolled, untolled);
        const auto favorable = check_user_favorable(tolled, refunds, untolled);

        std::vector<double> net(s.group_count());
        for (GroupIndex g = 0; g < net.size(); ++g) net[g] = tolled.group_cost[g] - refunds.per_group[g];
        const auto after = ex_post_income(s, net);
        const auto before = ex_post_income(s, untolled.group_cost);

        double total_demand = 0.0;
        for (const auto& g : s.groups) total_demand += g.demand;
        const double lambda = s.beta * (untolled.total_cost - tolled.total_cost) / total_demand;
        double spread = 0.0;
        for (GroupIndex g = 0; g < net.size(); ++g)
            spread = std::max(spread, std::abs(after.income[g] - before.income[g] - lambda));

        const double w_before = gini(before);
        const double w_after = gini(after);
        claims.check(favorable.ok, "user-favorable refunds at toll " + num(toll), "true", 0.0);
        claims.check(spread <= 1e-8 * std::max(1.0, lambda), "constant income shift at toll " + num(toll),
                     "deviation <= 1e-8", spread);
        claims.check(lambda >= -1e-12, "nonnegative income shift at toll " + num(toll), ">= 0", lambda);
        claims.check(w_after <= w_before + 1e-12, "gini does not increase at toll " + num(toll), "<= " + num(w_before),
                     w_after);
        cases.push_back(Json{{"toll_e1", toll},
                             {"refunds", detail::per_group_json(s, refunds.per_group)},
                             {"income_shift", lambda},
                             {"gini_before", w_before},
                             {"gini_after", w_after}});
    }
    r.report = Json{{"scenario", "appendix-g"}, {"policy", "proportional"}, {"cases", cases}};
    return r;
}

Reproduction prop2(const SolverOptions& options) {
    Reproduction r{"prop2", true, Json::object(), {}};
    Claims claims(r);
    const Scenario s = builtin_scenario("appendix-d");
    const auto untolled = solve_exogenous_equilibrium(s, TollVector::zero(s), options);
    const auto ex_ante = ex_ante_distribution(s);
    const double w_ante = gini(ex_ante);
    const auto base = ex_post_income(s, untolled.group_cost);

    constexpr int kSteps = 21;
    constexpr int kSplits = 100;
    std::size_t evaluated = 0, skipped = 0, schemes = 0;
    double min_gini = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kSteps; ++i) {
        for (int j = 0; j < kSteps; ++j) {
            const double t2 = 2.0 * i / (kSteps - 1), t3 = 2.0 * j / (kSteps - 1);
            const TollVector tolls = make_tolls(s, {{"e2", t2}, {"e3", t3}});
            const auto tolled = solve_exogenous_equilibrium(s, tolls, options);
            ++evaluated;
            const double budget = untolled.total_cost - tolled.total_cost;
            if (budget < -1e-9) {
                ++skipped;
                continue;
            }
            // Every user-favorable scheme leaves each group at its untolled cost minus a
            // nonnegative transfer, with transfers exhausting the surplus.
            for (int k = 0; k <= kSplits; ++k) {
                IncomeDistribution q = base;
                const double share = std::max(0.0, budget) * k / kSplits;
                q.income[0] += s.beta * share / s.groups[0].demand;
                q.income[1] += s.beta * (std::max(0.0, budget) - share) / s.groups[1].demand;
                min_gini = std::min(min_gini, gini(q));
                ++schemes;
            }
        }
    }
    claims.check(min_gini > w_ante, "ex-post gini exceeds ex-ante gini over the toll grid", "> " + num(w_ante), min_gini);
    r.report = Json{{"scenario", "appendix-d"},
                    {"toll_grid", "e2,e3 in [0,2], 21x21"},
                    {"tolls_evaluated", evaluated},
                    {"tolls_skipped_cost_increase", skipped},
                    {"schemes_evaluated", schemes},
                    {"gini_ex_ante", w_ante},
                    {"gini_ex_post_untolled", gini(base)},
                    {"min_gini_ex_post", min_gini}};
    return r;
}

Reproduction prop4(const SolverOptions& options) {
    Reproduction r{"prop4", true, Json::object(), {}};
    Claims claims(r);
    const Scenario s = builtin_scenario("appendix-g");
    const auto untolled = solve_exogenous_equilibrium(s, TollVector::zero(s), options);
    const TollVector tolls = make_tolls(s, {{"e1", 8.0}});
    const auto tolled = solve_exogenous_equilibrium(s, tolls, options);
    const RefundPolicy policy(PolicyKind::MaxMin, make_baseline(s, untolled));
    const auto exo = verify_exogenous_equilibrium(s, tolls, tolled.flows);
    const auto deviations = verify_endogenous_equilibrium(s, tolls, policy, tolled.flows);

    const DeviationReport* shift = nullptr;
    for (const auto& d : deviations)
        if (d.group == "M" && d.split.size() == 1 && describe_path(s.network, d.split[0].path) == "e1") shift = &d;
    claims.check(exo.pass, "tolled flow is an exogenous equilibrium", "pass", 0.0);
    claims.check(shift != nullptr, "group M shifting to e1 is profitable", "deviation reported", 0.0);
    if (shift) claims.check(shift->gain > 0.1 && shift->gain < 0.2, "gain of the M shift", "in (0.1, 0.2)", shift->gain);

    Json devs = Json::array();
    for (const auto& d : deviations) devs.push_back(detail::deviation_json(s, d));
    r.report = Json{{"scenario", "appendix-g"},
                    {"tolls", detail::tolls_json(s, tolls)},
                    {"policy", "maxmin"},
                    {"exogenous_pass", exo.pass},
                    {"profitable_deviations", deviations.size()},
                    {"group_m_shift_gain", shift ? Json(shift->gain) : Json(nullptr)},
                    {"deviations", devs}};
    return r;
}

Reproduction cor1(const SolverOptions& options) {
    Reproduction r{"cor1", true, Json::object(), {}};
    Claims claims(r);
    const Scenario s = builtin_scenario("appendix-g");
    const auto result = optimal_cprr_pipeline(s, make_tolls(s, {{"e1", 8.0}}), options);
    const double diff = std::abs(result.gini_before - result.gini_ex_ante);
    claims.check(diff <= 1e-12, "untolled ex-post gini equals ex-ante gini", num(result.gini_ex_ante), result.gini_before);
    claims.check(result.gini_after <= std::min(result.gini_before, result.gini_ex_ante) + 1e-12,
                 "pipeline gini does not exceed either reference", "<= " + num(std::min(result.gini_before, result.gini_ex_ante)),
                 result.gini_after);
    r.report = Json{{"scenario", "appendix-g"},
                    {"gini_ex_ante", result.gini_ex_ante},
                    {"gini_ex_post_untolled", result.gini_before},
                    {"gini_after", result.gini_after},
                    {"difference", diff}};
    return r;
}

Reproduction lemma3(const SolverOptions& options) {
    Reproduction r{"lemma3", true, Json::object(), {}};
    Claims claims(r);
    const Scenario s = builtin_scenario("appendix-g");
    const auto untolled = solve_exogenous_equilibrium(s, TollVector::zero(s), options);

    struct Point {
        double toll, cost, gini_after;
    };
    std::vector<Point> points;
    constexpr int kValues = 50;
    for (int k = 0; k < kValues; ++k) {
        const double toll = 20.0 * k / (kValues - 1);
        const TollVector tolls = make_tolls(s, {{"e1", toll}});
        const auto tolled = tolls.is_zero() ? untolled : solve_exogenous_equilibrium(s, tolls, options);
        if (tolled.total_cost > untolled.total_cost) continue;
        const auto result = optimal_cprr_pipeline(s, tolls, untolled, options);
        points.push_back({toll, result.tolled.total_cost, result.gini_after});
    }
    std::sort(points.begin(), points.end(), [](const Point& a, const Point& b) { return a.cost < b.cost; });
    double worst = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i)
        worst = std::max(worst, points[i - 1].gini_after - points[i].gini_after);
    claims.check(worst <= 1e-9, "gini after refunds is monotone in total cost", "violation <= 1e-9", worst);

    Json sweep = Json::array();
    for (const auto& p : points) sweep.push_back(Json{{"toll_e1", p.toll}, {"total_cost", p.cost}, {"gini_after", p.gini_after}});
    r.report = Json{{"scenario", "appendix-g"}, {"tolls_kept", points.size()}, {"max_violation", worst}, {"sweep", sweep}};
    return r;
}

Reproduction lemma4(const SolverOptions& options) {
    Reproduction r{"lemma4", true, Json::object(), {}};
    Claims claims(r);
    const Scenario s = builtin_scenario("appendix-g");
    const double toll = appendix_g_cost_minimizing_toll(options);
    const auto untolled = solve_exogenous_equilibrium(s, TollVector::zero(s), options);
    const TollVector tolls = make_tolls(s, {{"e1", toll}});
    const auto tolled = solve_exogenous_equilibrium(s, tolls, options);
    const RefundPolicy policy(PolicyKind::MaxMin, make_baseline(s, untolled));
    const auto deviations = verify_endogenous_equilibrium(s, tolls, policy, tolled.flows);
    claims.check(deviations.empty(), "no profitable deviation at the cost-minimizing toll", "0 deviations",
                 static_cast<double>(deviations.size()));
    r.report = Json{{"scenario", "appendix-g"},
                    {"toll_e1", toll},
                    {"total_cost", tolled.total_cost},
                    {"profitable_deviations", deviations.size()}};
    return r;
}

}  // namespace

double appendix_g_cost_minimizing_toll(const SolverOptions& options) {
    const Scenario s = builtin_scenario("appendix-g");
    double best_toll = 0.0, best_cost = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 2000; ++k) {
        const double toll = k / 100.0;
        const auto eq = solve_exogenous_equilibrium(s, make_tolls(s, {{"e1", toll}}), options);
        if (eq.total_cost < best_cost) {
            best_cost = eq.total_cost;
            best_toll = toll;
        }
    }
    return best_toll;
}

std::vector<std::string> reproduction_names() { return {"prop1", "prop2", "prop4", "cor1", "lemma3", "lemma4"}; }

Reproduction reproduce(std::string_view name, const SolverOptions& options) {
    if (name == "prop1") return prop1(options);
    if (name == "prop2") return prop2(options);
    if (name == "prop4") return prop4(options);
    if (name == "cor1") return cor1(options);
    if (name == "lemma3") return lemma3(options);
    if (name == "lemma4") return lemma4(options);
    throw Error("unknown reproduction '" + std::string(name) + "'");
}

}  // namespace fairtoll
