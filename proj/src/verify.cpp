#include "fairtoll/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fairtoll {

double group_cost_under_flow(const Scenario& s, const TollVector& tolls, const FlowPattern& f, GroupIndex g) {
    const auto& paths = f.paths(g);
    const double total = f.group_total(g);
    if (paths.empty() || total <= 0.0)
        return path_cost(s, tolls, f.edge_flows(), group_generalized_shortest_path(s, tolls, g, f.edge_flows()));
    double cost = 0.0;
    for (const auto& pf : paths) cost += pf.flow * path_cost(s, tolls, f.edge_flows(), pf.path);
    return cost / total;
}

ExogenousReport verify_exogenous_equilibrium(const Scenario& s, const TollVector& tolls, const FlowPattern& f,
                                             double tol) {
    ExogenousReport report;
    for (GroupIndex g = 0; g < s.group_count(); ++g) {
        auto set = enumerate_paths(s, g);
        if (set.truncated)
            throw UnsupportedError("path enumeration truncated for group '" + s.groups[g].id + "'");
        GroupGap gg;
        gg.group = s.groups[g].id;
        gg.min_cost = std::numeric_limits<double>::infinity();
        for (const auto& p : set.paths) gg.min_cost = std::min(gg.min_cost, path_cost(s, tolls, f.edge_flows(), p));
        for (const auto& pf : f.paths(g))
            if (pf.flow > 0.0) gg.gap = std::max(gg.gap, path_cost(s, tolls, f.edge_flows(), pf.path) - gg.min_cost);
        gg.pass = gg.gap <= tol * std::max(1.0, gg.min_cost);
        report.pass = report.pass && gg.pass;
        report.groups.push_back(std::move(gg));
    }
    return report;
}

double verify_cost_identity(const EquilibriumSolution& eq) {
    double sum = 0.0;
    for (std::size_t g = 0; g < eq.group_cost.size(); ++g) sum += eq.group_cost[g] * eq.demand[g];
    return std::abs(eq.total_cost - (sum - eq.revenue));
}

namespace {

double binomial(std::size_t n, std::size_t k) {
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
}

// Candidate unit counts per path, each summing to `grid`.
std::vector<std::vector<std::size_t>> candidate_splits(std::size_t paths, std::size_t grid) {
    std::vector<std::vector<std::size_t>> out;
    if (paths == 1) {
        out.push_back({grid});
        return out;
    }
    if (binomial(grid + paths - 1, paths - 1) <= 200000.0) {
        std::vector<std::size_t> cur(paths, 0);
        auto gen = [&](auto&& self, std::size_t i, std::size_t left) -> void {
            if (i + 1 == paths) {
                cur[i] = left;
                out.push_back(cur);
                return;
            }
            for (std::size_t k = 0; k <= left; ++k) {
                cur[i] = k;
                self(self, i + 1, left - k);
            }
        };
        gen(gen, 0, grid);
        return out;
    }
    // Too many paths for the full simplex: pure shifts plus every two-path split.
    for (std::size_t i = 0; i < paths; ++i) {
        std::vector<std::size_t> v(paths, 0);
        v[i] = grid;
        out.push_back(v);
    }
    for (std::size_t i = 0; i < paths; ++i)
        for (std::size_t j = i + 1; j < paths; ++j)
            for (std::size_t k = 1; k < grid; ++k) {
                std::vector<std::size_t> v(paths, 0);
                v[i] = k;
                v[j] = grid - k;
                out.push_back(v);
            }
    return out;
}

std::vector<double> net_costs(const Scenario& s, const TollVector& tolls, const RefundPolicy& policy,
                              const FlowPattern& f) {
    std::vector<double> cost(s.group_count());
    for (GroupIndex g = 0; g < cost.size(); ++g) cost[g] = group_cost_under_flow(s, tolls, f, g);
    const auto r = policy.refunds(cost, total_revenue(tolls, f.edge_flows()));
    for (GroupIndex g = 0; g < cost.size(); ++g) cost[g] -= r.per_group[g];
    return cost;
}

}  // namespace

std::vector<DeviationReport> verify_endogenous_equilibrium(const Scenario& s, const TollVector& tolls,
                                                           const RefundPolicy& policy, const FlowPattern& f,
                                                           std::size_t grid) {
    if (grid < 2) throw DomainError("deviation grid must be at least 2");
    if (!is_feasible(s, f, 1e-9)) throw DomainError("flow pattern is not feasible for the scenario");
    const auto before = net_costs(s, tolls, policy, f);

    std::vector<DeviationReport> reports;
    for (GroupIndex g = 0; g < s.group_count(); ++g) {
        auto set = enumerate_paths(s, g);
        if (set.truncated)
            throw UnsupportedError("path enumeration truncated for group '" + s.groups[g].id + "'");
        if (set.paths.size() < 2) continue;

        std::vector<std::vector<PathFlow>> per_group(s.group_count());
        for (GroupIndex h = 0; h < s.group_count(); ++h)
            if (h != g) per_group[h] = f.paths(h);

        const double d = s.groups[g].demand;
        for (const auto& units : candidate_splits(set.paths.size(), grid)) {
            std::vector<PathFlow> split;
            for (std::size_t i = 0; i < units.size(); ++i)
                if (units[i] > 0)
                    split.push_back(PathFlow{set.paths[i], d * static_cast<double>(units[i]) / static_cast<double>(grid)});
            per_group[g] = split;
            const FlowPattern deviated(s, per_group);
            const auto after = net_costs(s, tolls, policy, deviated);
            const double gain = before[g] - after[g];
            if (gain > kDeviationGainTolerance) {
                reports.push_back(DeviationReport{s.groups[g].id, deviated.paths(g), before[g], after[g], gain, true});
            }
        }
    }
    return reports;
}

}  // namespace fairtoll
