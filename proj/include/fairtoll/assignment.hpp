#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fairtoll/network.hpp"

namespace fairtoll {

/// Per-edge tolls in money units, indexed like Network::edges.
struct TollVector {
    std::vector<double> per_edge;

    static TollVector zero(const Scenario& s) { return TollVector{std::vector<double>(s.edge_count(), 0.0)}; }

    double operator[](EdgeIndex e) const { return per_edge.at(e); }
    bool is_zero() const;
};

/// Builds a toll vector from (edge id, toll) pairs; unlisted edges are untolled.
/// Throws DomainError for unknown edges or negative tolls.
TollVector make_tolls(const Scenario& s, const std::vector<std::pair<std::string, double>>& entries);

struct PathFlow {
    Path path;
    double flow = 0.0;
};

/// Path flows per group with the derived per-group and aggregate edge flows.
class FlowPattern {
public:
    FlowPattern() = default;
    /// Merges repeated paths and drops zero entries. Throws DomainError on negative flow or
    /// a path that does not belong to its group.
    FlowPattern(const Scenario& s, std::vector<std::vector<PathFlow>> per_group);

    std::size_t group_count() const { return paths_.size(); }
    const std::vector<PathFlow>& paths(GroupIndex g) const { return paths_.at(g); }
    const std::vector<double>& group_edge_flows(GroupIndex g) const { return group_edge_.at(g); }
    const std::vector<double>& edge_flows() const { return edge_; }
    /// Sum of the group's path flows.
    double group_total(GroupIndex g) const;

private:
    std::vector<std::vector<PathFlow>> paths_;
    std::vector<std::vector<double>> group_edge_;
    std::vector<double> edge_;
};

/// Membership in the feasible set: nonnegative flows summing to each group's demand.
bool is_feasible(const Scenario& s, const FlowPattern& f, double rel_tol = 1e-12);

struct EquilibriumSolution {
    FlowPattern flows;
    std::vector<double> group_cost;  // per-user cost without refunds, money
    std::vector<double> demand;
    double total_cost = 0.0;
    double revenue = 0.0;
    double gap = 0.0;  // relative gap at exit
    std::size_t iterations = 0;
};

struct SolverOptions {
    double tolerance = 1e-12;
    std::size_t max_iterations = 100000;
    /// Pairwise steps move each group's flow from its costliest used path to its all-or-nothing
    /// path, one group at a time; without them the method is the classic joint iteration.
    bool pairwise_steps = true;
    int line_search_steps = 50;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, EquilibriumSolution best)
        : Error(what), best_(std::move(best)) {}

    const EquilibriumSolution& best() const noexcept { return best_; }
    double gap() const noexcept { return best_.gap; }

private:
    EquilibriumSolution best_;
};

double beckmann_potential(const Scenario& s, const TollVector& tolls, const FlowPattern& f);

/// Multi-class exogenous equilibrium by Frank-Wolfe steps with exact bisection line search.
/// Throws ConvergenceError (carrying the last iterate) or DisconnectedError.
EquilibriumSolution solve_exogenous_equilibrium(const Scenario& s, const TollVector& tolls,
                                                const SolverOptions& options = {});

/// Shortest path under edge weight t_e(x_e) + tolls_e / v_g, ties broken by the
/// lexicographically smallest edge-id sequence.
Path group_generalized_shortest_path(const Scenario& s, const TollVector& tolls, GroupIndex g,
                                     std::span<const double> edge_flows);

/// Money cost of a path for group g: sum of v_g t_e(x_e) + toll_e.
double path_cost(const Scenario& s, const TollVector& tolls, std::span<const double> edge_flows,
                 const Path& path);

/// Value-of-time weighted travel time over all users.
double total_system_cost(const Scenario& s, const FlowPattern& f);

double total_revenue(const TollVector& tolls, std::span<const double> edge_flows);

/// Exact equilibrium of a two-node network of parallel affine edges, independent of the
/// iterative solver. Throws UnsupportedError for other topologies or latency shapes.
EquilibriumSolution solve_parallel_affine_closed_form(const Scenario& s, const TollVector& tolls);

struct SystemOptimum {
    FlowPattern flow;
    double cost = 0.0;
    /// Upper bound on cost - C* implied by the grid spacing.
    double lipschitz_bound = 0.0;
    std::size_t evaluated = 0;
};

inline constexpr std::size_t kSystemOptimumPathCap = 6;

/// Exhaustive search over every group's path split at `grid` steps per demand.
/// Throws UnsupportedError when more than kSystemOptimumPathCap paths are involved.
SystemOptimum search_system_optimal(const Scenario& s, std::size_t grid);

}  // namespace fairtoll
