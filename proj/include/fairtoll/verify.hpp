#pragma once

#include <string>
#include <vector>

#include "fairtoll/assignment.hpp"
#include "fairtoll/cprr.hpp"

namespace fairtoll {

/// Demand-weighted average cost of the group's used paths; the group's shortest-path cost
/// when it carries no flow.
double group_cost_under_flow(const Scenario& s, const TollVector& tolls, const FlowPattern& f, GroupIndex g);

struct GroupGap {
    std::string group;
    double min_cost = 0.0;
    double gap = 0.0;  // max over used paths of (path cost - min path cost)
    bool pass = true;
};

struct ExogenousReport {
    bool pass = true;
    std::vector<GroupGap> groups;
};

/// Throws UnsupportedError when a group's path enumeration is truncated.
ExogenousReport verify_exogenous_equilibrium(const Scenario& s, const TollVector& tolls, const FlowPattern& f,
                                             double tol = 1e-6);

/// |C - (sum mu_g d_g - Pi)|.
double verify_cost_identity(const EquilibriumSolution& eq);

struct DeviationReport {
    std::string group;
    std::vector<PathFlow> split;
    double cost_before = 0.0;  // per user, net of refund
    double cost_after = 0.0;
    double gain = 0.0;
    bool profitable = false;
};

inline constexpr double kDeviationGainTolerance = 1e-9;
inline constexpr std::size_t kDefaultDeviationGrid = 100;

/// Every reassignment of one group's demand over its paths (pure shifts plus grid splits),
/// others fixed, whose per-user gain after recomputed refunds exceeds the tolerance.
std::vector<DeviationReport> verify_endogenous_equilibrium(const Scenario& s, const TollVector& tolls,
                                                           const RefundPolicy& policy, const FlowPattern& f,
                                                           std::size_t grid = kDefaultDeviationGrid);

}  // namespace fairtoll
