#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fairtoll/assignment.hpp"

namespace fairtoll {

struct Reproduction {
    std::string name;
    bool ok = true;
    nlohmann::ordered_json report;
    /// "expected ..., computed ..." lines for every failed claim.
    std::vector<std::string> mismatches;
};

std::vector<std::string> reproduction_names();

/// Runs one of the built-in end-to-end checks. Throws Error for an unknown name.
Reproduction reproduce(std::string_view name, const SolverOptions& options = {});

/// Toll on edge e1 of appendix-g minimizing the equilibrium total cost over [0, 20] in steps of 0.01.
double appendix_g_cost_minimizing_toll(const SolverOptions& options = {});

}  // namespace fairtoll
