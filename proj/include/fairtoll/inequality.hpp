#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fairtoll/network.hpp"

namespace fairtoll {

/// Per-group incomes with demand weights. `ids` may be empty for anonymous distributions.
struct IncomeDistribution {
    std::vector<double> income;
    std::vector<double> demand;
    std::vector<std::string> ids;

    std::size_t size() const { return income.size(); }
};

/// Throws DomainError for mismatched sizes or non-positive weights.
IncomeDistribution make_distribution(std::vector<double> income, std::vector<double> demand,
                                     std::vector<std::string> ids = {});

IncomeDistribution ex_ante_distribution(const Scenario& s);

double mean_income(const IncomeDistribution& q);

/// Discrete Gini over ordered group pairs. Throws DomainError for a non-positive income.
double gini(const IncomeDistribution& q);

/// q_g = q0_g - beta * cost_g. Throws DomainError("beta too large for scenario") if any
/// income would be non-positive.
IncomeDistribution ex_post_income(const Scenario& s, std::span<const double> costs_with_refund);

struct AxiomReport {
    std::size_t samples = 0;
    std::size_t scale_failures = 0;
    std::size_t regressive_failures = 0;
    std::size_t progressive_failures = 0;
    std::size_t constant_transfer_failures = 0;
    std::vector<std::string> notes;

    bool ok() const {
        return scale_failures + regressive_failures + progressive_failures + constant_transfer_failures == 0;
    }
};

/// Randomized checks of scale independence, multiplier directions and constant transfers
/// around `q`.
AxiomReport check_inequality_axioms(const IncomeDistribution& q, std::size_t samples, std::uint64_t seed = 1);

}  // namespace fairtoll
