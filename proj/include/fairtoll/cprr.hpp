#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairtoll/assignment.hpp"
#include "fairtoll/inequality.hpp"

namespace fairtoll {

/// Per-user transfer c_g by which a group beats its untolled cost.
struct TransferVector {
    std::vector<double> per_group;
};

/// Per-user refund r_g.
struct RefundVector {
    std::vector<double> per_group;
};

struct CprrScheme {
    TollVector tolls;
    RefundVector refunds;
    TransferVector transfers;
    std::optional<std::vector<double>> alphas;
};

/// r_g = mu_g(tau) - mu_g(0) + alpha_g / d_g * (C_0 - C_tau). Empty `alpha` means weights
/// proportional to demand. Throws Error("tolls do not reduce total cost") when C_tau > C_0.
RefundVector pareto_refund(const EquilibriumSolution& tolled, const EquilibriumSolution& untolled,
                           std::span<const double> alpha = {});

/// Water-filling: the poorest pooled groups are raised together until they reach the next
/// income level or the budget runs out.
TransferVector max_min_transfers(std::span<const double> incomes, std::span<const double> demands, double budget);

/// r_g = mu_g(tau) - mu_g(0) + c_g. Throws Error when sum c_g d_g misses C_0 - C_tau by more than
/// 1e-6 relative.
RefundVector transfers_to_refunds(const EquilibriumSolution& tolled, const EquilibriumSolution& untolled,
                                  const TransferVector& transfers);

/// |sum r_g d_g - revenue|.
double refund_budget_residual(const EquilibriumSolution& tolled, const RefundVector& refunds);

struct FavorabilityReport {
    bool ok = true;
    /// mu_g(0) - (mu_g(tau) - r_g); negative for violating groups.
    std::vector<double> slack;
    std::vector<std::size_t> violating;
};

FavorabilityReport check_user_favorable(const EquilibriumSolution& tolled, const RefundVector& refunds,
                                        const EquilibriumSolution& untolled, double tol = 1e-9);

/// Grid search over every split of `budget` into `grid` equal money units; returns the split
/// minimizing the Gini of income + transfer. At most three groups.
TransferVector brute_force_min_gini_transfers(std::span<const double> incomes, std::span<const double> demands,
                                              double budget, std::size_t grid);

/// Gini change bound for moving every group's transfer total by one grid unit.
double transfer_grid_gini_bound(std::span<const double> incomes, std::span<const double> demands, double budget,
                                std::size_t grid);

/// Untolled reference used by refund policies.
struct UntolledBaseline {
    std::vector<double> cost;           // mu_g(0)
    std::vector<double> ex_post_income; // q0_g - beta * mu_g(0)
    std::vector<double> demand;
    double beta = 1.0;
    double total_cost = 0.0;            // C_0
};

UntolledBaseline make_baseline(const Scenario& s, const EquilibriumSolution& untolled);

enum class PolicyKind { MaxMin, Proportional, CustomAlpha };

/// Refunds as a pure function of per-group costs and revenue, relative to the untolled
/// baseline. The surplus Pi - sum (mu_g - mu0_g) d_g is distributed by water-filling,
/// by demand share, or by explicit weights. A negative surplus is charged per user uniformly.
class RefundPolicy {
public:
    RefundPolicy(PolicyKind kind, UntolledBaseline baseline, std::vector<double> alphas = {});

    PolicyKind kind() const { return kind_; }
    const UntolledBaseline& baseline() const { return baseline_; }
    const std::vector<double>& alphas() const { return alphas_; }

    double surplus(std::span<const double> group_cost, double revenue) const;
    TransferVector transfers(std::span<const double> group_cost, double revenue) const;
    RefundVector refunds(std::span<const double> group_cost, double revenue) const;

private:
    PolicyKind kind_;
    UntolledBaseline baseline_;
    std::vector<double> alphas_;
};

std::string policy_name(PolicyKind kind);

struct PipelineResult {
    CprrScheme scheme;
    EquilibriumSolution untolled;
    EquilibriumSolution tolled;
    IncomeDistribution ex_ante;
    IncomeDistribution ex_post_untolled;
    IncomeDistribution ex_post;
    double gini_ex_ante = 0.0;
    double gini_before = 0.0;  // ex-post, untolled
    double gini_after = 0.0;   // ex-post, tolled with refunds
};

/// Solves both equilibria, water-fills the surplus C_0 - C_tau over the untolled ex-post
/// incomes and converts the transfers into refunds.
PipelineResult optimal_cprr_pipeline(const Scenario& s, const TollVector& tolls, const SolverOptions& options = {});

/// Same as above with a precomputed untolled equilibrium.
PipelineResult optimal_cprr_pipeline(const Scenario& s, const TollVector& tolls, const EquilibriumSolution& untolled,
                                     const SolverOptions& options = {});

}  // namespace fairtoll
