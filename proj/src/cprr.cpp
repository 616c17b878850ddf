#include "fairtoll/cprr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fairtoll {

namespace {

void check_pair(const EquilibriumSolution& tolled, const EquilibriumSolution& untolled) {
    if (tolled.group_cost.size() != untolled.group_cost.size() || tolled.demand.size() != tolled.group_cost.size() ||
        untolled.demand.size() != untolled.group_cost.size())
        throw DomainError("tolled and untolled solutions describe different groups");
}

double surplus_of(const EquilibriumSolution& tolled, const EquilibriumSolution& untolled) {
    const double slack = 1e-9 * std::max(1.0, untolled.total_cost);
    if (tolled.total_cost > untolled.total_cost + slack) throw Error("tolls do not reduce total cost");
    return std::max(0.0, untolled.total_cost - tolled.total_cost);
}

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

RefundVector pareto_refund(const EquilibriumSolution& tolled, const EquilibriumSolution& untolled,
                           std::span<const double> alpha) {
    check_pair(tolled, untolled);
    const std::size_t G = tolled.group_cost.size();
    std::vector<double> weights(alpha.begin(), alpha.end());
    if (weights.empty()) {
        const double total = sum(tolled.demand);
        for (double d : tolled.demand) weights.push_back(d / total);
    }
    if (weights.size() != G) throw DomainError("one refund weight per group required");
    for (double a : weights)
        if (!(a >= 0.0)) throw DomainError("refund weights must be nonnegative");
    if (std::abs(sum(weights) - 1.0) > 1e-9) throw DomainError("refund weights must sum to 1");

    const double budget = surplus_of(tolled, untolled);
    RefundVector r;
    for (std::size_t g = 0; g < G; ++g)
        r.per_group.push_back(tolled.group_cost[g] - untolled.group_cost[g] + weights[g] / tolled.demand[g] * budget);
    return r;
}

TransferVector max_min_transfers(std::span<const double> incomes, std::span<const double> demands, double budget) {
    if (incomes.size() != demands.size()) throw DomainError("income and demand lists differ in length");
    if (!(budget >= 0.0) || !std::isfinite(budget)) throw DomainError("transfer budget must be nonnegative");
    for (double d : demands)
        if (!(d > 0.0)) throw DomainError("demands must be positive");
    for (double q : incomes)
        if (!(q > 0.0)) throw DomainError("incomes must be positive");

    const std::size_t n = incomes.size();
    TransferVector c{std::vector<double>(n, 0.0)};
    std::vector<double> level(incomes.begin(), incomes.end());
    double remaining = budget;

    while (remaining > 0.0) {
        const double lowest = *std::min_element(level.begin(), level.end());
        const double pool_cut = lowest + 1e-9 * std::abs(lowest);
        double pool_demand = 0.0;
        double next = std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < n; ++g) {
            if (level[g] <= pool_cut) pool_demand += demands[g];
            else next = std::min(next, level[g]);
        }
        const double fill = remaining / pool_demand;
        const bool last = next - lowest >= fill;
        const double raise = last ? fill : next - lowest;
        for (std::size_t g = 0; g < n; ++g) {
            if (level[g] > pool_cut) continue;
            c.per_group[g] += raise;
            level[g] += raise;
        }
        if (last) break;
        remaining -= raise * pool_demand;
        if (remaining <= 1e-15 * budget) break;
    }
    return c;
}

RefundVector transfers_to_refunds(const EquilibriumSolution& tolled, const EquilibriumSolution& untolled,
                                  const TransferVector& transfers) {
    check_pair(tolled, untolled);
    const std::size_t G = tolled.group_cost.size();
    if (transfers.per_group.size() != G) throw DomainError("one transfer per group required");
    double spent = 0.0;
    for (std::size_t g = 0; g < G; ++g) spent += transfers.per_group[g] * tolled.demand[g];
    const double budget = untolled.total_cost - tolled.total_cost;
    if (std::abs(spent - budget) > 1e-6 * std::max(1.0, std::abs(budget)))
        throw Error("transfers spend " + std::to_string(spent) + " but the surplus is " + std::to_string(budget));
    RefundVector r;
    for (std::size_t g = 0; g < G; ++g)
        r.per_group.push_back(tolled.group_cost[g] - untolled.group_cost[g] + transfers.per_group[g]);
    return r;
}

double refund_budget_residual(const EquilibriumSolution& tolled, const RefundVector& refunds) {
    if (refunds.per_group.size() != tolled.demand.size()) throw DomainError("one refund per group required");
    double paid = 0.0;
    for (std::size_t g = 0; g < tolled.demand.size(); ++g) paid += refunds.per_group[g] * tolled.demand[g];
    return std::abs(paid - tolled.revenue);
}

FavorabilityReport check_user_favorable(const EquilibriumSolution& tolled, const RefundVector& refunds,
                                        const EquilibriumSolution& untolled, double tol) {
    check_pair(tolled, untolled);
    if (refunds.per_group.size() != tolled.group_cost.size()) throw DomainError("one refund per group required");
    FavorabilityReport report;
    for (std::size_t g = 0; g < tolled.group_cost.size(); ++g) {
        const double slack = untolled.group_cost[g] - (tolled.group_cost[g] - refunds.per_group[g]);
        report.slack.push_back(slack);
        if (slack < -tol) {
            report.ok = false;
            report.violating.push_back(g);
        }
    }
    return report;
}

TransferVector brute_force_min_gini_transfers(std::span<const double> incomes, std::span<const double> demands,
                                              double budget, std::size_t grid) {
    const std::size_t n = incomes.size();
    if (n != demands.size()) throw DomainError("income and demand lists differ in length");
    if (n == 0) throw DomainError("no groups");
    if (n > 3) throw UnsupportedError("brute-force transfer search supports at most three groups");
    if (grid < 10) throw DomainError("transfer grid must be at least 10");
    if (!(budget >= 0.0)) throw DomainError("transfer budget must be nonnegative");
    if (budget == 0.0) return TransferVector{std::vector<double>(n, 0.0)};

    const double unit = budget / static_cast<double>(grid);
    IncomeDistribution q{std::vector<double>(incomes.begin(), incomes.end()),
                         std::vector<double>(demands.begin(), demands.end()), {}};
    std::vector<std::size_t> k(n, 0), best_k(n, 0);
    double best = std::numeric_limits<double>::infinity();

    auto evaluate = [&]() {
        for (std::size_t g = 0; g < n; ++g)
            q.income[g] = incomes[g] + unit * static_cast<double>(k[g]) / demands[g];
        const double w = gini(q);
        if (w < best) {
            best = w;
            best_k = k;
        }
    };
    auto recurse = [&](auto&& self, std::size_t g, std::size_t left) -> void {
        if (g + 1 == n) {
            k[g] = left;
            evaluate();
            return;
        }
        for (std::size_t i = 0; i <= left; ++i) {
            k[g] = i;
            self(self, g + 1, left - i);
        }
    };
    recurse(recurse, 0, grid);

    TransferVector c;
    for (std::size_t g = 0; g < n; ++g) c.per_group.push_back(unit * static_cast<double>(best_k[g]) / demands[g]);
    return c;
}

double transfer_grid_gini_bound(std::span<const double> incomes, std::span<const double> demands, double budget,
                                std::size_t grid) {
    double total = 0.0, weighted = 0.0;
    for (std::size_t g = 0; g < incomes.size(); ++g) {
        total += demands[g];
        weighted += incomes[g] * demands[g];
    }
    const double mean_after = (weighted + budget) / total;
    return static_cast<double>(incomes.size()) * budget / static_cast<double>(grid) / (total * mean_after);
}

// ---------------------------------------------------------------------------

UntolledBaseline make_baseline(const Scenario& s, const EquilibriumSolution& untolled) {
    if (untolled.group_cost.size() != s.group_count()) throw DomainError("baseline does not match the scenario");
    UntolledBaseline b;
    b.cost = untolled.group_cost;
    b.demand = untolled.demand;
    b.beta = s.beta;
    b.total_cost = untolled.total_cost;
    b.ex_post_income = ex_post_income(s, untolled.group_cost).income;
    return b;
}

RefundPolicy::RefundPolicy(PolicyKind kind, UntolledBaseline baseline, std::vector<double> alphas)
    : kind_(kind), baseline_(std::move(baseline)), alphas_(std::move(alphas)) {
    const std::size_t G = baseline_.cost.size();
    if (kind_ == PolicyKind::Proportional) {
        alphas_.clear();
        const double total = sum(baseline_.demand);
        for (double d : baseline_.demand) alphas_.push_back(d / total);
    } else if (kind_ == PolicyKind::CustomAlpha) {
        if (alphas_.size() != G) throw DomainError("custom-alpha policy needs one weight per group");
        for (double a : alphas_)
            if (!(a >= 0.0)) throw DomainError("refund weights must be nonnegative");
        if (std::abs(sum(alphas_) - 1.0) > 1e-9) throw DomainError("refund weights must sum to 1");
    } else {
        alphas_.clear();
    }
}

double RefundPolicy::surplus(std::span<const double> group_cost, double revenue) const {
    if (group_cost.size() != baseline_.cost.size()) throw DomainError("one cost per group required");
    double extra = 0.0;
    for (std::size_t g = 0; g < group_cost.size(); ++g)
        extra += (group_cost[g] - baseline_.cost[g]) * baseline_.demand[g];
    return revenue - extra;
}

TransferVector RefundPolicy::transfers(std::span<const double> group_cost, double revenue) const {
    const double budget = surplus(group_cost, revenue);
    const std::size_t G = baseline_.cost.size();
    if (budget < 0.0) {
        return TransferVector{std::vector<double>(G, budget / sum(baseline_.demand))};
    }
    if (kind_ == PolicyKind::MaxMin) {
        // Transfers raise real income by beta * c, so fill on incomes measured in units of beta.
        std::vector<double> scaled(baseline_.ex_post_income);
        for (double& q : scaled) q /= baseline_.beta;
        return max_min_transfers(scaled, baseline_.demand, budget);
    }
    TransferVector c;
    for (std::size_t g = 0; g < G; ++g) c.per_group.push_back(alphas_[g] / baseline_.demand[g] * budget);
    return c;
}

RefundVector RefundPolicy::refunds(std::span<const double> group_cost, double revenue) const {
    const auto c = transfers(group_cost, revenue);
    RefundVector r;
    for (std::size_t g = 0; g < group_cost.size(); ++g)
        r.per_group.push_back(group_cost[g] - baseline_.cost[g] + c.per_group[g]);
    return r;
}

std::string policy_name(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::MaxMin: return "maxmin";
        case PolicyKind::Proportional: return "proportional";
        case PolicyKind::CustomAlpha: return "custom-alpha";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------

PipelineResult optimal_cprr_pipeline(const Scenario& s, const TollVector& tolls, const SolverOptions& options) {
    return optimal_cprr_pipeline(s, tolls, solve_exogenous_equilibrium(s, TollVector::zero(s), options), options);
}

PipelineResult optimal_cprr_pipeline(const Scenario& s, const TollVector& tolls, const EquilibriumSolution& untolled,
                                     const SolverOptions& options) {
    PipelineResult out;
    out.untolled = untolled;
    out.tolled = tolls.is_zero() ? untolled : solve_exogenous_equilibrium(s, tolls, options);
    const double budget = surplus_of(out.tolled, out.untolled);

    out.ex_ante = ex_ante_distribution(s);
    out.ex_post_untolled = ex_post_income(s, out.untolled.group_cost);

    std::vector<double> scaled(out.ex_post_untolled.income);
    for (double& q : scaled) q /= s.beta;
    out.scheme.tolls = tolls;
    out.scheme.transfers = max_min_transfers(scaled, out.tolled.demand, budget);
    // The surplus is clamped at zero, so rebuild the refunds directly rather than through the
    // budget-checked conversion when C_tau exceeds C_0 by a rounding error.
    for (std::size_t g = 0; g < s.group_count(); ++g)
        out.scheme.refunds.per_group.push_back(out.tolled.group_cost[g] - out.untolled.group_cost[g] +
                                               out.scheme.transfers.per_group[g]);

    std::vector<double> net(s.group_count());
    for (std::size_t g = 0; g < net.size(); ++g) net[g] = out.tolled.group_cost[g] - out.scheme.refunds.per_group[g];
    out.ex_post = ex_post_income(s, net);

    out.gini_ex_ante = gini(out.ex_ante);
    out.gini_before = gini(out.ex_post_untolled);
    out.gini_after = gini(out.ex_post);

    const auto favorable = check_user_favorable(out.tolled, out.scheme.refunds, out.untolled,
                                                1e-9 * std::max(1.0, out.untolled.total_cost));
    if (!favorable.ok) throw std::logic_error("pipeline produced a refund that is not user-favorable");
    const double residual = refund_budget_residual(out.tolled, out.scheme.refunds);
    const double allowed = 1e-9 * std::max({1.0, out.tolled.revenue, out.untolled.total_cost});
    if (residual > allowed)
        throw std::logic_error("pipeline refunds miss the revenue by " + std::to_string(residual));
    return out;
}

}  // namespace fairtoll
