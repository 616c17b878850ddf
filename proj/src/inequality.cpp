#include "fairtoll/inequality.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fairtoll {

IncomeDistribution make_distribution(std::vector<double> income, std::vector<double> demand,
                                     std::vector<std::string> ids) {
    if (income.size() != demand.size()) throw DomainError("income and demand lists differ in length");
    if (!ids.empty() && ids.size() != income.size()) throw DomainError("id list length mismatch");
    if (income.empty()) throw DomainError("income distribution is empty");
    for (double d : demand)
        if (!(d > 0.0) || !std::isfinite(d)) throw DomainError("demand weights must be positive");
    for (double q : income)
        if (!std::isfinite(q)) throw DomainError("incomes must be finite");
    return IncomeDistribution{std::move(income), std::move(demand), std::move(ids)};
}

IncomeDistribution ex_ante_distribution(const Scenario& s) {
    IncomeDistribution q;
    for (const auto& g : s.groups) {
        q.income.push_back(g.income);
        q.demand.push_back(g.demand);
        q.ids.push_back(g.id);
    }
    return q;
}

double mean_income(const IncomeDistribution& q) {
    double weighted = 0.0, total = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        weighted += q.income[i] * q.demand[i];
        total += q.demand[i];
    }
    if (!(total > 0.0)) throw DomainError("total demand weight must be positive");
    return weighted / total;
}

double gini(const IncomeDistribution& q) {
    if (q.income.size() != q.demand.size()) throw DomainError("income and demand lists differ in length");
    for (double v : q.income)
        if (!(v > 0.0)) throw DomainError("gini requires positive incomes");
    double total = 0.0;
    for (double d : q.demand) total += d;
    const double delta = mean_income(q);
    double sum = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
        for (std::size_t j = 0; j < q.size(); ++j)
            sum += q.demand[i] * q.demand[j] * std::abs(q.income[i] - q.income[j]);
    return sum / (2.0 * total * total * delta);
}

IncomeDistribution ex_post_income(const Scenario& s, std::span<const double> costs_with_refund) {
    if (costs_with_refund.size() != s.group_count()) throw DomainError("one cost per group required");
    IncomeDistribution q = ex_ante_distribution(s);
    for (std::size_t g = 0; g < q.size(); ++g) {
        q.income[g] -= s.beta * costs_with_refund[g];
        if (!(q.income[g] > 0.0)) throw DomainError("beta too large for scenario");
    }
    return q;
}

namespace {

IncomeDistribution scaled(const IncomeDistribution& q, const std::vector<double>& factor) {
    IncomeDistribution out = q;
    for (std::size_t i = 0; i < q.size(); ++i) out.income[i] *= factor[i];
    return out;
}

IncomeDistribution shifted(const IncomeDistribution& q, double lambda) {
    IncomeDistribution out = q;
    for (double& v : out.income) v += lambda;
    return out;
}

}  // namespace

AxiomReport check_inequality_axioms(const IncomeDistribution& q, std::size_t samples, std::uint64_t seed) {
    if (samples == 0) throw DomainError("at least one sample required");
    const double w = gini(q);
    const double slack = 1e-12 * std::max(1.0, w);
    const std::size_t n = q.size();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return q.income[a] < q.income[b]; });
    const double qmin = q.income[order.front()];

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> log_scale(std::log(1e-3), std::log(1e3));
    std::uniform_real_distribution<double> mult(0.2, 5.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    AxiomReport report;
    report.samples = samples;
    for (std::size_t k = 0; k < samples; ++k) {
        const double lambda = std::exp(log_scale(rng));
        const double ws = gini(scaled(q, std::vector<double>(n, lambda)));
        if (std::abs(ws - w) > 1e-12 * std::max(w, 1e-300) && std::abs(ws - w) > 1e-15) {
            ++report.scale_failures;
            report.notes.push_back("scale by " + std::to_string(lambda) + " changed the coefficient");
        }

        // Multipliers sorted along the income order: richer groups get larger factors.
        std::vector<double> draws(n);
        for (double& d : draws) d = mult(rng);
        std::sort(draws.begin(), draws.end());
        std::vector<double> up(n);
        for (std::size_t i = 0; i < n; ++i) up[order[i]] = draws[i];
        if (gini(scaled(q, up)) < w - slack) {
            ++report.regressive_failures;
            report.notes.push_back("nondecreasing multipliers lowered the coefficient");
        }

        // Richer groups get smaller factors, capped so that the income order is preserved.
        std::sort(draws.begin(), draws.end(), std::greater<>());
        std::vector<double> down(n);
        double prev_income = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t g = order[i];
            double d = draws[i];
            if (i > 0) d = std::max(d, prev_income / q.income[g]);
            down[g] = d;
            prev_income = q.income[g] * d;
        }
        if (gini(scaled(q, down)) > w + slack) {
            ++report.progressive_failures;
            report.notes.push_back("nonincreasing multipliers raised the coefficient");
        }

        const double shift = unit(rng) * qmin * (1.0 - 1e-9);
        const bool plus_ok = gini(shifted(q, shift)) <= w + slack;
        const bool minus_ok = gini(shifted(q, -shift)) >= w - slack;
        if (!plus_ok || !minus_ok) {
            ++report.constant_transfer_failures;
            report.notes.push_back("constant transfer of " + std::to_string(shift) + " moved the coefficient the wrong way");
        }
    }
    return report;
}

}  // namespace fairtoll
