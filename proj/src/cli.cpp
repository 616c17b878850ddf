#include "fairtoll/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "fairtoll/assignment.hpp"
#include "fairtoll/cprr.hpp"
#include "fairtoll/inequality.hpp"
#include "fairtoll/reproduce.hpp"
#include "fairtoll/verify.hpp"
#include "number_format.hpp"
#include "report.hpp"

namespace fairtoll {

namespace {

using detail::Json;

struct Flags {
    std::string scenario = "appendix-g";
    std::vector<std::string> tolls;
    double tolerance = SolverOptions{}.tolerance;
    std::size_t max_iters = SolverOptions{}.max_iterations;
    std::size_t grid = 0;
    std::vector<std::string> policy{"maxmin"};
    std::string format = "structured";
    bool expect_equilibrium = false;
    bool timing = false;
    std::string flow_file;
    std::vector<double> incomes;
    std::vector<double> demands;
    std::string name;
};

struct Outcome {
    Json report;
    int code = kExitOk;
};

std::pair<std::string, double> split_assignment(const std::string& text, const std::string& flag) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError(flag, "expected id=value, got '" + text + "'");
    const auto value = detail::parse_decimal(std::string_view(text).substr(eq + 1));
    if (!value) throw ParseError(flag, "not a decimal number in '" + text + "'");
    return {text.substr(0, eq), *value};
}

TollVector parse_tolls(const Scenario& s, const std::vector<std::string>& items) {
    std::vector<std::pair<std::string, double>> entries;
    for (const auto& item : items) entries.push_back(split_assignment(item, "--toll"));
    return make_tolls(s, entries);
}

SolverOptions solver_options(const Flags& f) {
    SolverOptions o;
    o.tolerance = f.tolerance;
    o.max_iterations = f.max_iters;
    return o;
}

RefundPolicy make_policy(const Scenario& s, const Flags& f, const EquilibriumSolution& untolled) {
    const std::string& kind = f.policy.front();
    if (kind == "maxmin" || kind == "proportional") {
        if (f.policy.size() > 1) throw ParseError("--policy", "policy '" + kind + "' takes no weights");
        return RefundPolicy(kind == "maxmin" ? PolicyKind::MaxMin : PolicyKind::Proportional, make_baseline(s, untolled));
    }
    if (kind == "custom-alpha") {
        std::vector<double> alphas(s.group_count(), 0.0);
        for (std::size_t i = 1; i < f.policy.size(); ++i) {
            auto [id, value] = split_assignment(f.policy[i], "--policy");
            auto g = s.find_group(id);
            if (!g) throw ParseError("--policy", "unknown group '" + id + "'");
            alphas[*g] = value;
        }
        return RefundPolicy(PolicyKind::CustomAlpha, make_baseline(s, untolled), alphas);
    }
    throw ParseError("--policy", "unknown policy '" + kind + "'");
}

Json header(const std::string& command, const Scenario& s, const std::vector<std::string>& args) {
    std::string echo;
    for (const auto& a : args) echo += (echo.empty() ? "" : " ") + a;
    return Json{{"command", command}, {"args", echo}, {"scenario_digest", detail::scenario_digest(s)}};
}

Outcome cmd_solve(const Flags& f, const std::vector<std::string>& args) {
    const Scenario s = load_scenario_source(f.scenario);
    const TollVector tolls = parse_tolls(s, f.tolls);
    const auto eq = solve_exogenous_equilibrium(s, tolls, solver_options(f));
    Json r = header("solve", s, args);
    r["tolls"] = detail::tolls_json(s, tolls);
    r["equilibrium"] = detail::equilibrium_json(s, eq);
    r["cost_identity_residual"] = verify_cost_identity(eq);
    return {r, kExitOk};
}

Outcome cmd_refund(const Flags& f, const std::vector<std::string>& args) {
    const Scenario s = load_scenario_source(f.scenario);
    const TollVector tolls = parse_tolls(s, f.tolls);
    const SolverOptions opts = solver_options(f);
    Json r = header("refund", s, args);
    r["policy"] = f.policy.front();
    if (f.policy.front() == "maxmin" && f.policy.size() == 1) {
        const auto result = optimal_cprr_pipeline(s, tolls, opts);
        r["scheme"] = detail::pipeline_json(s, result);
        return {r, kExitOk};
    }
    const auto untolled = solve_exogenous_equilibrium(s, TollVector::zero(s), opts);
    const auto tolled = tolls.is_zero() ? untolled : solve_exogenous_equilibrium(s, tolls, opts);
    const RefundPolicy policy = make_policy(s, f, untolled);
    const auto transfers = policy.transfers(tolled.group_cost, tolled.revenue);
    const auto refunds = pareto_refund(tolled, untolled, policy.alphas());
    std::vector<double> after(s.group_count());
    for (GroupIndex g = 0; g < after.size(); ++g) after[g] = tolled.group_cost[g] - refunds.per_group[g];
    const auto ex_post = ex_post_income(s, after);
    const auto ex_post_untolled = ex_post_income(s, untolled.group_cost);
    r["scheme"] = Json{{"tolls", detail::tolls_json(s, tolls)},
                       {"alphas", detail::per_group_json(s, policy.alphas())},
                       {"refunds", detail::per_group_json(s, refunds.per_group)},
                       {"transfers", detail::per_group_json(s, transfers.per_group)},
                       {"cost_before", detail::per_group_json(s, untolled.group_cost)},
                       {"cost_tolled", detail::per_group_json(s, tolled.group_cost)},
                       {"cost_after", detail::per_group_json(s, after)},
                       {"revenue", tolled.revenue},
                       {"total_cost_untolled", untolled.total_cost},
                       {"total_cost_tolled", tolled.total_cost},
                       {"ex_post", detail::distribution_json(ex_post)},
                       {"gini_ex_ante", gini(ex_ante_distribution(s))},
                       {"gini_before", gini(ex_post_untolled)},
                       {"gini_after", gini(ex_post)}};
    return {r, kExitOk};
}

Outcome cmd_gini(const Flags& f, const std::vector<std::string>& args) {
    if (!f.incomes.empty()) {
        std::vector<double> demands = f.demands;
        if (demands.empty()) demands.assign(f.incomes.size(), 1.0);
        const auto q = make_distribution(f.incomes, demands);
        Json r{{"command", "gini"}, {"args", header("gini", Scenario{}, args)["args"]}};
        r["distribution"] = detail::distribution_json(q);
        r["mean_income"] = mean_income(q);
        r["gini"] = gini(q);
        return {r, kExitOk};
    }
    const Scenario s = load_scenario_source(f.scenario);
    const TollVector tolls = parse_tolls(s, f.tolls);
    const auto eq = solve_exogenous_equilibrium(s, tolls, solver_options(f));
    const auto ante = ex_ante_distribution(s);
    const auto post = ex_post_income(s, eq.group_cost);
    Json r = header("gini", s, args);
    r["tolls"] = detail::tolls_json(s, tolls);
    r["ex_ante"] = detail::distribution_json(ante);
    r["gini_ex_ante"] = gini(ante);
    r["ex_post_without_refunds"] = detail::distribution_json(post);
    r["gini_ex_post_without_refunds"] = gini(post);
    return {r, kExitOk};
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, "cannot open file");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return Json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path, e.what());
    }
}

double json_number(const Json& j, const std::string& where) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        if (auto v = detail::parse_decimal(j.get<std::string>())) return *v;
    }
    throw ParseError(where, "expected a decimal number");
}

FlowPattern load_flow(const Scenario& s, const std::string& path) {
    const Json doc = read_json_file(path);
    const Json& groups = doc.contains("paths") ? doc["paths"] : doc;
    if (!groups.is_object()) throw ParseError(path, "expected an object of group path lists");
    std::vector<std::vector<PathFlow>> per_group(s.group_count());
    for (const auto& [id, list] : groups.items()) {
        auto g = s.find_group(id);
        if (!g) throw ParseError("paths." + id, "unknown group");
        if (!list.is_array()) throw ParseError("paths." + id, "expected a list");
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string where = "paths." + id + "[" + std::to_string(i) + "]";
            if (!list[i].contains("path") || !list[i].contains("flow") || !list[i]["path"].is_string())
                throw ParseError(where, "expected {path, flow}");
            per_group[*g].push_back(
                PathFlow{parse_path(s, *g, list[i]["path"].get<std::string>()), json_number(list[i]["flow"], where + ".flow")});
        }
    }
    FlowPattern flow(s, std::move(per_group));
    if (!is_feasible(s, flow, 1e-9)) throw DomainError("flow does not meet every group's demand");
    return flow;
}

Outcome cmd_verify_exo(const Flags& f, const std::vector<std::string>& args) {
    const Scenario s = load_scenario_source(f.scenario);
    const TollVector tolls = parse_tolls(s, f.tolls);
    Json r = header("verify-exo", s, args);
    r["tolls"] = detail::tolls_json(s, tolls);
    FlowPattern flow;
    if (!f.flow_file.empty()) {
        flow = load_flow(s, f.flow_file);
        r["flow_source"] = "file";
    } else {
        const auto eq = solve_exogenous_equilibrium(s, tolls, solver_options(f));
        flow = eq.flows;
        r["flow_source"] = "solver";
        r["cost_identity_residual"] = verify_cost_identity(eq);
    }
    const auto report = verify_exogenous_equilibrium(s, tolls, flow);
    Json groups = Json::object();
    for (const auto& g : report.groups)
        groups[g.group] = Json{{"min_cost", g.min_cost}, {"gap", g.gap}, {"pass", g.pass}};
    r["flow"] = detail::flow_json(s, flow);
    r["pass"] = report.pass;
    r["groups"] = groups;
    return {r, report.pass ? kExitOk : kExitVerificationFailed};
}

Outcome cmd_verify_endo(const Flags& f, const std::vector<std::string>& args) {
    const Scenario s = load_scenario_source(f.scenario);
    const TollVector tolls = parse_tolls(s, f.tolls);
    const SolverOptions opts = solver_options(f);
    const std::size_t grid = f.grid ? f.grid : kDefaultDeviationGrid;
    const auto untolled = solve_exogenous_equilibrium(s, TollVector::zero(s), opts);
    const RefundPolicy policy = make_policy(s, f, untolled);
    const auto eq = tolls.is_zero() ? untolled : solve_exogenous_equilibrium(s, tolls, opts);
    const auto deviations = verify_endogenous_equilibrium(s, tolls, policy, eq.flows, grid);

    Json r = header("verify-endo", s, args);
    r["tolls"] = detail::tolls_json(s, tolls);
    r["policy"] = policy_name(policy.kind());
    r["grid"] = grid;
    r["equilibrium"] = detail::flow_json(s, eq.flows);
    Json devs = Json::array();
    for (const auto& d : deviations) devs.push_back(detail::deviation_json(s, d));
    r["endogenous_equilibrium"] = deviations.empty();
    r["profitable_deviations"] = devs;
    const bool failed = f.expect_equilibrium && !deviations.empty();
    return {r, failed ? kExitVerificationFailed : kExitOk};
}

Outcome cmd_so_search(const Flags& f, const std::vector<std::string>& args) {
    const Scenario s = load_scenario_source(f.scenario);
    const std::size_t grid = f.grid ? f.grid : 200;
    const auto so = search_system_optimal(s, grid);
    const auto untolled = solve_exogenous_equilibrium(s, TollVector::zero(s), solver_options(f));
    Json r = header("so-search", s, args);
    r["grid"] = grid;
    r["flow"] = detail::flow_json(s, so.flow);
    r["total_cost"] = so.cost;
    r["grid_bound"] = so.lipschitz_bound;
    r["evaluated"] = so.evaluated;
    r["total_cost_untolled"] = untolled.total_cost;
    return {r, kExitOk};
}

Outcome cmd_reproduce(const Flags& f, const std::vector<std::string>& args) {
    const auto result = reproduce(f.name, solver_options(f));
    std::string echo;
    for (const auto& a : args) echo += (echo.empty() ? "" : " ") + a;
    Json r{{"command", "reproduce"}, {"args", echo}, {"name", result.name}, {"pass", result.ok}};
    r["report"] = result.report;
    r["mismatches"] = result.mismatches;
    return {r, result.ok ? kExitOk : kExitVerificationFailed};
}

void flatten(const Json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& rows) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, rows);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "[" + std::to_string(i) + "]", rows);
    } else if (j.is_string()) {
        rows.emplace_back(prefix, j.get<std::string>());
    } else {
        rows.emplace_back(prefix, j.dump());
    }
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += (c == '"') ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

void emit(const Json& report, const std::string& format, std::ostream& out) {
    if (format == "csv") {
        std::vector<std::pair<std::string, std::string>> rows;
        flatten(report, "", rows);
        out << "key,value\n";
        for (const auto& [k, v] : rows) out << csv_field(k) << ',' << csv_field(v) << '\n';
    } else {
        out << report.dump(2) << '\n';
    }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tolling, refunding and inequality analysis for multi-class traffic equilibria", "fairtoll"};
    app.require_subcommand(1);
    Flags flags;

    auto add_common = [&](CLI::App* sub, bool needs_scenario) {
        auto* opt = sub->add_option("--scenario", flags.scenario, "Scenario file or built-in name");
        if (needs_scenario) opt->capture_default_str();
        sub->add_option("--toll", flags.tolls, "Edge tolls as edge=value")->expected(0, -1);
        sub->add_option("--tolerance", flags.tolerance, "Relative gap tolerance")->check(CLI::PositiveNumber);
        sub->add_option("--max-iters", flags.max_iters, "Solver iteration limit")->check(CLI::PositiveNumber);
        sub->add_option("--format", flags.format, "Report format")->check(CLI::IsMember({"structured", "csv"}));
        sub->add_flag("--timing", flags.timing, "Append wall-clock timing to the report");
    };

    auto* solve = app.add_subcommand("solve", "Solve the exogenous equilibrium");
    add_common(solve, true);
    auto* refund = app.add_subcommand("refund", "Build a refund scheme for the given tolls");
    add_common(refund, true);
    refund->add_option("--policy", flags.policy, "maxmin | proportional | custom-alpha g=a...")->expected(1, -1);
    auto* gini_cmd = app.add_subcommand("gini", "Gini coefficient of a scenario or of explicit incomes");
    add_common(gini_cmd, true);
    gini_cmd->add_option("--incomes", flags.incomes, "Comma-separated incomes")->delimiter(',');
    gini_cmd->add_option("--demands", flags.demands, "Comma-separated demand weights")->delimiter(',');
    auto* vexo = app.add_subcommand("verify-exo", "Check the exogenous equilibrium conditions");
    add_common(vexo, true);
    vexo->add_option("--flow", flags.flow_file, "Path-flow document to verify instead of solving");
    auto* vendo = app.add_subcommand("verify-endo", "Search for profitable group deviations");
    add_common(vendo, true);
    vendo->add_option("--policy", flags.policy, "maxmin | proportional | custom-alpha g=a...")->expected(1, -1);
    vendo->add_option("--grid", flags.grid, "Deviation grid resolution per group")->check(CLI::Range(2, 100000));
    vendo->add_flag("--expect-equilibrium", flags.expect_equilibrium, "Exit 1 when a profitable deviation exists");
    auto* so = app.add_subcommand("so-search", "Grid search for the minimum total cost flow");
    add_common(so, true);
    so->add_option("--grid", flags.grid, "Grid resolution per group")->check(CLI::Range(2, 100000));
    auto* repro = app.add_subcommand("reproduce", "Run a built-in end-to-end check");
    add_common(repro, false);
    repro->add_option("name", flags.name, "prop1 | prop2 | prop4 | cor1 | lemma3 | lemma4")
        ->required()
        ->check(CLI::IsMember(reproduction_names()));

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kExitInputError;
    }
    if (flags.policy.empty()) flags.policy = {"maxmin"};

    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
        if (solve->parsed()) outcome = cmd_solve(flags, args);
        else if (refund->parsed()) outcome = cmd_refund(flags, args);
        else if (gini_cmd->parsed()) outcome = cmd_gini(flags, args);
        else if (vexo->parsed()) outcome = cmd_verify_exo(flags, args);
        else if (vendo->parsed()) outcome = cmd_verify_endo(flags, args);
        else if (so->parsed()) outcome = cmd_so_search(flags, args);
        else outcome = cmd_reproduce(flags, args);
    } catch (const ConvergenceError& e) {
        err << "error: " << e.what() << "\n";
        return kExitVerificationFailed;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const std::logic_error& e) {
        err << "internal check failed: " << e.what() << "\n";
        return kExitVerificationFailed;
    }
    if (flags.timing) {
        const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start);
        outcome.report["timing_ms"] = elapsed.count();
    }
    emit(outcome.report, flags.format, out);
    if (outcome.code == kExitVerificationFailed && outcome.report.contains("mismatches"))
        for (const auto& m : outcome.report["mismatches"]) err << "mismatch: " << m.get<std::string>() << "\n";
    return outcome.code;
}

}  // namespace fairtoll
