#pragma once

#include <cstdint>
#include <cstdio>
#include <string>

#include <json.hpp>

#include "fairtoll/assignment.hpp"
#include "fairtoll/cprr.hpp"
#include "fairtoll/inequality.hpp"
#include "fairtoll/verify.hpp"

namespace fairtoll::detail {

using Json = nlohmann::ordered_json;

inline std::string scenario_digest(const Scenario& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : save_scenario(s)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline Json tolls_json(const Scenario& s, const TollVector& tolls) {
    Json j = Json::object();
    for (EdgeIndex e = 0; e < s.edge_count(); ++e) j[s.network.edges[e].id] = tolls.per_edge[e];
    return j;
}

inline Json per_group_json(const Scenario& s, const std::vector<double>& values) {
    Json j = Json::object();
    for (GroupIndex g = 0; g < s.group_count(); ++g) j[s.groups[g].id] = values.at(g);
    return j;
}

inline Json paths_json(const Scenario& s, const std::vector<PathFlow>& paths) {
    Json j = Json::array();
    for (const auto& pf : paths) j.push_back(Json{{"path", describe_path(s.network, pf.path)}, {"flow", pf.flow}});
    return j;
}

inline Json flow_json(const Scenario& s, const FlowPattern& f) {
    Json edges = Json::array();
    for (EdgeIndex e = 0; e < s.edge_count(); ++e) {
        const auto& edge = s.network.edges[e];
        edges.push_back(Json{{"id", edge.id}, {"flow", f.edge_flows()[e]}, {"time", edge.latency(f.edge_flows()[e])}});
    }
    Json groups = Json::object();
    for (GroupIndex g = 0; g < s.group_count(); ++g) groups[s.groups[g].id] = paths_json(s, f.paths(g));
    return Json{{"edges", edges}, {"paths", groups}};
}

inline Json equilibrium_json(const Scenario& s, const EquilibriumSolution& eq) {
    Json j = flow_json(s, eq.flows);
    j["group_cost"] = per_group_json(s, eq.group_cost);
    j["total_cost"] = eq.total_cost;
    j["revenue"] = eq.revenue;
    j["solver"] = Json{{"iterations", eq.iterations}, {"gap", eq.gap}};
    return j;
}

inline Json distribution_json(const IncomeDistribution& q) {
    Json j = Json::object();
    for (std::size_t i = 0; i < q.size(); ++i) {
        const std::string id = q.ids.empty() ? std::to_string(i) : q.ids[i];
        j[id] = Json{{"income", q.income[i]}, {"demand", q.demand[i]}};
    }
    return j;
}

inline Json deviation_json(const Scenario& s, const DeviationReport& d) {
    return Json{{"group", d.group},
                {"split", paths_json(s, d.split)},
                {"cost_before", d.cost_before},
                {"cost_after", d.cost_after},
                {"gain", d.gain},
                {"profitable", d.profitable}};
}

inline Json pipeline_json(const Scenario& s, const PipelineResult& p) {
    std::vector<double> after(s.group_count());
    for (GroupIndex g = 0; g < s.group_count(); ++g) after[g] = p.tolled.group_cost[g] - p.scheme.refunds.per_group[g];
    return Json{{"tolls", tolls_json(s, p.scheme.tolls)},
                {"refunds", per_group_json(s, p.scheme.refunds.per_group)},
                {"transfers", per_group_json(s, p.scheme.transfers.per_group)},
                {"cost_before", per_group_json(s, p.untolled.group_cost)},
                {"cost_tolled", per_group_json(s, p.tolled.group_cost)},
                {"cost_after", per_group_json(s, after)},
                {"revenue", p.tolled.revenue},
                {"total_cost_untolled", p.untolled.total_cost},
                {"total_cost_tolled", p.tolled.total_cost},
                {"ex_post", distribution_json(p.ex_post)},
                {"gini_ex_ante", p.gini_ex_ante},
                {"gini_before", p.gini_before},
                {"gini_after", p.gini_after}};
}

}  // namespace fairtoll::detail
