#include "fairtoll/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "number_format.hpp"

namespace fairtoll {

using nlohmann::json;

double LatencyFn::operator()(double flow) const {
    if (coeff == 0.0) return free_flow;
    return free_flow + coeff * std::pow(flow, exponent);
}

double LatencyFn::integral(double flow) const {
    if (coeff == 0.0) return free_flow * flow;
    return free_flow * flow + coeff * std::pow(flow, exponent + 1.0) / (exponent + 1.0);
}

double LatencyFn::derivative(double flow) const {
    if (coeff == 0.0) return 0.0;
    if (exponent == 1.0) return coeff;
    return coeff * exponent * std::pow(flow, exponent - 1.0);
}

std::optional<NodeIndex> Network::find_node(std::string_view id) const {
    auto it = std::find(nodes.begin(), nodes.end(), id);
    if (it == nodes.end()) return std::nullopt;
    return static_cast<NodeIndex>(it - nodes.begin());
}

std::optional<EdgeIndex> Network::find_edge(std::string_view id) const {
    for (EdgeIndex e = 0; e < edges.size(); ++e)
        if (edges[e].id == id) return e;
    return std::nullopt;
}

std::optional<GroupIndex> Scenario::find_group(std::string_view id) const {
    for (GroupIndex g = 0; g < groups.size(); ++g)
        if (groups[g].id == id) return g;
    return std::nullopt;
}

double travel_time(const Edge& edge, double flow) {
    if (!(flow >= 0.0) || !std::isfinite(flow))
        throw DomainError("travel_time: flow on edge '" + edge.id + "' must be finite and nonnegative");
    return edge.latency(flow);
}

namespace {

// Out-edges per node, sorted by edge id so that depth-first search visits paths in
// lexicographic order.
std::vector<std::vector<EdgeIndex>> sorted_adjacency(const Network& net) {
    std::vector<std::vector<EdgeIndex>> adj(net.nodes.size());
    for (EdgeIndex e = 0; e < net.edges.size(); ++e) {
        const auto& edge = net.edges[e];
        if (edge.tail < adj.size() && edge.head < adj.size() && edge.tail != edge.head)
            adj[edge.tail].push_back(e);
    }
    for (auto& out : adj)
        std::sort(out.begin(), out.end(), [&](EdgeIndex a, EdgeIndex b) {
            return net.edges[a].id < net.edges[b].id;
        });
    return adj;
}

bool reachable(const Network& net, NodeIndex from, NodeIndex to) {
    const auto adj = sorted_adjacency(net);
    std::vector<char> seen(net.nodes.size(), 0);
    std::vector<NodeIndex> stack{from};
    seen[from] = 1;
    while (!stack.empty()) {
        NodeIndex u = stack.back();
        stack.pop_back();
        if (u == to) return true;
        for (EdgeIndex e : adj[u]) {
            NodeIndex v = net.edges[e].head;
            if (!seen[v]) {
                seen[v] = 1;
                stack.push_back(v);
            }
        }
    }
    return false;
}

}  // namespace

std::vector<std::string> validate_scenario(const Scenario& s) {
    std::vector<std::string> issues;
    const auto& net = s.network;
    const std::size_t n = net.nodes.size();

    std::set<std::string> seen_nodes;
    for (const auto& id : net.nodes) {
        if (id.empty()) issues.push_back("empty node id");
        if (!seen_nodes.insert(id).second) issues.push_back("duplicate node id '" + id + "'");
    }

    std::set<std::string> seen_edges;
    for (const auto& e : net.edges) {
        const std::string who = "edge '" + e.id + "'";
        if (e.id.empty()) issues.push_back("empty edge id");
        if (!seen_edges.insert(e.id).second) issues.push_back("duplicate edge id '" + e.id + "'");
        if (e.tail >= n || e.head >= n) issues.push_back(who + ": endpoint is not a network node");
        else if (e.tail == e.head) issues.push_back(who + ": self-loop");
        const auto& l = e.latency;
        if (!std::isfinite(l.free_flow) || l.free_flow < 0.0)
            issues.push_back(who + ": free-flow time must be finite and nonnegative");
        if (!std::isfinite(l.coeff) || l.coeff < 0.0)
            issues.push_back(who + ": congestion coefficient must be finite and nonnegative");
        if (!std::isfinite(l.exponent)) issues.push_back(who + ": latency exponent must be finite");
        else if (l.exponent < 1.0) issues.push_back(who + ": latency exponent below 1");
    }

    std::set<std::string> seen_groups;
    for (const auto& g : s.groups) {
        const std::string who = "group '" + g.id + "'";
        if (g.id.empty()) issues.push_back("empty group id");
        if (!seen_groups.insert(g.id).second) issues.push_back("duplicate group id '" + g.id + "'");
        if (!std::isfinite(g.vot) || g.vot <= 0.0) issues.push_back(who + ": value-of-time must be positive");
        if (!std::isfinite(g.income) || g.income <= 0.0) issues.push_back(who + ": income must be positive");
        if (!std::isfinite(g.demand) || g.demand <= 0.0) issues.push_back(who + ": demand must be positive");
        if (g.origin >= n || g.destination >= n) {
            issues.push_back(who + ": origin or destination is not a network node");
            continue;
        }
        if (g.origin == g.destination) {
            issues.push_back(who + ": origin equals destination");
            continue;
        }
        if (!reachable(net, g.origin, g.destination))
            issues.push_back("disconnected O-D pair for group '" + g.id + "'");
    }

    if (!std::isfinite(s.beta) || s.beta <= 0.0) issues.push_back("beta must be positive");
    return issues;
}

// ---------------------------------------------------------------------------
// Interchange format

namespace {

std::size_t line_of(std::string_view text, std::size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
}

void reject_unknown_keys(const json& obj, const std::string& where,
                         std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) throw ParseError(where, "expected an object");
    for (const auto& [key, _] : obj.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ParseError(where + "." + key, "unknown key");
}

const json& require(const json& obj, const std::string& where, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(where + "." + key, "missing key");
    return *it;
}

double number_field(const json& obj, const std::string& where, const char* key) {
    const json& v = require(obj, where, key);
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        if (auto d = detail::parse_decimal(v.get_ref<const std::string&>())) return *d;
        throw ParseError(where + "." + key, "not a decimal number: '" + v.get<std::string>() + "'");
    }
    throw ParseError(where + "." + key, "expected a number or decimal string");
}

std::string string_field(const json& obj, const std::string& where, const char* key) {
    const json& v = require(obj, where, key);
    if (!v.is_string()) throw ParseError(where + "." + key, "expected a string");
    return v.get<std::string>();
}

NodeIndex node_ref(const Network& net, const json& obj, const std::string& where, const char* key) {
    std::string id = string_field(obj, where, key);
    if (auto idx = net.find_node(id)) return *idx;
    throw ParseError(where + "." + key, "unknown node '" + id + "'");
}

}  // namespace

Scenario load_scenario(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError("line " + std::to_string(line_of(text, e.byte)), "malformed document");
    }
    reject_unknown_keys(doc, "$", {"nodes", "edges", "groups", "beta"});

    Scenario s;
    const json& nodes = require(doc, "$", "nodes");
    if (!nodes.is_array()) throw ParseError("$.nodes", "expected a list");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!nodes[i].is_string()) throw ParseError("nodes[" + std::to_string(i) + "]", "expected a string");
        s.network.nodes.push_back(nodes[i].get<std::string>());
    }

    const json& edges = require(doc, "$", "edges");
    if (!edges.is_array()) throw ParseError("$.edges", "expected a list");
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const std::string where = "edges[" + std::to_string(i) + "]";
        const json& e = edges[i];
        reject_unknown_keys(e, where, {"id", "tail", "head", "a", "b", "p"});
        Edge edge;
        edge.id = string_field(e, where, "id");
        edge.tail = node_ref(s.network, e, where, "tail");
        edge.head = node_ref(s.network, e, where, "head");
        edge.latency.free_flow = number_field(e, where, "a");
        edge.latency.coeff = number_field(e, where, "b");
        edge.latency.exponent = number_field(e, where, "p");
        s.network.edges.push_back(std::move(edge));
    }

    const json& groups = require(doc, "$", "groups");
    if (!groups.is_array()) throw ParseError("$.groups", "expected a list");
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const std::string where = "groups[" + std::to_string(i) + "]";
        const json& g = groups[i];
        reject_unknown_keys(g, where, {"id", "vot", "income", "demand", "origin", "destination"});
        UserGroup group;
        group.id = string_field(g, where, "id");
        group.vot = number_field(g, where, "vot");
        group.income = number_field(g, where, "income");
        group.demand = number_field(g, where, "demand");
        group.origin = node_ref(s.network, g, where, "origin");
        group.destination = node_ref(s.network, g, where, "destination");
        s.groups.push_back(std::move(group));
    }

    s.beta = number_field(doc, "$", "beta");

    if (auto issues = validate_scenario(s); !issues.empty()) throw ValidationError(std::move(issues));
    return s;
}

std::string save_scenario(const Scenario& s) {
    using detail::format_decimal;
    json doc;
    doc["nodes"] = s.network.nodes;
    doc["edges"] = json::array();
    for (const auto& e : s.network.edges) {
        doc["edges"].push_back({{"id", e.id},
                                {"tail", s.network.nodes.at(e.tail)},
                                {"head", s.network.nodes.at(e.head)},
                                {"a", format_decimal(e.latency.free_flow)},
                                {"b", format_decimal(e.latency.coeff)},
                                {"p", format_decimal(e.latency.exponent)}});
    }
    doc["groups"] = json::array();
    for (const auto& g : s.groups) {
        doc["groups"].push_back({{"id", g.id},
                                 {"vot", format_decimal(g.vot)},
                                 {"income", format_decimal(g.income)},
                                 {"demand", format_decimal(g.demand)},
                                 {"origin", s.network.nodes.at(g.origin)},
                                 {"destination", s.network.nodes.at(g.destination)}});
    }
    doc["beta"] = format_decimal(s.beta);
    return doc.dump(2) + "\n";
}

// Built-in instances. q_M = 1000 fixes the symbolic income scale of the three-class
// example: q_L solves q_M (1 - 0.008) = q_L (1 - 0.010) + 0.014 q_M / 5, i.e. q_L = 989.2 / 0.99,
// and every value-of-time is 0.001 times the income.
static constexpr std::string_view kParallelThreeClass = R"({
  "nodes": ["s", "t"],
  "edges": [
    {"id": "e1", "tail": "s", "head": "t", "a": "0", "b": "2", "p": "1"},
    {"id": "e2", "tail": "s", "head": "t", "a": "4", "b": "1", "p": "1"}
  ],
  "groups": [
    {"id": "H", "vot": "2", "income": "2000", "demand": "2", "origin": "s", "destination": "t"},
    {"id": "M", "vot": "1", "income": "1000", "demand": "1", "origin": "s", "destination": "t"},
    {"id": "L", "vot": "0.99919191919191919191919", "income": "999.19191919191919191919",
     "demand": "5", "origin": "s", "destination": "t"}
  ],
  "beta": "1"
})";

// Two disjoint O-D pairs with omega = 0.1, q_H = 2, q_L = 1.
static constexpr std::string_view kTwoPair = R"({
  "nodes": ["v1", "v2", "v3", "v4"],
  "edges": [
    {"id": "e1", "tail": "v1", "head": "v2", "a": "0", "b": "0.5", "p": "1"},
    {"id": "e2", "tail": "v3", "head": "v4", "a": "0", "b": "1", "p": "1"},
    {"id": "e3", "tail": "v3", "head": "v4", "a": "1", "b": "0", "p": "1"}
  ],
  "groups": [
    {"id": "H", "vot": "0.2", "income": "2", "demand": "1", "origin": "v1", "destination": "v2"},
    {"id": "L", "vot": "0.1", "income": "1", "demand": "1", "origin": "v3", "destination": "v4"}
  ],
  "beta": "1"
})";

bool is_builtin_scenario(std::string_view name) {
    return name == "appendix-g" || name == "appendix-d";
}

std::vector<std::string> builtin_scenario_names() { return {"appendix-g", "appendix-d"}; }

std::string builtin_scenario_text(std::string_view name) {
    if (name == "appendix-g") return std::string(kParallelThreeClass);
    if (name == "appendix-d") return std::string(kTwoPair);
    throw Error("unknown built-in scenario '" + std::string(name) + "'");
}

Scenario builtin_scenario(std::string_view name) { return load_scenario(builtin_scenario_text(name)); }

Scenario load_scenario_source(const std::string& name) {
    if (is_builtin_scenario(name)) return builtin_scenario(name);
    std::ifstream in(name);
    if (!in) throw Error("cannot open scenario '" + name + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_scenario(buf.str());
}

// ---------------------------------------------------------------------------
// Paths

PathSet enumerate_paths(const Scenario& s, GroupIndex group, std::size_t cap) {
    if (cap == 0) throw DomainError("enumerate_paths: cap must be at least 1");
    const auto& g = s.groups.at(group);
    if (g.origin == g.destination)
        throw DomainError("enumerate_paths: group '" + g.id + "' has origin equal to destination");

    const auto& net = s.network;
    const auto adj = sorted_adjacency(net);
    PathSet out;
    std::vector<EdgeIndex> stack;
    std::vector<char> on_path(net.nodes.size(), 0);

    // Returns false once cap+1 paths have been seen.
    auto dfs = [&](auto&& self, NodeIndex u) -> bool {
        if (u == g.destination) {
            if (out.paths.size() == cap) {
                out.truncated = true;
                return false;
            }
            out.paths.push_back(Path{stack, group});
            return true;
        }
        on_path[u] = 1;
        for (EdgeIndex e : adj[u]) {
            NodeIndex v = net.edges[e].head;
            if (on_path[v]) continue;
            stack.push_back(e);
            bool keep_going = self(self, v);
            stack.pop_back();
            if (!keep_going) {
                on_path[u] = 0;
                return false;
            }
        }
        on_path[u] = 0;
        return true;
    };
    dfs(dfs, g.origin);

    if (out.paths.empty())
        throw DisconnectedError("disconnected O-D pair for group '" + g.id + "'");
    return out;
}

bool path_less(const Network& net, const Path& a, const Path& b) {
    return std::lexicographical_compare(
        a.edges.begin(), a.edges.end(), b.edges.begin(), b.edges.end(),
        [&](EdgeIndex x, EdgeIndex y) { return net.edges[x].id < net.edges[y].id; });
}

std::string describe_path(const Network& net, const Path& path) {
    std::string out;
    for (std::size_t i = 0; i < path.edges.size(); ++i) {
        if (i) out += '>';
        out += net.edges.at(path.edges[i]).id;
    }
    return out;
}

Path parse_path(const Scenario& s, GroupIndex group, std::string_view description) {
    Path path{{}, group};
    std::size_t start = 0;
    while (start <= description.size()) {
        std::size_t end = description.find('>', start);
        if (end == std::string_view::npos) end = description.size();
        std::string_view id = description.substr(start, end - start);
        auto e = s.network.find_edge(id);
        if (!e) throw ParseError(std::string(description), "unknown edge '" + std::string(id) + "'");
        path.edges.push_back(*e);
        start = end + 1;
    }
    if (!is_simple_od_path(s, path))
        throw ParseError(std::string(description),
                         "not a simple path for group '" + s.groups.at(group).id + "'");
    return path;
}

bool is_simple_od_path(const Scenario& s, const Path& path) {
    if (path.group >= s.groups.size() || path.edges.empty()) return false;
    const auto& g = s.groups[path.group];
    const auto& net = s.network;
    std::set<NodeIndex> visited{g.origin};
    NodeIndex at = g.origin;
    for (EdgeIndex e : path.edges) {
        if (e >= net.edges.size() || net.edges[e].tail != at) return false;
        at = net.edges[e].head;
        if (!visited.insert(at).second) return false;
    }
    return at == g.destination;
}

}  // namespace fairtoll
