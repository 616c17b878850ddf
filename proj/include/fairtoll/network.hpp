#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fairtoll/error.hpp"

namespace fairtoll {

using NodeIndex = std::size_t;
using EdgeIndex = std::size_t;
using GroupIndex = std::size_t;

inline constexpr std::size_t kDefaultPathCap = 64;

/// Edge travel time t(x) = free_flow + coeff * x^exponent.
struct LatencyFn {
    double free_flow = 0.0;
    double coeff = 0.0;
    double exponent = 1.0;

    double operator()(double flow) const;
    /// Closed-form integral of t over [0, flow].
    double integral(double flow) const;
    /// dt/dx at `flow`.
    double derivative(double flow) const;
};

struct Edge {
    std::string id;
    NodeIndex tail = 0;
    NodeIndex head = 0;
    LatencyFn latency;
};

struct UserGroup {
    std::string id;
    double vot = 0.0;      // money per time unit
    double income = 0.0;   // ex-ante income
    double demand = 0.0;   // flow rate
    NodeIndex origin = 0;
    NodeIndex destination = 0;
};

struct Network {
    std::vector<std::string> nodes;
    std::vector<Edge> edges;

    std::optional<NodeIndex> find_node(std::string_view id) const;
    std::optional<EdgeIndex> find_edge(std::string_view id) const;
};

struct Scenario {
    Network network;
    std::vector<UserGroup> groups;
    double beta = 1.0;  // weight of the trip in ex-post income

    std::optional<GroupIndex> find_group(std::string_view id) const;
    std::size_t edge_count() const { return network.edges.size(); }
    std::size_t group_count() const { return groups.size(); }
};

/// Simple path for one group, stored as edge indices in travel order.
struct Path {
    std::vector<EdgeIndex> edges;
    GroupIndex group = 0;

    bool operator==(const Path&) const = default;
};

struct PathSet {
    std::vector<Path> paths;
    bool truncated = false;
};

/// Throws DomainError for negative or non-finite flow.
double travel_time(const Edge& edge, double flow);

/// Empty result means the scenario is well posed.
std::vector<std::string> validate_scenario(const Scenario& scenario);

/// Parses the JSON interchange document and validates it.
/// Throws ParseError or ValidationError.
Scenario load_scenario(std::string_view text);

/// Serializes with every number written as a shortest round-trip decimal string.
std::string save_scenario(const Scenario& scenario);

/// `name` is a file path or a built-in name; built-ins take precedence.
Scenario load_scenario_source(const std::string& name);

bool is_builtin_scenario(std::string_view name);
std::vector<std::string> builtin_scenario_names();
/// Throws Error for an unknown name.
Scenario builtin_scenario(std::string_view name);
std::string builtin_scenario_text(std::string_view name);

/// All simple paths of the group's O-D pair in lexicographic edge-id order.
/// Throws DisconnectedError when no path exists and DomainError when origin == destination.
PathSet enumerate_paths(const Scenario& scenario, GroupIndex group, std::size_t cap = kDefaultPathCap);

/// Lexicographic comparison of the edge-id sequences.
bool path_less(const Network& network, const Path& a, const Path& b);

/// Edge ids joined by '>' (e.g. "e1>e3").
std::string describe_path(const Network& network, const Path& path);

/// Parses a description produced by describe_path. Throws ParseError.
Path parse_path(const Scenario& scenario, GroupIndex group, std::string_view description);

/// Checks that `path` chains head-to-tail from the group's origin to its destination without
/// repeating a node.
bool is_simple_od_path(const Scenario& scenario, const Path& path);

}  // namespace fairtoll
