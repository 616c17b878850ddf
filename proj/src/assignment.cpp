#include "fairtoll/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>

namespace fairtoll {

bool TollVector::is_zero() const {
    return std::all_of(per_edge.begin(), per_edge.end(), [](double t) { return t == 0.0; });
}

TollVector make_tolls(const Scenario& s, const std::vector<std::pair<std::string, double>>& entries) {
    TollVector tolls = TollVector::zero(s);
    for (const auto& [id, value] : entries) {
        auto e = s.network.find_edge(id);
        if (!e) throw DomainError("toll on unknown edge '" + id + "'");
        if (!std::isfinite(value) || value < 0.0)
            throw DomainError("toll on edge '" + id + "' must be finite and nonnegative");
        tolls.per_edge[*e] = value;
    }
    return tolls;
}

// ---------------------------------------------------------------------------
// FlowPattern

FlowPattern::FlowPattern(const Scenario& s, std::vector<std::vector<PathFlow>> per_group) {
    if (per_group.size() != s.group_count())
        throw DomainError("flow pattern must list every group");
    const std::size_t E = s.edge_count();
    paths_.resize(per_group.size());
    group_edge_.assign(per_group.size(), std::vector<double>(E, 0.0));
    edge_.assign(E, 0.0);

    for (GroupIndex g = 0; g < per_group.size(); ++g) {
        auto& merged = paths_[g];
        for (auto& pf : per_group[g]) {
            if (!(pf.flow >= 0.0) || !std::isfinite(pf.flow))
                throw DomainError("path flow for group '" + s.groups[g].id + "' must be nonnegative");
            pf.path.group = g;
            if (!is_simple_od_path(s, pf.path))
                throw DomainError("path " + describe_path(s.network, pf.path) + " does not connect group '" +
                                  s.groups[g].id + "'");
            if (pf.flow == 0.0) continue;
            auto it = std::find_if(merged.begin(), merged.end(),
                                   [&](const PathFlow& m) { return m.path.edges == pf.path.edges; });
            if (it != merged.end()) it->flow += pf.flow;
            else merged.push_back(std::move(pf));
        }
        std::sort(merged.begin(), merged.end(), [&](const PathFlow& a, const PathFlow& b) {
            return path_less(s.network, a.path, b.path);
        });
        for (const auto& pf : merged)
            for (EdgeIndex e : pf.path.edges) group_edge_[g][e] += pf.flow;
    }
    for (GroupIndex g = 0; g < group_edge_.size(); ++g)
        for (EdgeIndex e = 0; e < E; ++e) edge_[e] += group_edge_[g][e];
}

double FlowPattern::group_total(GroupIndex g) const {
    double sum = 0.0;
    for (const auto& pf : paths_.at(g)) sum += pf.flow;
    return sum;
}

bool is_feasible(const Scenario& s, const FlowPattern& f, double rel_tol) {
    if (f.group_count() != s.group_count()) return false;
    for (GroupIndex g = 0; g < s.group_count(); ++g) {
        for (const auto& pf : f.paths(g))
            if (pf.flow < 0.0) return false;
        const double d = s.groups[g].demand;
        if (std::abs(f.group_total(g) - d) > rel_tol * std::max(1.0, d)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

double potential_of(const Scenario& s, const TollVector& tolls, std::span<const double> x,
                    const std::vector<std::vector<double>>& xg) {
    double phi = 0.0;
    for (EdgeIndex e = 0; e < s.edge_count(); ++e) phi += s.network.edges[e].latency.integral(x[e]);
    for (GroupIndex g = 0; g < s.group_count(); ++g) {
        const double inv_vot = 1.0 / s.groups[g].vot;
        for (EdgeIndex e = 0; e < s.edge_count(); ++e) phi += inv_vot * xg[g][e] * tolls.per_edge[e];
    }
    return phi;
}

void check_tolls(const Scenario& s, const TollVector& tolls) {
    if (tolls.per_edge.size() != s.edge_count())
        throw DomainError("toll vector size does not match the edge count");
    for (double t : tolls.per_edge)
        if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("tolls must be finite and nonnegative");
}

std::vector<std::vector<double>> group_flows_of(const FlowPattern& f) {
    std::vector<std::vector<double>> xg;
    for (GroupIndex g = 0; g < f.group_count(); ++g) xg.push_back(f.group_edge_flows(g));
    return xg;
}

}  // namespace

double beckmann_potential(const Scenario& s, const TollVector& tolls, const FlowPattern& f) {
    check_tolls(s, tolls);
    return potential_of(s, tolls, f.edge_flows(), group_flows_of(f));
}

double path_cost(const Scenario& s, const TollVector& tolls, std::span<const double> edge_flows,
                 const Path& path) {
    const double vot = s.groups.at(path.group).vot;
    double cost = 0.0;
    for (EdgeIndex e : path.edges)
        cost += vot * s.network.edges[e].latency(edge_flows[e]) + tolls.per_edge[e];
    return cost;
}

double total_system_cost(const Scenario& s, const FlowPattern& f) {
    double cost = 0.0;
    const auto& x = f.edge_flows();
    for (EdgeIndex e = 0; e < s.edge_count(); ++e) {
        double weighted = 0.0;
        for (GroupIndex g = 0; g < f.group_count(); ++g) weighted += s.groups[g].vot * f.group_edge_flows(g)[e];
        if (weighted != 0.0) cost += weighted * s.network.edges[e].latency(x[e]);
    }
    return cost;
}

double total_revenue(const TollVector& tolls, std::span<const double> edge_flows) {
    if (edge_flows.size() != tolls.per_edge.size())
        throw DomainError("edge flow vector size does not match the toll vector");
    double revenue = 0.0;
    for (std::size_t e = 0; e < edge_flows.size(); ++e) {
        if (edge_flows[e] < 0.0) throw DomainError("edge flows must be nonnegative");
        revenue += tolls.per_edge[e] * edge_flows[e];
    }
    return revenue;
}

// ---------------------------------------------------------------------------
// Shortest paths

namespace {

Path shortest_path_with_weights(const Scenario& s, GroupIndex g, const std::vector<double>& w) {
    const auto& net = s.network;
    const auto& group = s.groups.at(g);
    const std::size_t N = net.nodes.size();
    constexpr double inf = std::numeric_limits<double>::infinity();

    std::vector<std::vector<EdgeIndex>> out(N);
    for (EdgeIndex e = 0; e < net.edges.size(); ++e)
        if (net.edges[e].tail != net.edges[e].head) out[net.edges[e].tail].push_back(e);
    for (auto& list : out)
        std::sort(list.begin(), list.end(),
                  [&](EdgeIndex a, EdgeIndex b) { return net.edges[a].id < net.edges[b].id; });

    std::vector<double> dist(N, inf);
    using Item = std::pair<double, NodeIndex>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[group.origin] = 0.0;
    heap.emplace(0.0, group.origin);
    while (!heap.empty()) {
        auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        for (EdgeIndex e : out[u]) {
            NodeIndex v = net.edges[e].head;
            double nd = d + w[e];
            if (nd < dist[v]) {
                dist[v] = nd;
                heap.emplace(nd, v);
            }
        }
    }
    if (dist[group.destination] == inf)
        throw DisconnectedError("disconnected O-D pair for group '" + group.id + "'");

    // Lexicographically smallest simple path among the tight edges of the shortest-path tree.
    auto tight = [&](EdgeIndex e) {
        const auto& edge = net.edges[e];
        if (dist[edge.tail] == inf) return false;
        double slack = dist[edge.tail] + w[e] - dist[edge.head];
        return slack <= 1e-12 * std::max(1.0, std::abs(dist[edge.head]));
    };
    Path path{{}, g};
    std::vector<char> on_path(N, 0);
    auto dfs = [&](auto&& self, NodeIndex u) -> bool {
        if (u == group.destination) return true;
        on_path[u] = 1;
        for (EdgeIndex e : out[u]) {
            NodeIndex v = net.edges[e].head;
            if (on_path[v] || !tight(e)) continue;
            path.edges.push_back(e);
            if (self(self, v)) return true;
            path.edges.pop_back();
        }
        on_path[u] = 0;
        return false;
    };
    if (!dfs(dfs, group.origin))
        throw std::logic_error("shortest path reconstruction failed for group '" + group.id + "'");
    return path;
}

std::vector<double> generalized_weights(const Scenario& s, const TollVector& tolls, GroupIndex g,
                                        const std::vector<double>& times) {
    const double inv_vot = 1.0 / s.groups[g].vot;
    std::vector<double> w(s.edge_count());
    for (EdgeIndex e = 0; e < w.size(); ++e) w[e] = times[e] + tolls.per_edge[e] * inv_vot;
    return w;
}

std::vector<double> edge_times(const Scenario& s, std::span<const double> x) {
    std::vector<double> t(s.edge_count());
    for (EdgeIndex e = 0; e < t.size(); ++e) t[e] = s.network.edges[e].latency(x[e]);
    return t;
}

}  // namespace

Path group_generalized_shortest_path(const Scenario& s, const TollVector& tolls, GroupIndex g,
                                     std::span<const double> edge_flows) {
    check_tolls(s, tolls);
    if (edge_flows.size() != s.edge_count()) throw DomainError("edge flow vector size mismatch");
    for (double x : edge_flows)
        if (!(x >= 0.0)) throw DomainError("edge flows must be nonnegative");
    return shortest_path_with_weights(s, g, generalized_weights(s, tolls, g, edge_times(s, edge_flows)));
}

// ---------------------------------------------------------------------------
// Frank-Wolfe

namespace {

struct ActivePath {
    Path path;
    double flow;
};

struct IterateState {
    std::vector<std::vector<ActivePath>> active;
    std::vector<double> x;
    std::vector<std::vector<double>> xg;

    void rebuild(std::size_t E) {
        x.assign(E, 0.0);
        for (auto& row : xg) std::fill(row.begin(), row.end(), 0.0);
        for (GroupIndex g = 0; g < active.size(); ++g)
            for (const auto& ap : active[g])
                for (EdgeIndex e : ap.path.edges) xg[g][e] += ap.flow;
        for (const auto& row : xg)
            for (EdgeIndex e = 0; e < E; ++e) x[e] += row[e];
    }
};

void add_flow(std::vector<ActivePath>& paths, const Path& path, double flow) {
    for (auto& ap : paths)
        if (ap.path.edges == path.edges) {
            ap.flow += flow;
            return;
        }
    paths.push_back({path, flow});
}

double sum_over_path(const std::vector<double>& w, const Path& p) {
    double c = 0.0;
    for (EdgeIndex e : p.edges) c += w[e];
    return c;
}

EquilibriumSolution assemble(const Scenario& s, const TollVector& tolls, const IterateState& st,
                             const std::vector<Path>& best_paths, double rel_gap, std::size_t iterations) {
    std::vector<std::vector<PathFlow>> per_group(s.group_count());
    for (GroupIndex g = 0; g < s.group_count(); ++g)
        for (const auto& ap : st.active[g]) per_group[g].push_back(PathFlow{ap.path, ap.flow});

    EquilibriumSolution sol;
    sol.flows = FlowPattern(s, std::move(per_group));
    sol.demand.reserve(s.group_count());
    for (GroupIndex g = 0; g < s.group_count(); ++g) {
        sol.demand.push_back(s.groups[g].demand);
        sol.group_cost.push_back(path_cost(s, tolls, sol.flows.edge_flows(), best_paths[g]));
    }
    sol.total_cost = total_system_cost(s, sol.flows);
    sol.revenue = total_revenue(tolls, sol.flows.edge_flows());
    sol.gap = rel_gap;
    sol.iterations = iterations;
    return sol;
}

}  // namespace

EquilibriumSolution solve_exogenous_equilibrium(const Scenario& s, const TollVector& tolls,
                                                const SolverOptions& options) {
    check_tolls(s, tolls);
    if (!(options.tolerance > 0.0)) throw DomainError("solver tolerance must be positive");
    if (options.line_search_steps < 1) throw DomainError("line search needs at least one bisection step");

    const std::size_t E = s.edge_count();
    const std::size_t G = s.group_count();

    IterateState st;
    st.active.resize(G);
    st.xg.assign(G, std::vector<double>(E, 0.0));
    {
        const std::vector<double> zero(E, 0.0);
        for (GroupIndex g = 0; g < G; ++g)
            st.active[g].push_back({group_generalized_shortest_path(s, tolls, g, zero), s.groups[g].demand});
    }
    st.rebuild(E);
    double phi = potential_of(s, tolls, st.x, st.xg);

    std::vector<Path> best(G);
    std::vector<double> dx(E);
    std::vector<std::vector<double>> dxg(G, std::vector<double>(E));

    // Bisection on the sign of a nondecreasing directional derivative over [0, hi].
    auto line_search = [&](auto&& slope, double hi) {
        if (slope(hi) <= 0.0) return hi;
        double lo = 0.0;
        for (int k = 0; k < options.line_search_steps; ++k) {
            const double mid = 0.5 * (lo + hi);
            if (slope(mid) > 0.0) hi = mid;
            else lo = mid;
        }
        return 0.5 * (lo + hi);
    };

    for (std::size_t it = 0;; ++it) {
        const auto times = edge_times(s, st.x);
        double fw_gap = 0.0;
        double money_gap = 0.0;  // sum over groups of v_g * gap_g
        for (GroupIndex g = 0; g < G; ++g) {
            const auto w = generalized_weights(s, tolls, g, times);
            best[g] = shortest_path_with_weights(s, g, w);
            double current = 0.0;
            for (const auto& ap : st.active[g]) current += ap.flow * sum_over_path(w, ap.path);
            const double gap = std::max(0.0, current - s.groups[g].demand * sum_over_path(w, best[g]));
            fw_gap += gap;
            money_gap += s.groups[g].vot * gap;
        }

        const double rel_gap = phi > 0.0 ? fw_gap / phi : fw_gap;
        if (rel_gap <= options.tolerance || it >= options.max_iterations) {
            auto sol = assemble(s, tolls, st, best, rel_gap, it);
            // Path costs of used flow differ from the minimum by the per-group gap, so the
            // cost identity holds up to the money-weighted gap.
            double identity = 0.0;
            for (GroupIndex g = 0; g < G; ++g) identity += sol.group_cost[g] * sol.demand[g];
            const double residual = std::abs(sol.total_cost - (identity - sol.revenue));
            if (residual > money_gap + 1e-9 * std::max(1.0, sol.total_cost))
                throw std::logic_error("cost identity violated after solve: residual " + std::to_string(residual));
            if (rel_gap <= options.tolerance) return sol;
            throw ConvergenceError("no convergence within " + std::to_string(options.max_iterations) +
                                       " iterations (relative gap " + std::to_string(rel_gap) + ")",
                                   std::move(sol));
        }

        if (options.pairwise_steps) {
            // One sweep over the groups: shift flow from the costliest used path to the current
            // all-or-nothing path of that group, others held fixed.
            for (GroupIndex g = 0; g < G; ++g) {
                auto& paths = st.active[g];
                const double d = s.groups[g].demand;
                const auto w = generalized_weights(s, tolls, g, edge_times(s, st.x));
                const Path target = shortest_path_with_weights(s, g, w);
                std::size_t worst = 0;
                double c_worst = -std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < paths.size(); ++i) {
                    const double c = sum_over_path(w, paths[i].path);
                    if (c > c_worst) {
                        c_worst = c;
                        worst = i;
                    }
                }
                if (paths[worst].path.edges == target.edges || !(c_worst > sum_over_path(w, target))) continue;

                std::fill(dx.begin(), dx.end(), 0.0);
                for (EdgeIndex e : target.edges) dx[e] += 1.0;
                for (EdgeIndex e : paths[worst].path.edges) dx[e] -= 1.0;
                double toll_slope = 0.0;
                for (EdgeIndex e = 0; e < E; ++e) toll_slope += dx[e] * tolls.per_edge[e];
                toll_slope /= s.groups[g].vot;
                auto slope = [&](double delta) {
                    double v = toll_slope;
                    for (EdgeIndex e = 0; e < E; ++e)
                        if (dx[e] != 0.0) v += dx[e] * s.network.edges[e].latency(std::max(0.0, st.x[e] + delta * dx[e]));
                    return v;
                };
                const double available = paths[worst].flow;
                double delta = line_search(slope, available);
                if (available - delta <= 1e-15 * d) delta = available;

                for (EdgeIndex e = 0; e < E; ++e) {
                    st.x[e] += delta * dx[e];
                    st.xg[g][e] += delta * dx[e];
                }
                paths[worst].flow -= delta;
                auto it_target = std::find_if(paths.begin(), paths.end(),
                                              [&](const ActivePath& ap) { return ap.path.edges == target.edges; });
                if (it_target != paths.end()) it_target->flow += delta;
                else paths.push_back({target, delta});
                std::erase_if(paths, [](const ActivePath& ap) { return ap.flow <= 0.0; });
            }
            // Exchanges between groups sharing an O-D pair leave edge flows untouched, so the
            // potential is linear along them; these fix the sorting of groups onto tolled paths.
            for (GroupIndex g = 0; g < G; ++g) {
                for (GroupIndex h = g + 1; h < G; ++h) {
                    if (s.groups[g].origin != s.groups[h].origin ||
                        s.groups[g].destination != s.groups[h].destination)
                        continue;
                    const double weight = 1.0 / s.groups[g].vot - 1.0 / s.groups[h].vot;
                    if (weight == 0.0) continue;
                    const std::size_t ng = st.active[g].size(), nh = st.active[h].size();
                    for (std::size_t i = 0; i < ng; ++i) {
                        for (std::size_t j = 0; j < nh; ++j) {
                            const Path p = st.active[g][i].path;
                            const Path q = st.active[h][j].path;
                            const double fp = st.active[g][i].flow, fq = st.active[h][j].flow;
                            if (fp <= 0.0 || fq <= 0.0 || p.edges == q.edges) continue;
                            double toll_p = 0.0, toll_q = 0.0;
                            for (EdgeIndex e : p.edges) toll_p += tolls.per_edge[e];
                            for (EdgeIndex e : q.edges) toll_q += tolls.per_edge[e];
                            if ((toll_q - toll_p) * weight >= 0.0) continue;
                            const double delta = std::min(fp, fq);
                            st.active[g][i].flow -= delta;
                            st.active[h][j].flow -= delta;
                            add_flow(st.active[g], Path{q.edges, g}, delta);
                            add_flow(st.active[h], Path{p.edges, h}, delta);
                        }
                    }
                    std::erase_if(st.active[g], [](const ActivePath& ap) { return ap.flow <= 0.0; });
                    std::erase_if(st.active[h], [](const ActivePath& ap) { return ap.flow <= 0.0; });
                }
            }
        } else {
            // Classic step toward the joint all-or-nothing assignment.
            std::fill(dx.begin(), dx.end(), 0.0);
            double toll_slope = 0.0;
            for (GroupIndex g = 0; g < G; ++g) {
                auto& row = dxg[g];
                std::fill(row.begin(), row.end(), 0.0);
                for (EdgeIndex e : best[g].edges) row[e] += s.groups[g].demand;
                for (EdgeIndex e = 0; e < E; ++e) {
                    row[e] -= st.xg[g][e];
                    dx[e] += row[e];
                    toll_slope += row[e] * tolls.per_edge[e] / s.groups[g].vot;
                }
            }
            auto slope = [&](double lambda) {
                double v = toll_slope;
                for (EdgeIndex e = 0; e < E; ++e)
                    if (dx[e] != 0.0) v += dx[e] * s.network.edges[e].latency(std::max(0.0, st.x[e] + lambda * dx[e]));
                return v;
            };
            const double lambda = line_search(slope, 1.0);
            for (GroupIndex g = 0; g < G; ++g) {
                auto& paths = st.active[g];
                for (auto& ap : paths) ap.flow *= (1.0 - lambda);
                auto it_best = std::find_if(paths.begin(), paths.end(),
                                            [&](const ActivePath& ap) { return ap.path.edges == best[g].edges; });
                if (it_best != paths.end()) it_best->flow += lambda * s.groups[g].demand;
                else paths.push_back({best[g], lambda * s.groups[g].demand});
                std::erase_if(paths, [](const ActivePath& ap) { return ap.flow <= 0.0; });
            }
        }

        // Rounding residue is dropped and demand conservation restored before edge flows are
        // recomputed from paths.
        for (GroupIndex g = 0; g < G; ++g) {
            const double d = s.groups[g].demand;
            std::erase_if(st.active[g], [&](const ActivePath& ap) { return ap.flow <= 1e-13 * d; });
            double total = 0.0;
            for (const auto& ap : st.active[g]) total += ap.flow;
            for (auto& ap : st.active[g]) ap.flow *= s.groups[g].demand / total;
        }
        st.rebuild(E);

        const double next_phi = potential_of(s, tolls, st.x, st.xg);
        if (next_phi > phi + 1e-12 * (1.0 + std::abs(phi)))
            throw std::logic_error("Frank-Wolfe step increased the potential");
        phi = next_phi;
    }
}

// ---------------------------------------------------------------------------
// Closed-form parallel affine equilibrium

namespace {

// Solves A x = b in place; false when A is numerically singular.
bool gauss_solve(std::vector<std::vector<double>>& A, std::vector<double>& b) {
    const std::size_t n = b.size();
    double scale = 0.0;
    for (const auto& row : A)
        for (double v : row) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) return false;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        if (std::abs(A[piv][col]) <= 1e-13 * scale) return false;
        std::swap(A[piv], A[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col || A[r][col] == 0.0) continue;
            const double factor = A[r][col] / A[col][col];
            for (std::size_t c = col; c < n; ++c) A[r][c] -= factor * A[col][c];
            b[r] -= factor * b[col];
        }
    }
    for (std::size_t i = 0; i < n; ++i) b[i] /= A[i][i];
    return true;
}

}  // namespace

EquilibriumSolution solve_parallel_affine_closed_form(const Scenario& s, const TollVector& tolls) {
    check_tolls(s, tolls);
    const auto& edges = s.network.edges;
    if (edges.empty() || s.groups.empty()) throw UnsupportedError("closed form needs edges and groups");
    const NodeIndex tail = edges.front().tail;
    const NodeIndex head = edges.front().head;
    for (const auto& e : edges) {
        if (e.tail != tail || e.head != head)
            throw UnsupportedError("closed form requires a two-node network of parallel edges");
        if (e.latency.coeff != 0.0 && e.latency.exponent != 1.0)
            throw UnsupportedError("closed form requires affine latencies (edge '" + e.id + "')");
    }
    for (const auto& g : s.groups)
        if (g.origin != tail || g.destination != head)
            throw UnsupportedError("closed form requires every group on the parallel O-D pair");

    const std::size_t E = edges.size();
    const std::size_t G = s.groups.size();
    if (E > 20) throw UnsupportedError("closed form limited to 20 parallel edges");

    // Higher value-of-time groups sit on higher-toll edges; the assignment is a staircase over
    // edges sorted by toll (descending) and groups sorted by value-of-time (descending).
    std::vector<EdgeIndex> edge_order(E);
    std::iota(edge_order.begin(), edge_order.end(), 0);
    std::stable_sort(edge_order.begin(), edge_order.end(),
                     [&](EdgeIndex a, EdgeIndex b) { return tolls.per_edge[a] > tolls.per_edge[b]; });
    std::vector<GroupIndex> group_order(G);
    std::iota(group_order.begin(), group_order.end(), 0);
    std::stable_sort(group_order.begin(), group_order.end(),
                     [&](GroupIndex a, GroupIndex b) { return s.groups[a].vot > s.groups[b].vot; });
    std::vector<double> cum(G + 1, 0.0);
    for (std::size_t k = 0; k < G; ++k) cum[k + 1] = cum[k] + s.groups[group_order[k]].demand;
    const double total = cum[G];

    auto cost = [&](GroupIndex g, EdgeIndex e, double x) {
        return s.groups[g].vot * edges[e].latency(x) + tolls.per_edge[e];
    };

    // Boundary position p between consecutive used edges: even p = 2(k-1) means the boundary
    // lies inside group k (which is indifferent between the two edges); odd p = 2k-1 means it
    // coincides with the end of group k.
    const int positions = static_cast<int>(2 * G - 1);

    std::vector<EdgeIndex> used;
    std::vector<int> pos;
    std::optional<EquilibriumSolution> found;

    auto try_structure = [&]() -> bool {
        const std::size_t m = used.size();
        std::vector<std::vector<double>> A(m, std::vector<double>(m, 0.0));
        std::vector<double> b(m, 0.0);
        for (std::size_t j = 0; j + 1 < m; ++j) {
            const int p = pos[j];
            if (p % 2 == 0) {
                const double v = s.groups[group_order[static_cast<std::size_t>(p / 2)]].vot;
                const auto& l1 = edges[used[j]].latency;
                const auto& l2 = edges[used[j + 1]].latency;
                A[j][j] = v * l1.coeff;
                A[j][j + 1] = -v * l2.coeff;
                b[j] = v * (l2.free_flow - l1.free_flow) + tolls.per_edge[used[j + 1]] - tolls.per_edge[used[j]];
            } else {
                for (std::size_t i = 0; i <= j; ++i) A[j][i] = 1.0;
                b[j] = cum[static_cast<std::size_t>((p + 1) / 2)];
            }
        }
        for (std::size_t i = 0; i < m; ++i) A[m - 1][i] = 1.0;
        b[m - 1] = total;
        if (!gauss_solve(A, b)) return false;

        const double tol = 1e-10 * std::max(1.0, total);
        std::vector<double> x(E, 0.0);
        double running = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            if (b[j] < -tol) return false;
            x[used[j]] = std::max(0.0, b[j]);
            running += x[used[j]];
            if (j + 1 < m && pos[j] % 2 == 0) {
                const std::size_t k = static_cast<std::size_t>(pos[j] / 2);
                if (running < cum[k] - tol || running > cum[k + 1] + tol) return false;
            }
        }

        // Staircase assignment of sorted groups onto the used edges.
        std::vector<std::vector<PathFlow>> per_group(G);
        std::size_t j = 0;
        double left_on_edge = x[used[0]];
        for (std::size_t k = 0; k < G; ++k) {
            const GroupIndex g = group_order[k];
            double need = s.groups[g].demand;
            while (need > 0.0) {
                while (j + 1 < m && left_on_edge <= 0.0) left_on_edge = x[used[++j]];
                const double take = (j + 1 == m) ? need : std::min(need, left_on_edge);
                if (take > 0.0) per_group[g].push_back(PathFlow{Path{{used[j]}, g}, take});
                need -= take;
                left_on_edge -= take;
                if (j + 1 == m) break;
            }
        }

        // Equilibrium conditions over every edge, including unused ones.
        for (GroupIndex g = 0; g < G; ++g) {
            double best = std::numeric_limits<double>::infinity();
            for (EdgeIndex e = 0; e < E; ++e) best = std::min(best, cost(g, e, x[e]));
            const double slack = 1e-9 * std::max(1.0, std::abs(best));
            for (const auto& pf : per_group[g])
                if (pf.flow > tol && cost(g, pf.path.edges[0], x[pf.path.edges[0]]) > best + slack) return false;
        }

        EquilibriumSolution sol;
        sol.flows = FlowPattern(s, std::move(per_group));
        for (GroupIndex g = 0; g < G; ++g) {
            double best = std::numeric_limits<double>::infinity();
            for (EdgeIndex e = 0; e < E; ++e) best = std::min(best, cost(g, e, sol.flows.edge_flows()[e]));
            sol.group_cost.push_back(best);
            sol.demand.push_back(s.groups[g].demand);
        }
        sol.total_cost = total_system_cost(s, sol.flows);
        sol.revenue = total_revenue(tolls, sol.flows.edge_flows());
        sol.gap = 0.0;
        sol.iterations = 0;
        found = std::move(sol);
        return true;
    };

    // Nondecreasing boundary positions, never repeating an end-of-group position (that would
    // leave a used edge empty) and never using the end of the last group.
    auto enumerate_positions = [&](auto&& self, std::size_t j, int lowest) -> bool {
        if (j + 1 >= used.size()) return try_structure();
        for (int p = lowest; p < positions; ++p) {
            pos[j] = p;
            if (self(self, j + 1, p % 2 == 1 ? p + 1 : p)) return true;
        }
        return false;
    };

    for (std::size_t mask = 1; mask < (std::size_t{1} << E); ++mask) {
        used.clear();
        for (std::size_t j = 0; j < E; ++j)
            if (mask & (std::size_t{1} << j)) used.push_back(edge_order[j]);
        pos.assign(used.size(), 0);
        if (enumerate_positions(enumerate_positions, 0, 0)) return std::move(*found);
    }
    throw UnsupportedError("no nonsingular equilibrium structure found (constant-latency ties?)");
}

// ---------------------------------------------------------------------------
// Grid search for the minimum total cost

SystemOptimum search_system_optimal(const Scenario& s, std::size_t grid) {
    if (grid < 2) throw DomainError("system optimum grid must be at least 2");
    const std::size_t E = s.edge_count();
    const std::size_t G = s.group_count();

    std::vector<std::vector<Path>> paths(G);
    std::size_t path_total = 0;
    for (GroupIndex g = 0; g < G; ++g) {
        auto set = enumerate_paths(s, g, kSystemOptimumPathCap + 1);
        path_total += set.paths.size();
        if (set.truncated || path_total > kSystemOptimumPathCap)
            throw UnsupportedError("system optimum search supports at most " +
                                   std::to_string(kSystemOptimumPathCap) + " paths in total");
        paths[g] = std::move(set.paths);
    }

    // Compositions of `grid` units over each group's paths.
    std::vector<std::vector<std::vector<std::size_t>>> splits(G);
    double combos = 1.0;
    for (GroupIndex g = 0; g < G; ++g) {
        std::vector<std::size_t> cur(paths[g].size(), 0);
        auto gen = [&](auto&& self, std::size_t i, std::size_t left) -> void {
            if (i + 1 == cur.size()) {
                cur[i] = left;
                splits[g].push_back(cur);
                return;
            }
            for (std::size_t k = 0; k <= left; ++k) {
                cur[i] = k;
                self(self, i + 1, left - k);
            }
        };
        gen(gen, 0, grid);
        combos *= static_cast<double>(splits[g].size());
    }
    if (combos > 5e7) throw UnsupportedError("system optimum grid too fine for this instance");

    std::vector<double> x(E, 0.0), vx(E, 0.0);
    std::vector<std::size_t> choice(G, 0), best_choice(G, 0);
    double best_cost = std::numeric_limits<double>::infinity();
    std::size_t evaluated = 0;

    auto apply = [&](GroupIndex g, std::size_t idx, double sign) {
        const double unit = s.groups[g].demand / static_cast<double>(grid);
        const double vot = s.groups[g].vot;
        const auto& split = splits[g][idx];
        for (std::size_t p = 0; p < split.size(); ++p) {
            if (split[p] == 0) continue;
            const double f = sign * unit * static_cast<double>(split[p]);
            for (EdgeIndex e : paths[g][p].edges) {
                x[e] += f;
                vx[e] += vot * f;
            }
        }
    };
    auto search = [&](auto&& self, GroupIndex g) -> void {
        if (g == G) {
            ++evaluated;
            double c = 0.0;
            for (EdgeIndex e = 0; e < E; ++e)
                if (vx[e] > 0.0) c += vx[e] * s.network.edges[e].latency(std::max(0.0, x[e]));
            if (c < best_cost) {
                best_cost = c;
                best_choice = choice;
            }
            return;
        }
        for (std::size_t idx = 0; idx < splits[g].size(); ++idx) {
            choice[g] = idx;
            apply(g, idx, +1.0);
            self(self, g + 1);
            apply(g, idx, -1.0);
        }
    };
    search(search, 0);

    std::vector<std::vector<PathFlow>> per_group(G);
    for (GroupIndex g = 0; g < G; ++g) {
        const auto& split = splits[g][best_choice[g]];
        for (std::size_t p = 0; p < split.size(); ++p)
            per_group[g].push_back(PathFlow{paths[g][p], s.groups[g].demand * static_cast<double>(split[p]) /
                                                             static_cast<double>(grid)});
    }

    SystemOptimum out;
    out.flow = FlowPattern(s, std::move(per_group));
    out.cost = total_system_cost(s, out.flow);
    out.evaluated = evaluated;

    // Marginal cost of one unit on any path is at most sum_e (v_max t_e(X) + V t_e'(X)) with X the
    // total demand and V the value-of-time weighted demand; moving to the nearest grid point
    // shifts at most half a step per path.
    double total_demand = 0.0, weighted = 0.0, vmax = 0.0;
    for (const auto& g : s.groups) {
        total_demand += g.demand;
        weighted += g.vot * g.demand;
        vmax = std::max(vmax, g.vot);
    }
    double marginal = 0.0;
    for (const auto& e : s.network.edges)
        marginal += vmax * e.latency(total_demand) + weighted * e.latency.derivative(total_demand);
    for (GroupIndex g = 0; g < G; ++g)
        out.lipschitz_bound += 2.0 * marginal * static_cast<double>(paths[g].size()) * 0.5 * s.groups[g].demand /
                               static_cast<double>(grid);
    return out;
}

}  // namespace fairtoll
