#include "mempath/readout.hpp"

#include "mempath/error.hpp"

#include <limits>

namespace mempath {

std::vector<int> read_path(const Circuit& circuit, const CircuitState& state) {
    const Adjacency& adj = circuit.adjacency();
    const DeviceSet& devices = circuit.devices();
    const int n = static_cast<int>(adj.nodes.size());

    std::vector<char> visited(n, 0);
    int cur = adj.start_index;
    visited[cur] = 1;
    std::vector<int> path{adj.nodes[cur]};

    while (cur != adj.end_index) {
        int best_edge = -1;
        int best_nbr = -1;
        double best_g = -std::numeric_limits<double>::infinity();
        // incident lists ascend by edge id, so strict > keeps the lowest id
        for (const auto& [e, nbr] : adj.incident[cur]) {
            if (visited[nbr]) continue;
            const double g = devices.conductance(e, state.x[e]);
            if (g > best_g) {
                best_g = g;
                best_edge = e;
                best_nbr = nbr;
            }
        }
        if (best_edge < 0)
            fail(ErrorKind::ReadoutStuck,
                 "no unvisited neighbor at node " + std::to_string(adj.nodes[cur]));
        cur = best_nbr;
        visited[cur] = 1;
        path.push_back(adj.nodes[cur]);
        if (static_cast<int>(path.size()) > n)
            fail(ErrorKind::ReadoutOverlong, "walk exceeded node count");
    }
    return path;
}

PathMetrics compute_delta_g(const Circuit& circuit, const CircuitState& state,
                            const PathOracle& oracle) {
    const Adjacency& adj = circuit.adjacency();
    const DeviceSet& devices = circuit.devices();
    if (oracle.path.size() < 2)
        fail(ErrorKind::ConfigInvalid, "oracle path must contain at least two nodes");

    std::vector<int> dense(oracle.path.size());
    for (std::size_t i = 0; i < oracle.path.size(); ++i) {
        auto it = adj.index.find(oracle.path[i]);
        if (it == adj.index.end())
            fail(ErrorKind::ConfigInvalid,
                 "oracle node " + std::to_string(oracle.path[i]) + " not in graph");
        dense[i] = it->second;
    }

    std::vector<char> on_path(circuit.edge_count(), 0);
    std::vector<int> path_edge(oracle.path.size() - 1, -1);
    for (std::size_t i = 0; i + 1 < dense.size(); ++i) {
        for (const auto& [e, nbr] : adj.incident[dense[i]]) {
            if (nbr == dense[i + 1]) {
                path_edge[i] = e;
                on_path[e] = 1;
                break;
            }
        }
        if (path_edge[i] < 0)
            fail(ErrorKind::ConfigInvalid, "oracle path edge missing from graph");
    }

    PathMetrics m;
    const double g_span = devices.delta_g_max();
    double margin = std::numeric_limits<double>::infinity();
    bool any_rival = false;
    for (std::size_t i = 0; i + 1 < dense.size(); ++i) {
        const double g_path = devices.conductance(path_edge[i], state.x[path_edge[i]]);
        double best_rival = -std::numeric_limits<double>::infinity();
        bool has_rival = false;
        for (const auto& [e, nbr] : adj.incident[dense[i]]) {
            if (on_path[e]) continue;
            has_rival = true;
            best_rival = std::max(best_rival, devices.conductance(e, state.x[e]));
        }
        if (has_rival) {
            any_rival = true;
            margin = std::min(margin, g_path - best_rival);
        }
    }
    m.delta_g = any_rival ? margin : g_span;
    m.delta_g_norm = m.delta_g / g_span;
    m.success = m.delta_g > 0.0;

    try {
        m.read_path = read_path(circuit, state);
    } catch (const Error& err) {
        if (err.kind() != ErrorKind::ReadoutStuck && err.kind() != ErrorKind::ReadoutOverlong)
            throw;
        m.read_path.clear();
    }
    m.matches_oracle = !m.read_path.empty() && m.read_path == oracle.path;
    return m;
}

} // namespace mempath
