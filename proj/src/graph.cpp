#include "mempath/graph.hpp"

#include "mempath/error.hpp"
#include "mempath/format.hpp"
#include "mempath/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <deque>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace mempath {

using json = nlohmann::ordered_json;

Adjacency build_adjacency(const Graph& graph) {
    Adjacency adj;
    adj.nodes = graph.node_ids;
    adj.index.reserve(adj.nodes.size());
    for (size_t i = 0; i < adj.nodes.size(); ++i) {
        adj.index.emplace(adj.nodes[i], static_cast<int>(i));
    }
    auto dense = [&](int id) {
        auto it = adj.index.find(id);
        if (it == adj.index.end()) {
            fail(ErrorKind::MalformedFile, "edge references unknown node " + std::to_string(id));
        }
        return it->second;
    };
    adj.start_index = dense(graph.start);
    adj.end_index = dense(graph.end);
    adj.edge_u.reserve(graph.edges.size());
    adj.edge_v.reserve(graph.edges.size());
    adj.incident.assign(adj.nodes.size(), {});
    for (size_t e = 0; e < graph.edges.size(); ++e) {
        const int du = dense(graph.edges[e].u);
        const int dv = dense(graph.edges[e].v);
        adj.edge_u.push_back(du);
        adj.edge_v.push_back(dv);
        adj.incident[du].emplace_back(static_cast<int>(e), dv);
        adj.incident[dv].emplace_back(static_cast<int>(e), du);
    }
    return adj;
}

namespace {

// BFS distances in dense index space; unreachable nodes get -1. Neighbors are
// visited in ascending edge-id order, which keeps every consumer deterministic.
std::vector<int> bfs_distances(const Adjacency& adj, int source) {
    std::vector<int> dist(adj.nodes.size(), -1);
    std::deque<int> queue{source};
    dist[source] = 0;
    while (!queue.empty()) {
        const int node = queue.front();
        queue.pop_front();
        for (const auto& [edge, other] : adj.incident[node]) {
            if (dist[other] < 0) {
                dist[other] = dist[node] + 1;
                queue.push_back(other);
            }
        }
    }
    return dist;
}

// Canonical form: edges oriented so u is the BFS-closer endpoint (ties to the
// lower node id), sorted by unordered endpoint pair, ids renumbered from 0.
void canonicalize(Graph& graph) {
    Adjacency adj = build_adjacency(graph);
    const std::vector<int> dist = bfs_distances(adj, adj.start_index);
    for (size_t e = 0; e < graph.edges.size(); ++e) {
        Edge& edge = graph.edges[e];
        const int du = dist[adj.edge_u[e]];
        const int dv = dist[adj.edge_v[e]];
        const bool swap = dv < du || (dv == du && edge.v < edge.u);
        if (swap) {
            std::swap(edge.u, edge.v);
        }
    }
    std::sort(graph.edges.begin(), graph.edges.end(), [](const Edge& a, const Edge& b) {
        return std::minmax(a.u, a.v) < std::minmax(b.u, b.v);
    });
    for (size_t e = 0; e < graph.edges.size(); ++e) {
        graph.edges[e].id = static_cast<int>(e);
    }
    std::sort(graph.node_ids.begin(), graph.node_ids.end());
}

} // namespace

Graph prune(const Graph& graph) {
    if (graph.start < 0 || graph.end < 0) {
        fail(ErrorKind::ConfigInvalid, "prune requires start and end terminals");
    }
    Adjacency adj = build_adjacency(graph);
    const size_t n = adj.nodes.size();
    const size_t m = graph.edges.size();

    // Keep only the component containing start; end must be in it.
    std::vector<int> dist = bfs_distances(adj, adj.start_index);
    if (dist[adj.end_index] < 0) {
        fail(ErrorKind::DisconnectedTerminals,
             "start and end are in different components");
    }
    std::vector<bool> node_alive(n), edge_alive(m);
    for (size_t i = 0; i < n; ++i) {
        node_alive[i] = dist[i] >= 0;
    }
    std::vector<int> degree(n, 0);
    for (size_t e = 0; e < m; ++e) {
        edge_alive[e] = node_alive[adj.edge_u[e]] && node_alive[adj.edge_v[e]];
        if (edge_alive[e]) {
            ++degree[adj.edge_u[e]];
            ++degree[adj.edge_v[e]];
        }
    }

    // Strip degree-1 non-terminal nodes to fixpoint.
    std::deque<int> leaves;
    for (size_t i = 0; i < n; ++i) {
        const int id = adj.nodes[i];
        if (node_alive[i] && degree[i] <= 1 && id != graph.start && id != graph.end) {
            leaves.push_back(static_cast<int>(i));
        }
    }
    while (!leaves.empty()) {
        const int node = leaves.front();
        leaves.pop_front();
        if (!node_alive[node]) {
            continue;
        }
        node_alive[node] = false;
        for (const auto& [edge, other] : adj.incident[node]) {
            if (!edge_alive[edge]) {
                continue;
            }
            edge_alive[edge] = false;
            if (--degree[other] <= 1 && node_alive[other] &&
                adj.nodes[other] != graph.start && adj.nodes[other] != graph.end) {
                leaves.push_back(other);
            }
        }
    }

    Graph result;
    result.start = graph.start;
    result.end = graph.end;
    result.metadata = graph.metadata;
    for (size_t i = 0; i < n; ++i) {
        if (node_alive[i]) {
            result.node_ids.push_back(adj.nodes[i]);
        }
    }
    for (size_t e = 0; e < m; ++e) {
        if (edge_alive[e]) {
            result.edges.push_back(graph.edges[e]);
        }
    }
    canonicalize(result);
    return result;
}

PathOracle bfs_oracle(const Graph& graph) {
    Adjacency adj = build_adjacency(graph);
    const std::vector<int> dist = bfs_distances(adj, adj.start_index);
    if (dist[adj.end_index] < 0) {
        fail(ErrorKind::DisconnectedTerminals, "end not reachable from start");
    }

    // Shortest-path multiplicity by layer counting on the BFS DAG; saturating
    // adds keep the uniqueness decision exact on large graphs.
    constexpr std::uint64_t kCap = std::numeric_limits<std::uint64_t>::max() / 2;
    std::vector<std::uint64_t> count(adj.nodes.size(), 0);
    count[adj.start_index] = 1;
    std::vector<int> order(adj.nodes.size());
    for (size_t i = 0; i < order.size(); ++i) {
        order[i] = static_cast<int>(i);
    }
    std::sort(order.begin(), order.end(), [&](int a, int b) { return dist[a] < dist[b]; });
    for (const int node : order) {
        if (dist[node] < 0 || count[node] == 0) {
            continue;
        }
        for (const auto& [edge, other] : adj.incident[node]) {
            if (dist[other] == dist[node] + 1) {
                count[other] = std::min(kCap, count[other] + count[node]);
            }
        }
    }

    PathOracle oracle;
    oracle.length_n = dist[adj.end_index];
    oracle.unique = count[adj.end_index] == 1;

    // Walk back from end, taking the lowest-id predecessor in each layer.
    std::vector<int> reversed{graph.end};
    int node = adj.end_index;
    while (node != adj.start_index) {
        int best = -1;
        for (const auto& [edge, other] : adj.incident[node]) {
            if (dist[other] == dist[node] - 1 && count[other] > 0 &&
                (best < 0 || adj.nodes[other] < adj.nodes[best])) {
                best = other;
            }
        }
        node = best;
        reversed.push_back(adj.nodes[node]);
    }
    oracle.path.assign(reversed.rbegin(), reversed.rend());
    return oracle;
}

Graph grid_lattice(int rows, int cols, double removal_prob, std::mt19937_64& gen) {
    Graph graph;
    graph.node_ids.resize(static_cast<size_t>(rows) * cols);
    for (size_t i = 0; i < graph.node_ids.size(); ++i) {
        graph.node_ids[i] = static_cast<int>(i);
    }
    int next_id = 0;
    auto keep = [&] { return rng::uniform01(gen) >= removal_prob; };
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const int node = r * cols + c;
            if (c + 1 < cols && keep()) {
                graph.edges.push_back({next_id++, node, node + 1});
            }
            if (r + 1 < rows && keep()) {
                graph.edges.push_back({next_id++, node, node + cols});
            }
        }
    }
    return graph;
}

Graph ws_lattice(int n, int k, double beta, std::mt19937_64& gen) {
    Graph graph;
    graph.node_ids.resize(n);
    for (int i = 0; i < n; ++i) {
        graph.node_ids[i] = i;
    }
    auto key = [n](int a, int b) {
        const auto [lo, hi] = std::minmax(a, b);
        return static_cast<std::uint64_t>(lo) * n + hi;
    };
    std::unordered_set<std::uint64_t> present;
    struct Raw { int u, v; };
    std::vector<Raw> raw;
    raw.reserve(static_cast<size_t>(n) * k / 2);
    for (int j = 1; j <= k / 2; ++j) {
        for (int u = 0; u < n; ++u) {
            const int v = (u + j) % n;
            raw.push_back({u, v});
            present.insert(key(u, v));
        }
    }
    // Watts-Strogatz rewiring: each lattice edge keeps its near endpoint and,
    // with probability beta, gets a fresh far endpoint. Duplicate or self
    // edges are re-drawn.
    for (auto& edge : raw) {
        if (rng::uniform01(gen) >= beta) {
            continue;
        }
        int attempts = 0;
        while (attempts++ < 8 * n) {
            const int candidate = static_cast<int>(rng::uniform_below(gen, n));
            if (candidate == edge.u || present.contains(key(edge.u, candidate))) {
                continue;
            }
            present.erase(key(edge.u, edge.v));
            present.insert(key(edge.u, candidate));
            edge.v = candidate;
            break;
        }
    }
    int next_id = 0;
    for (const auto& edge : raw) {
        graph.edges.push_back({next_id++, edge.u, edge.v});
    }
    return graph;
}

namespace {

// Shared tail of both generators: pick random distinct terminals, preprocess,
// demand a unique shortest path. Retries with a fresh topology draw per
// attempt; deterministic for a fixed seed.
Graph generate(int node_count, std::uint64_t seed, int max_attempts,
               const std::function<Graph(std::mt19937_64&)>& make_lattice,
               const std::map<std::string, std::string>& metadata) {
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        auto gen = rng::engine(rng::mix(seed, static_cast<std::uint64_t>(attempt)));
        Graph raw = make_lattice(gen);
        const std::string pre_prune_edges = std::to_string(raw.edges.size());
        raw.start = static_cast<int>(rng::uniform_below(gen, node_count));
        int other = static_cast<int>(rng::uniform_below(gen, node_count - 1));
        if (other >= raw.start) {
            ++other;
        }
        raw.end = other;
        Graph pruned;
        try {
            pruned = prune(raw);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::DisconnectedTerminals) {
                continue;
            }
            throw;
        }
        if (pruned.edges.empty()) {
            continue;
        }
        const PathOracle oracle = bfs_oracle(pruned);
        if (!oracle.unique) {
            continue;
        }
        pruned.metadata = metadata;
        pruned.metadata["edges_pre_prune"] = pre_prune_edges;
        pruned.metadata["attempt"] = std::to_string(attempt);
        return pruned;
    }
    fail(ErrorKind::GenerationFailed,
         "no accepted instance after " + std::to_string(max_attempts) +
             " attempts; parameters may be too destructive");
}

} // namespace

Graph generate_grid(int rows, int cols, double removal_prob, std::uint64_t seed,
                    int max_attempts) {
    if (rows < 1 || cols < 1 || static_cast<long>(rows) * cols < 2) {
        fail(ErrorKind::ConfigInvalid, "grid needs at least two nodes");
    }
    if (removal_prob < 0.0 || removal_prob >= 1.0) {
        fail(ErrorKind::ConfigInvalid, "removal_prob must be in [0, 1)");
    }
    std::map<std::string, std::string> metadata{
        {"topology", "grid"},
        {"rows", std::to_string(rows)},
        {"cols", std::to_string(cols)},
        {"removal_prob", shortest(removal_prob)},
        {"seed", std::to_string(seed)},
    };
    return generate(
        rows * cols, seed, max_attempts,
        [&](std::mt19937_64& gen) { return grid_lattice(rows, cols, removal_prob, gen); },
        metadata);
}

Graph generate_small_world(int n, int k, double beta, std::uint64_t seed,
                           int max_attempts) {
    if (n < 4 || k < 2 || k % 2 != 0 || k >= n) {
        fail(ErrorKind::ConfigInvalid,
             "small-world needs n >= 4 and even k in [2, n)");
    }
    if (beta < 0.0 || beta > 1.0) {
        fail(ErrorKind::ConfigInvalid, "beta must be in [0, 1]");
    }
    std::map<std::string, std::string> metadata{
        {"topology", "small_world"},
        {"n", std::to_string(n)},
        {"k", std::to_string(k)},
        {"beta", shortest(beta)},
        {"seed", std::to_string(seed)},
    };
    return generate(
        n, seed, max_attempts,
        [&](std::mt19937_64& gen) { return ws_lattice(n, k, beta, gen); },
        metadata);
}

void validate_graph(const Graph& graph) {
    auto reject = [](const std::string& why) {
        fail(ErrorKind::MalformedFile, "invalid graph: " + why);
    };
    if (graph.node_ids.empty()) {
        reject("no nodes");
    }
    if (!std::is_sorted(graph.node_ids.begin(), graph.node_ids.end())) {
        reject("nodes not sorted");
    }
    if (std::adjacent_find(graph.node_ids.begin(), graph.node_ids.end()) !=
        graph.node_ids.end()) {
        reject("duplicate node id");
    }
    if (graph.start == graph.end) {
        reject("start equals end");
    }
    auto has_node = [&](int id) {
        return std::binary_search(graph.node_ids.begin(), graph.node_ids.end(), id);
    };
    if (!has_node(graph.start) || !has_node(graph.end)) {
        reject("terminal not among nodes");
    }
    std::unordered_set<std::uint64_t> seen;
    std::unordered_set<int> edge_ids;
    for (const Edge& edge : graph.edges) {
        if (edge.u == edge.v) {
            reject("self loop on node " + std::to_string(edge.u));
        }
        if (!has_node(edge.u) || !has_node(edge.v)) {
            reject("edge endpoint not among nodes");
        }
        if (!edge_ids.insert(edge.id).second) {
            reject("duplicate edge id " + std::to_string(edge.id));
        }
        const auto [lo, hi] = std::minmax(edge.u, edge.v);
        if (!seen.insert((static_cast<std::uint64_t>(lo) << 32) | static_cast<std::uint32_t>(hi))
                 .second) {
            reject("duplicate edge between " + std::to_string(lo) + " and " +
                   std::to_string(hi));
        }
    }
    Adjacency adj = build_adjacency(graph);
    const std::vector<int> dist = bfs_distances(adj, adj.start_index);
    for (size_t i = 0; i < adj.nodes.size(); ++i) {
        if (dist[i] < 0) {
            reject("node " + std::to_string(adj.nodes[i]) + " unreachable from start");
        }
        const size_t degree = adj.incident[i].size();
        const bool terminal = adj.nodes[i] == graph.start || adj.nodes[i] == graph.end;
        if (degree < (terminal ? 1u : 2u)) {
            reject("node " + std::to_string(adj.nodes[i]) + " has dangling degree " +
                   std::to_string(degree));
        }
    }
}

void save_graph(const Graph& graph, std::ostream& out) {
    json doc;
    doc["nodes"] = graph.node_ids;
    json edges = json::array();
    for (const Edge& edge : graph.edges) {
        edges.push_back({{"id", edge.id}, {"u", edge.u}, {"v", edge.v}});
    }
    doc["edges"] = std::move(edges);
    doc["start"] = graph.start;
    doc["end"] = graph.end;
    doc["metadata"] = graph.metadata;
    out << doc.dump(2) << '\n';
}

void save_graph(const Graph& graph, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        fail(ErrorKind::IoFailure, "cannot open " + path + " for writing");
    }
    save_graph(graph, out);
    if (!out.flush()) {
        fail(ErrorKind::IoFailure, "short write to " + path);
    }
}

namespace {

const json& require_key(const json& doc, const char* key, const std::string& name) {
    auto it = doc.find(key);
    if (it == doc.end()) {
        fail(ErrorKind::MalformedFile, name + ": missing \"" + key + "\"");
    }
    return *it;
}

int require_int(const json& value, const char* what, const std::string& name) {
    if (!value.is_number_integer()) {
        fail(ErrorKind::MalformedFile, name + ": " + what + " must be an integer");
    }
    return value.get<int>();
}

} // namespace

Graph load_graph(std::istream& in, const std::string& name) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::MalformedFile, name + ": " + e.what());
    }
    if (!doc.is_object()) {
        fail(ErrorKind::MalformedFile, name + ": top level must be an object");
    }
    Graph graph;
    for (const auto& node : require_key(doc, "nodes", name)) {
        graph.node_ids.push_back(require_int(node, "node id", name));
    }
    for (const auto& edge : require_key(doc, "edges", name)) {
        Edge parsed;
        parsed.id = require_int(require_key(edge, "id", name), "edge id", name);
        parsed.u = require_int(require_key(edge, "u", name), "edge endpoint", name);
        parsed.v = require_int(require_key(edge, "v", name), "edge endpoint", name);
        graph.edges.push_back(parsed);
    }
    graph.start = require_int(require_key(doc, "start", name), "start", name);
    graph.end = require_int(require_key(doc, "end", name), "end", name);
    if (auto it = doc.find("metadata"); it != doc.end()) {
        if (!it->is_object()) {
            fail(ErrorKind::MalformedFile, name + ": metadata must be an object");
        }
        for (const auto& [key, value] : it->items()) {
            graph.metadata[key] = value.is_string() ? value.get<std::string>() : value.dump();
        }
    }
    std::sort(graph.edges.begin(), graph.edges.end(),
              [](const Edge& a, const Edge& b) { return a.id < b.id; });
    validate_graph(graph);
    return graph;
}

Graph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::IoFailure, "cannot open " + path);
    }
    return load_graph(in, path);
}

} // namespace mempath
