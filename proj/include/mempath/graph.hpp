#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace mempath {

// One memristor per undirected graph edge. u is the positive terminal: after
// preprocessing it is the endpoint closer to the start node (BFS distance,
// ties to the lower node id), so forward current through a shortest path sees
// positive branch voltage on every edge.
struct Edge {
    int id = -1;
    int u = -1;
    int v = -1;

    bool operator==(const Edge&) const = default;
};

struct Graph {
    std::vector<int> node_ids; // ascending
    std::vector<Edge> edges;   // ascending by id
    int start = -1;
    int end = -1;
    std::map<std::string, std::string> metadata;

    bool operator==(const Graph&) const = default;
};

struct PathOracle {
    std::vector<int> path; // node ids, start first
    int length_n = 0;      // edges on the path
    bool unique = false;   // exactly one shortest path exists
};

// Dense-index view of a Graph; everything downstream works in dense indices.
struct Adjacency {
    std::vector<int> nodes;              // == graph.node_ids
    std::unordered_map<int, int> index;  // node id -> dense index
    int start_index = -1;
    int end_index = -1;
    std::vector<int> edge_u, edge_v;     // dense endpoints, orientation kept
    // per dense node: (edge index, dense neighbor), ascending edge index
    std::vector<std::vector<std::pair<int, int>>> incident;
};

Adjacency build_adjacency(const Graph& graph);

// Generators. Both run the full preprocessing pipeline (dead-end pruning,
// connectivity, random distinct terminals, unique-shortest-path check) with
// rejection sampling, and are deterministic for fixed arguments.
Graph generate_grid(int rows, int cols, double removal_prob, std::uint64_t seed,
                    int max_attempts = 1000);
Graph generate_small_world(int n, int k, double beta, std::uint64_t seed,
                           int max_attempts = 1000);

// Raw constructions without terminal selection or preprocessing; used by the
// generators, the benchmark, and tests.
Graph grid_lattice(int rows, int cols, double removal_prob, std::mt19937_64& gen);
Graph ws_lattice(int n, int k, double beta, std::mt19937_64& gen);

// Iteratively removes degree-1 non-terminal nodes, keeps only the component
// containing the terminals, re-orients edges by BFS distance from start and
// renumbers them canonically. Idempotent.
Graph prune(const Graph& graph);

PathOracle bfs_oracle(const Graph& graph);

void validate_graph(const Graph& graph);

void save_graph(const Graph& graph, std::ostream& out);
void save_graph(const Graph& graph, const std::string& path);
Graph load_graph(std::istream& in, const std::string& name = "<stream>");
Graph load_graph(const std::string& path);

} // namespace mempath
