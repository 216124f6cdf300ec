#pragma once

#include "mempath/solver.hpp"

#include <vector>

namespace mempath {

struct PathMetrics {
    double delta_g = 0.0;      // min over path nodes of on-path g minus best rival g
    double delta_g_norm = 0.0; // delta_g / delta_g_max of the nominal devices
    bool success = false;      // delta_g > 0
    std::vector<int> read_path;  // node ids, start first; empty if the walk failed
    bool matches_oracle = false; // read_path equals the shortest path
};

// Greedy conductance-following walk: from the start node repeatedly take the
// incident edge with the largest small-signal conductance, never revisiting a
// node; ties go to the lowest edge id. Throws ErrorKind::ReadoutStuck when no
// unvisited neighbor is reachable and ReadoutOverlong past node-count steps.
std::vector<int> read_path(const Circuit& circuit, const CircuitState& state);

// Detection margin along the known shortest path: at every path node except
// the last, the on-path conductance is compared against the best conductance
// among the node's other edges (both path edges at the node are excluded).
// Nodes without rival edges impose no constraint; a graph with no rivals
// anywhere (a bare chain) scores the full delta_g_max. The greedy walk result
// is attached; a failed walk yields an empty read_path, not a throw.
PathMetrics compute_delta_g(const Circuit& circuit, const CircuitState& state,
                            const PathOracle& oracle);

} // namespace mempath
