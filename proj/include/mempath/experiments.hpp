#pragma once

#include "mempath/protocols.hpp"
#include "mempath/stats.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mempath {

enum class Topology { Grid, SmallWorld };
std::string to_string(Topology t);
Topology topology_from_string(const std::string& name);

struct GridSpec {
    int rows = 6;
    int cols = 6;
    double removal_prob = 0.0;
};

struct SmallWorldSpec {
    int n = 30;
    int k = 4;
    double beta = 0.3;
};

// One ramp-and-read experiment batch. Topology specs are cycled over the
// instance index, so mixing sizes in one batch is just listing them.
struct ExperimentConfig {
    ModelKind model = ModelKind::Linear;
    Topology topology = Topology::Grid;
    std::vector<GridSpec> grids{GridSpec{}};
    std::vector<SmallWorldSpec> small_worlds{SmallWorldSpec{}};
    int instances = 1;
    double sigma_rel = 0.0;
    std::uint64_t master_seed = 1;
    RampConfig ramp;     // defaults follow the model at load time
    SolverConfig solver; // likewise
};

// JSON, same field names as the struct; unknown keys are rejected. Fields not
// present keep the model-appropriate defaults.
ExperimentConfig load_experiment_config(std::istream& in, const std::string& name = "<stream>");
ExperimentConfig load_experiment_config(const std::string& path);
void save_experiment_config(const ExperimentConfig& cfg, std::ostream& out);

// One CSV row per instance. failure_kind says which stage gave up (none,
// generation, detection, solver); the metric fields of a failed run are zero,
// graph fields stay filled once generation succeeded.
struct RunRecord {
    std::string graph_id;
    std::string topology;
    int nodes = 0;
    int edges = 0;
    int size = 0;     // generator scale: rows*cols for grids, n for small worlds
    int path_len = 0; // shortest-path edge count
    double delta_g = 0.0;
    double delta_g_norm = 0.0;
    bool success = false;
    double detect_time_s = 0.0;
    double energy_j = 0.0;
    std::string model;
    double sigma_rel = 0.0;
    std::uint64_t seed = 0; // per-instance seed, derived from master_seed
    std::string failure_kind = "none";
};

inline constexpr const char* kRecordsHeader =
    "graph_id,topology,nodes,edges,size,path_len,delta_g,delta_g_norm,success,"
    "detect_time_s,energy_J,model,sigma_rel,seed,failure_kind";

void write_records_csv(std::span<const RunRecord> records, std::ostream& os);
std::vector<RunRecord> read_records_csv(std::istream& in, const std::string& name = "<stream>");
std::vector<RunRecord> read_records_csv(const std::string& path);

struct InstancePlan {
    int index = 0;
    std::uint64_t seed = 0;
    Topology topology = Topology::Grid;
    GridSpec grid;
    SmallWorldSpec small_world;
    std::string graph_id;
};
InstancePlan plan_instance(const ExperimentConfig& cfg, int index);

// Everything alive at the end of one instance run; valid only during the
// observer call. circuit is null when generation failed.
struct InstanceView {
    const InstancePlan& plan;
    const RunRecord& record;
    Circuit* circuit = nullptr;
    const CircuitState* state = nullptr;
    const PathOracle* oracle = nullptr;
    const PathMetrics* metrics = nullptr;
    const RampResult* ramp = nullptr;
};

// May be called from worker threads (any order); must be thread-safe.
using RunObserver = std::function<void(const InstanceView&)>;

RunRecord run_instance(const ExperimentConfig& cfg, int index, const RunObserver& observer = {});

// Runs all instances, OpenMP across instances. Records come back in index
// order and, when stream is given, are flushed to it incrementally in index
// order (header first). Worker count: MEMPATH_WORKERS env var when set, else
// the OpenMP default; results are identical either way.
std::vector<RunRecord> run_batch(const ExperimentConfig& cfg, const RunObserver& observer = {},
                                 std::ostream* stream = nullptr);

int batch_workers(); // resolved worker count, >= 1

struct ScalingSummary {
    long total = 0;
    long ok = 0; // failure_kind == none
    long failed_generation = 0;
    long failed_detection = 0;
    long failed_solver = 0;
    double success_rate = 0.0; // delta_g > 0 over accepted runs (failures count against)
    double mean_delta_g_norm = 0.0;
    double std_delta_g_norm = 0.0;
    double spearman_time_path = 0.0;
    double spearman_energy_path = 0.0;
    double spearman_time_size = 0.0;   // against nodes + edges
    double spearman_energy_size = 0.0; // against nodes + edges
    stats::LinearFit time_vs_path;
    stats::LinearFit energy_vs_path;
};

// Throws InsufficientData when fewer than three usable rows exist.
ScalingSummary summarize_scaling(std::span<const RunRecord> records);

} // namespace mempath
