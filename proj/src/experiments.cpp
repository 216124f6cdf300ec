#include "mempath/experiments.hpp"

#include "mempath/error.hpp"
#include "mempath/format.hpp"
#include "mempath/rng.hpp"

#include <nlohmann/json.hpp>
#include <omp.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace mempath {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Distinct stream tag so device sampling never collides with the graph
// generator's per-attempt streams, which also derive from the instance seed.
constexpr std::uint64_t kDeviceStream = 0x6d656d2d64657673ULL;

const char* model_name(ModelKind kind) {
    return kind == ModelKind::Linear ? "linear" : "chang";
}

const char* exec_name(Exec e) {
    switch (e) {
    case Exec::Serial: return "serial";
    case Exec::OpenMP: return "openmp";
    default: return "auto";
    }
}

Exec exec_from_string(const std::string& s) {
    if (s == "serial") return Exec::Serial;
    if (s == "openmp") return Exec::OpenMP;
    if (s == "auto") return Exec::Auto;
    fail(ErrorKind::ConfigInvalid, "unknown exec policy '" + s + "'");
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known)
            if (key == k) ok = true;
        if (!ok) fail(ErrorKind::ConfigInvalid, "unknown key '" + key + "' in " + where);
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        fail(ErrorKind::ConfigInvalid, std::string("bad value for '") + key + "': " + e.what());
    }
}

double nan_on_insufficient(const std::function<double()>& f) {
    try {
        return f();
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::InsufficientData) throw;
        return std::numeric_limits<double>::quiet_NaN();
    }
}

void write_record_row(const RunRecord& r, std::ostream& os) {
    os << r.graph_id << ',' << r.topology << ',' << r.nodes << ',' << r.edges << ',' << r.size
       << ',' << r.path_len << ',' << g17(r.delta_g) << ',' << g17(r.delta_g_norm) << ','
       << (r.success ? 1 : 0) << ',' << g17(r.detect_time_s) << ',' << g17(r.energy_j) << ','
       << r.model << ',' << g17(r.sigma_rel) << ',' << r.seed << ',' << r.failure_kind << '\n';
}

} // namespace

std::string to_string(Topology t) { return t == Topology::Grid ? "grid" : "small-world"; }

Topology topology_from_string(const std::string& name) {
    if (name == "grid") return Topology::Grid;
    if (name == "small-world") return Topology::SmallWorld;
    fail(ErrorKind::ConfigInvalid, "unknown topology '" + name + "'");
}

ExperimentConfig load_experiment_config(std::istream& in, const std::string& name) {
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::ConfigInvalid, name + ": " + e.what());
    }
    if (!j.is_object()) fail(ErrorKind::ConfigInvalid, name + ": top level must be an object");
    reject_unknown_keys(j,
                        {"model", "topology", "grids", "small_worlds", "instances", "sigma_rel",
                         "master_seed", "ramp", "solver"},
                        name);

    ExperimentConfig cfg;
    cfg.model = model_from_string(get_or<std::string>(j, "model", "linear"));
    cfg.topology = topology_from_string(get_or<std::string>(j, "topology", "grid"));
    cfg.instances = get_or<int>(j, "instances", 1);
    cfg.sigma_rel = get_or<double>(j, "sigma_rel", 0.0);
    cfg.master_seed = get_or<std::uint64_t>(j, "master_seed", 1);
    cfg.ramp = RampConfig::for_model(cfg.model);
    cfg.solver = SolverConfig::defaults_for(cfg.model);

    if (j.contains("grids")) {
        cfg.grids.clear();
        for (const auto& g : j.at("grids")) {
            reject_unknown_keys(g, {"rows", "cols", "removal_prob"}, name + ".grids[]");
            GridSpec spec;
            spec.rows = get_or<int>(g, "rows", spec.rows);
            spec.cols = get_or<int>(g, "cols", spec.cols);
            spec.removal_prob = get_or<double>(g, "removal_prob", spec.removal_prob);
            cfg.grids.push_back(spec);
        }
    }
    if (j.contains("small_worlds")) {
        cfg.small_worlds.clear();
        for (const auto& w : j.at("small_worlds")) {
            reject_unknown_keys(w, {"n", "k", "beta"}, name + ".small_worlds[]");
            SmallWorldSpec spec;
            spec.n = get_or<int>(w, "n", spec.n);
            spec.k = get_or<int>(w, "k", spec.k);
            spec.beta = get_or<double>(w, "beta", spec.beta);
            cfg.small_worlds.push_back(spec);
        }
    }
    if (j.contains("ramp")) {
        const json& r = j.at("ramp");
        reject_unknown_keys(r, {"v0", "rate", "t_max", "detector"}, name + ".ramp");
        cfg.ramp.v0 = get_or<double>(r, "v0", cfg.ramp.v0);
        cfg.ramp.rate = get_or<double>(r, "rate", cfg.ramp.rate);
        cfg.ramp.t_max = get_or<double>(r, "t_max", cfg.ramp.t_max);
        if (r.contains("detector")) {
            const json& d = r.at("detector");
            reject_unknown_keys(d, {"window", "threshold", "warmup"}, name + ".ramp.detector");
            cfg.ramp.detector.window = get_or<int>(d, "window", cfg.ramp.detector.window);
            cfg.ramp.detector.threshold =
                get_or<double>(d, "threshold", cfg.ramp.detector.threshold);
            cfg.ramp.detector.warmup = get_or<double>(d, "warmup", cfg.ramp.detector.warmup);
        }
    }
    if (j.contains("solver")) {
        const json& s = j.at("solver");
        reject_unknown_keys(s,
                            {"dt", "dx_max", "newton_tol", "newton_max_iter", "sample_dt",
                             "t_max", "exec", "min_parallel_edges"},
                            name + ".solver");
        cfg.solver.dt = get_or<double>(s, "dt", cfg.solver.dt);
        cfg.solver.dx_max = get_or<double>(s, "dx_max", cfg.solver.dx_max);
        cfg.solver.newton_tol = get_or<double>(s, "newton_tol", cfg.solver.newton_tol);
        cfg.solver.newton_max_iter =
            get_or<int>(s, "newton_max_iter", cfg.solver.newton_max_iter);
        cfg.solver.sample_dt = get_or<double>(s, "sample_dt", cfg.solver.sample_dt);
        cfg.solver.t_max = get_or<double>(s, "t_max", cfg.solver.t_max);
        cfg.solver.exec = exec_from_string(get_or<std::string>(s, "exec", exec_name(cfg.solver.exec)));
        cfg.solver.min_parallel_edges =
            get_or<int>(s, "min_parallel_edges", cfg.solver.min_parallel_edges);
    }

    if (cfg.instances < 1) fail(ErrorKind::ConfigInvalid, "instances must be >= 1");
    if (cfg.sigma_rel < 0.0) fail(ErrorKind::ConfigInvalid, "sigma_rel must be >= 0");
    if (cfg.topology == Topology::Grid && cfg.grids.empty())
        fail(ErrorKind::ConfigInvalid, "grid topology needs at least one grid spec");
    if (cfg.topology == Topology::SmallWorld && cfg.small_worlds.empty())
        fail(ErrorKind::ConfigInvalid, "small-world topology needs at least one spec");
    for (const GridSpec& g : cfg.grids) {
        if (g.rows < 1 || g.cols < 1 || g.rows * g.cols < 2)
            fail(ErrorKind::ConfigInvalid, "grid must have at least two nodes");
        if (g.removal_prob < 0.0 || g.removal_prob >= 1.0)
            fail(ErrorKind::ConfigInvalid, "removal_prob must lie in [0, 1)");
    }
    for (const SmallWorldSpec& w : cfg.small_worlds) {
        if (w.n < 4 || w.k < 2 || w.k % 2 != 0 || w.k >= w.n)
            fail(ErrorKind::ConfigInvalid, "small world needs n >= 4 and even k in [2, n)");
        if (w.beta < 0.0 || w.beta > 1.0)
            fail(ErrorKind::ConfigInvalid, "beta must lie in [0, 1]");
    }
    if (cfg.ramp.rate <= 0.0) fail(ErrorKind::ConfigInvalid, "ramp rate must be > 0");
    if (cfg.ramp.t_max <= 0.0) fail(ErrorKind::ConfigInvalid, "ramp t_max must be > 0");
    if (cfg.solver.dt <= 0.0 || cfg.solver.sample_dt <= 0.0)
        fail(ErrorKind::ConfigInvalid, "solver dt and sample_dt must be > 0");
    if (cfg.solver.dx_max <= 0.0) fail(ErrorKind::ConfigInvalid, "dx_max must be > 0");
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::IoFailure, "cannot open config file " + path);
    return load_experiment_config(in, path);
}

void save_experiment_config(const ExperimentConfig& cfg, std::ostream& out) {
    ordered_json j;
    j["model"] = model_name(cfg.model);
    j["topology"] = to_string(cfg.topology);
    j["instances"] = cfg.instances;
    j["sigma_rel"] = cfg.sigma_rel;
    j["master_seed"] = cfg.master_seed;
    j["grids"] = ordered_json::array();
    for (const GridSpec& g : cfg.grids)
        j["grids"].push_back({{"rows", g.rows}, {"cols", g.cols}, {"removal_prob", g.removal_prob}});
    j["small_worlds"] = ordered_json::array();
    for (const SmallWorldSpec& w : cfg.small_worlds)
        j["small_worlds"].push_back({{"n", w.n}, {"k", w.k}, {"beta", w.beta}});
    j["ramp"] = {{"v0", cfg.ramp.v0},
                 {"rate", cfg.ramp.rate},
                 {"t_max", cfg.ramp.t_max},
                 {"detector",
                  {{"window", cfg.ramp.detector.window},
                   {"threshold", cfg.ramp.detector.threshold},
                   {"warmup", cfg.ramp.detector.warmup}}}};
    j["solver"] = {{"dt", cfg.solver.dt},
                   {"dx_max", cfg.solver.dx_max},
                   {"newton_tol", cfg.solver.newton_tol},
                   {"newton_max_iter", cfg.solver.newton_max_iter},
                   {"sample_dt", cfg.solver.sample_dt},
                   {"t_max", cfg.solver.t_max},
                   {"exec", exec_name(cfg.solver.exec)},
                   {"min_parallel_edges", cfg.solver.min_parallel_edges}};
    out << j.dump(2) << '\n';
}

void write_records_csv(std::span<const RunRecord> records, std::ostream& os) {
    os << kRecordsHeader << '\n';
    for (const RunRecord& r : records) write_record_row(r, os);
}

std::vector<RunRecord> read_records_csv(std::istream& in, const std::string& name) {
    std::string line;
    if (!std::getline(in, line) || line != kRecordsHeader)
        fail(ErrorKind::MalformedFile, name + ": bad or missing records header");
    std::vector<RunRecord> out;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t pos = 0;
        while (true) {
            const std::size_t comma = line.find(',', pos);
            f.push_back(line.substr(pos, comma == std::string::npos ? comma : comma - pos));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (f.size() != 15)
            fail(ErrorKind::MalformedFile,
                 name + ": line " + std::to_string(line_no) + " has " +
                     std::to_string(f.size()) + " fields, expected 15");
        try {
            RunRecord r;
            r.graph_id = f[0];
            r.topology = f[1];
            r.nodes = std::stoi(f[2]);
            r.edges = std::stoi(f[3]);
            r.size = std::stoi(f[4]);
            r.path_len = std::stoi(f[5]);
            r.delta_g = std::stod(f[6]);
            r.delta_g_norm = std::stod(f[7]);
            r.success = std::stoi(f[8]) != 0;
            r.detect_time_s = std::stod(f[9]);
            r.energy_j = std::stod(f[10]);
            r.model = f[11];
            r.sigma_rel = std::stod(f[12]);
            r.seed = std::stoull(f[13]);
            r.failure_kind = f[14];
            out.push_back(std::move(r));
        } catch (const std::exception& e) {
            fail(ErrorKind::MalformedFile,
                 name + ": line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<RunRecord> read_records_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::IoFailure, "cannot open records file " + path);
    return read_records_csv(in, path);
}

InstancePlan plan_instance(const ExperimentConfig& cfg, int index) {
    if (index < 0 || index >= cfg.instances)
        fail(ErrorKind::ConfigInvalid, "instance index out of range");
    InstancePlan p;
    p.index = index;
    p.seed = rng::mix(cfg.master_seed, static_cast<std::uint64_t>(index));
    p.topology = cfg.topology;
    char buf[96];
    if (p.topology == Topology::Grid) {
        p.grid = cfg.grids[static_cast<std::size_t>(index) % cfg.grids.size()];
        std::snprintf(buf, sizeof buf, "grid-%dx%d-i%04d", p.grid.rows, p.grid.cols, index);
    } else {
        p.small_world =
            cfg.small_worlds[static_cast<std::size_t>(index) % cfg.small_worlds.size()];
        std::snprintf(buf, sizeof buf, "ws-n%d-k%d-i%04d", p.small_world.n, p.small_world.k,
                      index);
    }
    p.graph_id = buf;
    return p;
}

RunRecord run_instance(const ExperimentConfig& cfg, int index, const RunObserver& observer) {
    const InstancePlan plan = plan_instance(cfg, index);
    RunRecord rec;
    rec.graph_id = plan.graph_id;
    rec.topology = to_string(plan.topology);
    rec.model = model_name(cfg.model);
    rec.sigma_rel = cfg.sigma_rel;
    rec.seed = plan.seed;
    rec.size = plan.topology == Topology::Grid ? plan.grid.rows * plan.grid.cols
                                               : plan.small_world.n;

    Graph graph;
    try {
        graph = plan.topology == Topology::Grid
                    ? generate_grid(plan.grid.rows, plan.grid.cols, plan.grid.removal_prob,
                                    plan.seed)
                    : generate_small_world(plan.small_world.n, plan.small_world.k,
                                           plan.small_world.beta, plan.seed);
    } catch (const Error&) {
        rec.failure_kind = "generation";
        if (observer) observer(InstanceView{plan, rec});
        return rec;
    }

    const PathOracle oracle = bfs_oracle(graph);
    rec.nodes = static_cast<int>(graph.node_ids.size());
    rec.edges = static_cast<int>(graph.edges.size());
    rec.path_len = oracle.length_n;

    const int e_count = rec.edges;
    const std::uint64_t device_seed = rng::mix(plan.seed, kDeviceStream);
    DeviceSet devices =
        cfg.model == ModelKind::Linear
            ? (cfg.sigma_rel > 0.0
                   ? DeviceSet::varied_linear(LinearParams{}, cfg.sigma_rel, e_count, device_seed)
                   : DeviceSet::uniform_linear(LinearParams{}, e_count))
            : (cfg.sigma_rel > 0.0
                   ? DeviceSet::varied_chang(ChangParams{}, cfg.sigma_rel, e_count, device_seed)
                   : DeviceSet::uniform_chang(ChangParams{}, e_count));

    try {
        Circuit circuit(std::move(graph), std::move(devices), cfg.solver);
        RampResult ramp = run_ramp(circuit, cfg.ramp);
        const PathMetrics metrics = compute_delta_g(circuit, ramp.state, oracle);
        if (ramp.detected) {
            rec.delta_g = metrics.delta_g;
            rec.delta_g_norm = metrics.delta_g_norm;
            rec.success = metrics.success;
            rec.detect_time_s = ramp.detection_time_s;
            rec.energy_j = ramp.state.energy;
        } else {
            rec.failure_kind = "detection";
        }
        if (observer)
            observer(InstanceView{plan, rec, &circuit, &ramp.state, &oracle, &metrics, &ramp});
        return rec;
    } catch (const Error&) {
        rec.failure_kind = "solver";
        rec.delta_g = rec.delta_g_norm = rec.detect_time_s = rec.energy_j = 0.0;
        rec.success = false;
        if (observer) observer(InstanceView{plan, rec});
        return rec;
    }
}

int batch_workers() {
    const char* env = std::getenv("MEMPATH_WORKERS");
    if (env && *env) {
        char* end = nullptr;
        const long w = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || w < 1)
            fail(ErrorKind::ConfigInvalid, "MEMPATH_WORKERS must be a positive integer");
        return static_cast<int>(w);
    }
    return omp_get_max_threads();
}

std::vector<RunRecord> run_batch(const ExperimentConfig& cfg, const RunObserver& observer,
                                 std::ostream* stream) {
    if (cfg.instances < 1) fail(ErrorKind::ConfigInvalid, "instances must be >= 1");
    const int n = cfg.instances;
    std::vector<RunRecord> records(n);
    std::vector<char> done(n, 0);
    int next_flush = 0;
    if (stream) *stream << kRecordsHeader << '\n';

    const int workers = batch_workers();
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
    for (int i = 0; i < n; ++i) {
        RunRecord rec = run_instance(cfg, i, observer);
#pragma omp critical(mempath_batch_flush)
        {
            records[i] = std::move(rec);
            done[i] = 1;
            if (stream) {
                while (next_flush < n && done[next_flush]) {
                    write_record_row(records[next_flush], *stream);
                    ++next_flush;
                }
            }
        }
    }
    if (stream) stream->flush();
    return records;
}

ScalingSummary summarize_scaling(std::span<const RunRecord> records) {
    ScalingSummary s;
    s.total = static_cast<long>(records.size());
    std::vector<double> t, e, pl, sz, dgn;
    long successes = 0;
    for (const RunRecord& r : records) {
        if (r.failure_kind == "generation") {
            ++s.failed_generation;
        } else if (r.failure_kind == "detection") {
            ++s.failed_detection;
        } else if (r.failure_kind == "solver") {
            ++s.failed_solver;
        } else {
            ++s.ok;
            if (r.success) ++successes;
            t.push_back(r.detect_time_s);
            e.push_back(r.energy_j);
            pl.push_back(static_cast<double>(r.path_len));
            sz.push_back(static_cast<double>(r.nodes + r.edges));
            dgn.push_back(r.delta_g_norm);
        }
    }
    if (s.ok < 3) fail(ErrorKind::InsufficientData, "fewer than three usable records");
    // detection/solver failures stay in the denominator; only instances that
    // never produced a graph are excluded
    const long accepted = s.ok + s.failed_detection + s.failed_solver;
    s.success_rate = static_cast<double>(successes) / static_cast<double>(accepted);
    s.mean_delta_g_norm = stats::mean(dgn);
    s.std_delta_g_norm = stats::stdev(dgn);
    s.spearman_time_path = nan_on_insufficient([&] { return stats::spearman(t, pl); });
    s.spearman_energy_path = nan_on_insufficient([&] { return stats::spearman(e, pl); });
    s.spearman_time_size = nan_on_insufficient([&] { return stats::spearman(t, sz); });
    s.spearman_energy_size = nan_on_insufficient([&] { return stats::spearman(e, sz); });
    try {
        s.time_vs_path = stats::least_squares(pl, t);
        s.energy_vs_path = stats::least_squares(pl, e);
    } catch (const Error& err) {
        if (err.kind() != ErrorKind::InsufficientData) throw;
    }
    return s;
}

} // namespace mempath
