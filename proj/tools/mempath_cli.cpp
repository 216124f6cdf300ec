#include "mempath/error.hpp"
#include "mempath/experiments.hpp"
#include "mempath/format.hpp"
#include "mempath/graph.hpp"
#include "mempath/protocols.hpp"
#include "mempath/readout.hpp"
#include "mempath/rng.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <optional>

using namespace mempath;
using nlohmann::ordered_json;

namespace {

int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::ConfigInvalid: return 2;
    case ErrorKind::GenerationFailed:
    case ErrorKind::DisconnectedTerminals: return 3;
    case ErrorKind::DetectionFailure: return 4;
    case ErrorKind::IoFailure:
    case ErrorKind::MalformedFile: return 5;
    default: return 1;
    }
}

struct DeviceArgs {
    std::string model = "linear";
    double sigma_rel = 0.0;
    std::uint64_t device_seed = 1;
    std::string exec = "auto";
};

void add_device_args(CLI::App* cmd, DeviceArgs& args) {
    cmd->add_option("--model", args.model, "Device model: linear or chang")
        ->check(CLI::IsMember({"linear", "chang"}))
        ->capture_default_str();
    cmd->add_option("--sigma-rel", args.sigma_rel,
                    "Relative parameter spread for device-to-device variation")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--device-seed", args.device_seed, "Seed for the parameter draw")
        ->capture_default_str();
    cmd->add_option("--exec", args.exec, "Kernel execution: serial, openmp or auto")
        ->check(CLI::IsMember({"serial", "openmp", "auto"}))
        ->capture_default_str();
}

Circuit make_circuit(const std::string& graph_path, const DeviceArgs& args,
                     SolverConfig solver) {
    Graph graph = load_graph(graph_path);
    const ModelKind kind = model_from_string(args.model);
    const int e_count = static_cast<int>(graph.edges.size());
    DeviceSet devices =
        kind == ModelKind::Linear
            ? (args.sigma_rel > 0.0 ? DeviceSet::varied_linear(LinearParams{}, args.sigma_rel,
                                                               e_count, args.device_seed)
                                    : DeviceSet::uniform_linear(LinearParams{}, e_count))
            : (args.sigma_rel > 0.0 ? DeviceSet::varied_chang(ChangParams{}, args.sigma_rel,
                                                              e_count, args.device_seed)
                                    : DeviceSet::uniform_chang(ChangParams{}, e_count));
    if (args.exec == "serial") solver.exec = Exec::Serial;
    else if (args.exec == "openmp") solver.exec = Exec::OpenMP;
    else solver.exec = Exec::Auto;
    return Circuit(std::move(graph), std::move(devices), solver);
}

void emit(const ordered_json& j, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream out(out_path);
    if (!out) fail(ErrorKind::IoFailure, "cannot write " + out_path);
    out << j.dump(2) << '\n';
}

ordered_json metrics_json(const Circuit& circuit, const PathMetrics& m,
                          const PathOracle& oracle) {
    return ordered_json{{"delta_g", m.delta_g},
                        {"delta_g_max", circuit.devices().delta_g_max()},
                        {"delta_g_norm", m.delta_g_norm},
                        {"success", m.success},
                        {"read_path", m.read_path},
                        {"oracle_path", oracle.path},
                        {"oracle_length", oracle.length_n},
                        {"matches_oracle", m.matches_oracle}};
}

int run(int argc, char** argv) {
    CLI::App app{"Shortest-path solving with memristor circuits"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Generate a problem graph");
    gen->require_subcommand(1);
    int rows = 6, cols = 6, ws_n = 30, ws_k = 4;
    double removal = 0.0, ws_beta = 0.3;
    std::uint64_t gen_seed = 1;
    std::string gen_out;
    auto* gen_grid = gen->add_subcommand("grid", "Rectangular grid with random removals");
    gen_grid->add_option("--rows", rows)->check(CLI::PositiveNumber)->capture_default_str();
    gen_grid->add_option("--cols", cols)->check(CLI::PositiveNumber)->capture_default_str();
    gen_grid->add_option("--removal-prob", removal, "Per-edge removal probability")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    auto* gen_ws = gen->add_subcommand("small-world", "Watts-Strogatz ring rewiring");
    gen_ws->add_option("--n", ws_n)->check(CLI::PositiveNumber)->capture_default_str();
    gen_ws->add_option("--k", ws_k, "Even ring degree")->capture_default_str();
    gen_ws->add_option("--beta", ws_beta, "Rewiring probability")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    for (auto* sub : {gen_grid, gen_ws}) {
        sub->add_option("--seed", gen_seed)->capture_default_str();
        sub->add_option("-o,--out", gen_out, "Output path (stdout when omitted)");
    }

    // solve
    auto* solve = app.add_subcommand("solve", "Run one protocol on a graph file");
    std::string solve_graph, solve_out, solve_trace, protocol = "ramp";
    DeviceArgs solve_dev;
    double cv = 0.0, const_t_max = 10.0;
    bool have_ramp_v0 = false, have_ramp_rate = false, have_ramp_tmax = false;
    double ramp_v0 = 0.0, ramp_rate = 0.0, ramp_tmax = 0.0;
    solve->add_option("--graph", solve_graph, "Graph JSON file")->required();
    add_device_args(solve, solve_dev);
    solve->add_option("--protocol", protocol, "ramp or constant")
        ->check(CLI::IsMember({"ramp", "constant"}))
        ->capture_default_str();
    solve->add_option("--v", cv, "Constant protocol: control voltage in V");
    solve->add_option("--t-max-constant", const_t_max, "Constant protocol: time limit in s")
        ->capture_default_str();
    solve->add_option("--v0", ramp_v0, "Ramp start voltage in V")
        ->each([&](const std::string&) { have_ramp_v0 = true; });
    solve->add_option("--rate", ramp_rate, "Ramp rate in V/s")
        ->each([&](const std::string&) { have_ramp_rate = true; });
    solve->add_option("--t-max", ramp_tmax, "Ramp time limit in s")
        ->each([&](const std::string&) { have_ramp_tmax = true; });
    solve->add_option("--trace", solve_trace, "Write the sampled current trace CSV here");
    solve->add_option("-o,--out", solve_out, "Result JSON path (stdout when omitted)");

    // sweep-voltage
    auto* sweep = app.add_subcommand("sweep-voltage", "Constant-drive sweep over voltages");
    std::string sweep_graph, sweep_out;
    DeviceArgs sweep_dev;
    std::vector<double> sweep_voltages;
    double sweep_t_max = 10.0;
    sweep->add_option("--graph", sweep_graph, "Graph JSON file")->required();
    add_device_args(sweep, sweep_dev);
    sweep->add_option("--voltages", sweep_voltages, "Voltages to try, in V")
        ->required()
        ->delimiter(',');
    sweep->add_option("--t-max", sweep_t_max, "Time limit per voltage in s")
        ->capture_default_str();
    sweep->add_option("-o,--out", sweep_out, "Result JSON path (stdout when omitted)");

    // batch
    auto* batch = app.add_subcommand("batch", "Run a configured experiment batch");
    std::string batch_config, batch_out;
    bool batch_summary = false;
    batch->add_option("--config", batch_config, "Experiment config JSON")->required();
    batch->add_option("-o,--out", batch_out, "Records CSV path (stdout when omitted)");
    batch->add_flag("--summary", batch_summary, "Also print the scaling summary JSON");

    // summarize
    auto* summ = app.add_subcommand("summarize", "Scaling summary of a records CSV");
    std::string summ_records, summ_out;
    summ->add_option("--records", summ_records, "Records CSV path")->required();
    summ->add_option("-o,--out", summ_out, "Summary JSON path (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // bad flags and bad values are config errors; --help is a success
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (gen->parsed()) {
        Graph g = gen_grid->parsed() ? generate_grid(rows, cols, removal, gen_seed)
                                     : generate_small_world(ws_n, ws_k, ws_beta, gen_seed);
        if (gen_out.empty()) {
            save_graph(g, std::cout);
        } else {
            save_graph(g, gen_out);
            std::cerr << "wrote " << gen_out << " (" << g.node_ids.size() << " nodes, "
                      << g.edges.size() << " edges)\n";
        }
        return 0;
    }

    if (solve->parsed()) {
        const ModelKind kind = model_from_string(solve_dev.model);
        Circuit circuit = make_circuit(solve_graph, solve_dev, SolverConfig::defaults_for(kind));
        const PathOracle oracle = bfs_oracle(circuit.graph());
        ordered_json out;
        out["protocol"] = protocol;
        out["model"] = solve_dev.model;

        if (protocol == "constant") {
            if (cv == 0.0) fail(ErrorKind::ConfigInvalid, "constant protocol needs --v");
            ConstantResult r = run_constant(circuit, cv, const_t_max);
            const PathMetrics m = compute_delta_g(circuit, r.state, oracle);
            out["v_ctrl"] = cv;
            out["steady"] = r.steady;
            out["t_s"] = r.state.t;
            out["energy_J"] = r.state.energy;
            out.update(metrics_json(circuit, m, oracle));
            if (!solve_trace.empty()) {
                std::ofstream tr(solve_trace);
                if (!tr) fail(ErrorKind::IoFailure, "cannot write " + solve_trace);
                write_trace_csv(r.trace, tr);
            }
            emit(out, solve_out);
            return 0;
        }

        RampConfig ramp = RampConfig::for_model(kind);
        if (have_ramp_v0) ramp.v0 = ramp_v0;
        if (have_ramp_rate) ramp.rate = ramp_rate;
        if (have_ramp_tmax) ramp.t_max = ramp_tmax;
        RampResult r = run_ramp(circuit, ramp);
        const PathMetrics m = compute_delta_g(circuit, r.state, oracle);
        out["detected"] = r.detected;
        out["detection_time_s"] = r.detection_time_s;
        out["v_at_detection"] = r.v_at_detection;
        out["energy_J"] = r.state.energy;
        out.update(metrics_json(circuit, m, oracle));
        if (!solve_trace.empty()) {
            std::ofstream tr(solve_trace);
            if (!tr) fail(ErrorKind::IoFailure, "cannot write " + solve_trace);
            write_trace_csv(r.trace, tr);
        }
        emit(out, solve_out);
        if (!r.detected) fail(ErrorKind::DetectionFailure, "no kink before t_max");
        return 0;
    }

    if (sweep->parsed()) {
        const ModelKind kind = model_from_string(sweep_dev.model);
        Circuit circuit = make_circuit(sweep_graph, sweep_dev, SolverConfig::defaults_for(kind));
        SweepResult r = sweep_voltage(circuit, sweep_voltages, sweep_t_max);
        ordered_json points = ordered_json::array();
        for (const SweepPoint& p : r.points)
            points.push_back({{"v_ctrl", p.v_ctrl},
                              {"delta_g", p.metrics.delta_g},
                              {"delta_g_norm", p.metrics.delta_g_norm},
                              {"success", p.metrics.success},
                              {"matches_oracle", p.metrics.matches_oracle},
                              {"steady", p.steady},
                              {"t_s", p.t_s},
                              {"energy_J", p.energy_j},
                              {"max_rel_kcl", p.max_rel_kcl}});
        emit(ordered_json{{"points", points}, {"v_opt", r.v_opt}, {"best_index", r.best_index}},
             sweep_out);
        return 0;
    }

    if (batch->parsed()) {
        const ExperimentConfig cfg = load_experiment_config(batch_config);
        std::vector<RunRecord> records;
        if (batch_out.empty()) {
            records = run_batch(cfg, {}, &std::cout);
        } else {
            std::ofstream out(batch_out);
            if (!out) fail(ErrorKind::IoFailure, "cannot write " + batch_out);
            records = run_batch(cfg, {}, &out);
        }
        if (batch_summary) {
            const ScalingSummary s = summarize_scaling(records);
            ordered_json j{{"total", s.total},
                           {"ok", s.ok},
                           {"failed_generation", s.failed_generation},
                           {"failed_detection", s.failed_detection},
                           {"failed_solver", s.failed_solver},
                           {"success_rate", s.success_rate},
                           {"mean_delta_g_norm", s.mean_delta_g_norm},
                           {"std_delta_g_norm", s.std_delta_g_norm}};
            std::cout << j.dump(2) << '\n';
        }
        return 0;
    }

    if (summ->parsed()) {
        const std::vector<RunRecord> records = read_records_csv(summ_records);
        const ScalingSummary s = summarize_scaling(records);
        ordered_json j{{"total", s.total},
                       {"ok", s.ok},
                       {"failed_generation", s.failed_generation},
                       {"failed_detection", s.failed_detection},
                       {"failed_solver", s.failed_solver},
                       {"success_rate", s.success_rate},
                       {"mean_delta_g_norm", s.mean_delta_g_norm},
                       {"std_delta_g_norm", s.std_delta_g_norm},
                       {"spearman_time_path", s.spearman_time_path},
                       {"spearman_energy_path", s.spearman_energy_path},
                       {"spearman_time_size", s.spearman_time_size},
                       {"spearman_energy_size", s.spearman_energy_size},
                       {"time_vs_path",
                        {{"slope", s.time_vs_path.slope},
                         {"intercept", s.time_vs_path.intercept},
                         {"r2", s.time_vs_path.r2}}},
                       {"energy_vs_path",
                        {{"slope", s.energy_vs_path.slope},
                         {"intercept", s.energy_vs_path.intercept},
                         {"r2", s.energy_vs_path.r2}}}};
        emit(j, summ_out);
        return 0;
    }
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
