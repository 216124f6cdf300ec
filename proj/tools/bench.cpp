#include "mempath/graph.hpp"
#include "mempath/kernels.hpp"
#include "mempath/rng.hpp"
#include "mempath/solver.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

// Times the serial reference kernels against the OpenMP ones on a large
// random circuit, then one ramp segment end to end per policy, and verifies
// the outputs agree bitwise along the way.

using namespace mempath;
using Clock = std::chrono::steady_clock;

namespace {

double ms_per_rep(const std::function<void()>& fn, int reps) {
    fn(); // warm caches
    const auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

} // namespace

int main(int argc, char** argv) {
    int n = 20000;
    int k = 8;
    int reps = 50;
    if (argc > 1) n = std::atoi(argv[1]);
    if (argc > 2) reps = std::atoi(argv[2]);

    std::mt19937_64 gen = rng::engine(7);
    Graph g = ws_lattice(n, k, 0.1, gen);
    g.start = 0;
    g.end = n / 2;
    const Adjacency adj = build_adjacency(g);
    const int e_count = static_cast<int>(g.edges.size());
    std::printf("circuit: %d nodes, %d edges, %d OpenMP threads max\n", n, e_count,
                omp_get_max_threads());

    std::vector<double> x(e_count), phi(n), vb(e_count);
    for (int e = 0; e < e_count; ++e) x[e] = rng::uniform01(gen);
    for (int d = 0; d < n; ++d) phi[d] = 1e-3 * rng::uniform01(gen);

    const DeviceSet lin = DeviceSet::uniform_linear(LinearParams{}, e_count);
    const DeviceSet chg = DeviceSet::uniform_chang(ChangParams{}, e_count);
    std::vector<double> i_s(e_count), i_p(e_count), dx_s(e_count), dx_p(e_count);
    std::vector<double> didv_s(e_count), didv_p(e_count);

    kernels::branch_voltages_serial(adj.edge_u, adj.edge_v, phi, vb);

    struct Row {
        const char* name;
        double serial_ms;
        double omp_ms;
        bool equal;
    };
    std::vector<Row> rows;

    rows.push_back({"branch_voltages",
                    ms_per_rep([&] { kernels::branch_voltages_serial(adj.edge_u, adj.edge_v, phi, i_s); }, reps),
                    ms_per_rep([&] { kernels::branch_voltages_omp(adj.edge_u, adj.edge_v, phi, i_p); }, reps),
                    true});
    rows.back().equal = same_bits(i_s, i_p);

    rows.push_back({"linear_rates",
                    ms_per_rep([&] { kernels::linear_rates_serial(lin.linear_params(), x, vb, i_s, dx_s); }, reps),
                    ms_per_rep([&] { kernels::linear_rates_omp(lin.linear_params(), x, vb, i_p, dx_p); }, reps),
                    true});
    rows.back().equal = same_bits(i_s, i_p) && same_bits(dx_s, dx_p);

    rows.push_back({"chang_eval",
                    ms_per_rep([&] { kernels::chang_eval_serial(chg.chang_params(), x, vb, i_s, didv_s); }, reps),
                    ms_per_rep([&] { kernels::chang_eval_omp(chg.chang_params(), x, vb, i_p, didv_p); }, reps),
                    true});
    rows.back().equal = same_bits(i_s, i_p) && same_bits(didv_s, didv_p);

    rows.push_back({"chang_rates",
                    ms_per_rep([&] { kernels::chang_rates_serial(chg.chang_params(), x, vb, dx_s); }, reps),
                    ms_per_rep([&] { kernels::chang_rates_omp(chg.chang_params(), x, vb, dx_p); }, reps),
                    true});
    rows.back().equal = same_bits(dx_s, dx_p);

    rows.push_back({"euler_clamp",
                    ms_per_rep([&] { kernels::euler_clamp_serial(x, dx_s, 1e-3, i_s); }, reps),
                    ms_per_rep([&] { kernels::euler_clamp_omp(x, dx_s, 1e-3, i_p); }, reps),
                    true});
    rows.back().equal = same_bits(i_s, i_p);

    std::printf("%-18s %12s %12s %9s %s\n", "kernel", "serial ms", "openmp ms", "speedup",
                "bitwise");
    for (const Row& r : rows)
        std::printf("%-18s %12.4f %12.4f %8.2fx %s\n", r.name, r.serial_ms, r.omp_ms,
                    r.serial_ms / r.omp_ms, r.equal ? "ok" : "MISMATCH");

    // End-to-end: a short constant drive on the full circuit per policy.
    bool steps_equal = true;
    double elapsed[2] = {0.0, 0.0};
    std::vector<double> x_ref;
    for (int pol = 0; pol < 2; ++pol) {
        SolverConfig cfg = SolverConfig::defaults_for(ModelKind::Linear);
        cfg.exec = pol == 0 ? Exec::Serial : Exec::OpenMP;
        Circuit c(g, lin, cfg);
        CircuitState s = c.initial_state(5e-3);
        const auto t0 = Clock::now();
        while (s.t < 0.2) c.step(s, [](double) { return 5e-3; }, 0.2 - s.t);
        elapsed[pol] = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        if (pol == 0) x_ref = s.x;
        else steps_equal = same_bits(x_ref, s.x);
    }
    std::printf("%-18s %12.1f %12.1f %8.2fx %s\n", "step x200 (linear)", elapsed[0], elapsed[1],
                elapsed[0] / elapsed[1], steps_equal ? "ok" : "MISMATCH");

    bool all_equal = steps_equal;
    for (const Row& r : rows) all_equal = all_equal && r.equal;
    return all_equal ? 0 : 1;
}
