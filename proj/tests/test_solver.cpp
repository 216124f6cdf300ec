#include "mempath/solver.hpp"

#include "mempath/error.hpp"
#include "mempath/protocols.hpp"
#include "mempath/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

using namespace mempath;
using doctest::Approx;

namespace {

Graph chain_graph(int n_edges) {
    Graph g;
    for (int i = 0; i <= n_edges; ++i) g.node_ids.push_back(i);
    for (int i = 0; i < n_edges; ++i) g.edges.push_back({i, i, i + 1});
    g.start = 0;
    g.end = n_edges;
    return g;
}

// two 2-edge branches between 0 and 3, via 1 and via 2
Graph two_branch_graph() {
    Graph g;
    g.node_ids = {0, 1, 2, 3};
    g.edges = {{0, 0, 1}, {1, 1, 3}, {2, 0, 2}, {3, 2, 3}};
    g.start = 0;
    g.end = 3;
    return g;
}

Circuit linear_circuit(Graph g, SolverConfig cfg = SolverConfig::defaults_for(ModelKind::Linear)) {
    const int e = static_cast<int>(g.edges.size());
    return Circuit(std::move(g), DeviceSet::uniform_linear(LinearParams{}, e), cfg);
}

Circuit chang_circuit(Graph g, SolverConfig cfg = SolverConfig::defaults_for(ModelKind::Chang)) {
    const int e = static_cast<int>(g.edges.size());
    return Circuit(std::move(g), DeviceSet::uniform_chang(ChangParams{}, e), cfg);
}

} // namespace

TEST_CASE("single edge circuit has no interior and exact current") {
    Circuit c = linear_circuit(chain_graph(1));
    CHECK(c.interior().empty());
    CircuitState s = c.initial_state(1e-3);
    CHECK(s.potential[0] == 1e-3);
    CHECK(s.potential[1] == 0.0);
    CHECK(s.i_total == Approx(1e-7).epsilon(1e-12)); // g_off * v
    CHECK(s.v_branch[0] == Approx(1e-3));
    CHECK(c.current_into_end(s) == Approx(s.i_total));
}

TEST_CASE("series divider splits by conductance") {
    Circuit c = linear_circuit(chain_graph(2));
    CircuitState s = c.initial_state(2e-3);
    // uniform x: midpoint at v/2
    CHECK(s.potential[1] == Approx(1e-3).epsilon(1e-12));

    s.x = {0.5, 0.0}; // g0 >> g1
    c.refresh(s, 2e-3);
    const LinearParams p;
    const double g0 = linear_conductance(0.5, p);
    const double g1 = linear_conductance(0.0, p);
    CHECK(s.potential[1] == Approx(2e-3 * g0 / (g0 + g1)).epsilon(1e-12));
    CHECK(s.current[0] == Approx(s.current[1]).epsilon(1e-12));
    CHECK(s.i_total == Approx(2e-3 * g0 * g1 / (g0 + g1)).epsilon(1e-12));
}

TEST_CASE("parallel branches split by branch conductance") {
    Circuit c = linear_circuit(two_branch_graph());
    CircuitState s = c.initial_state(1e-3);
    s.x = {0.5, 0.5, 0.0, 0.0};
    c.refresh(s, 1e-3);
    const LinearParams p;
    const double ga = linear_conductance(0.5, p) / 2.0; // branch of two in series
    const double gb = linear_conductance(0.0, p) / 2.0;
    CHECK(s.current[0] == Approx(1e-3 * ga).epsilon(1e-12));
    CHECK(s.current[2] == Approx(1e-3 * gb).epsilon(1e-12));
    CHECK(s.i_total == Approx(1e-3 * (ga + gb)).epsilon(1e-12));
    CHECK(s.current[0] / s.current[2] == Approx(ga / gb).epsilon(1e-12));
}

TEST_CASE("potentials obey the discrete maximum principle") {
    const Graph g = generate_grid(6, 6, 0.15, 21);
    for (int model = 0; model < 2; ++model) {
        Circuit c = model == 0 ? linear_circuit(g) : chang_circuit(g);
        CircuitState s = c.initial_state(model == 0 ? 1e-3 : 0.1);
        std::mt19937_64 gen = rng::engine(5);
        for (double& x : s.x) x = rng::uniform01(gen);
        c.refresh(s, model == 0 ? 1e-3 : 0.1);
        const double v = s.v_ctrl;
        for (double phi : s.potential) {
            CHECK(phi >= -1e-15);
            CHECK(phi <= v * (1 + 1e-12));
        }
        // charge conservation end to end
        CHECK(c.current_out_of_start(s) ==
              Approx(c.current_into_end(s)).epsilon(1e-10));
        CHECK(s.stats.max_rel_kcl <= 1e-10);
    }
}

TEST_CASE("node relabeling does not change the solution") {
    std::mt19937_64 gen = rng::engine(3);
    Graph a = grid_lattice(3, 3, 0.0, gen);
    a.start = 0;
    a.end = 8;
    // remap node i -> 10 + ((i * 5) % 9), an arbitrary bijection
    auto remap = [](int i) { return 10 + (i * 5) % 9; };
    Graph b = a;
    for (int& id : b.node_ids) id = remap(id);
    std::sort(b.node_ids.begin(), b.node_ids.end());
    for (Edge& e : b.edges) {
        e.u = remap(e.u);
        e.v = remap(e.v);
    }
    b.start = remap(a.start);
    b.end = remap(a.end);

    Circuit ca = linear_circuit(a);
    Circuit cb = linear_circuit(b);
    CircuitState sa = ca.initial_state(1e-3);
    CircuitState sb = cb.initial_state(1e-3);
    std::mt19937_64 gen2 = rng::engine(7);
    for (std::size_t e = 0; e < sa.x.size(); ++e) sa.x[e] = sb.x[e] = rng::uniform01(gen2);
    ca.refresh(sa, 1e-3);
    cb.refresh(sb, 1e-3);
    const Adjacency& aa = ca.adjacency();
    const Adjacency& ab = cb.adjacency();
    for (int id = 0; id < 9; ++id) {
        const double pa = sa.potential[aa.index.at(id)];
        const double pb = sb.potential[ab.index.at(remap(id))];
        CHECK(pa == Approx(pb).epsilon(1e-12));
    }
    CHECK(sa.i_total == Approx(sb.i_total).epsilon(1e-12));
}

TEST_CASE("constant drive reaches the analytic fixed point") {
    const LinearParams p;
    auto fixed_point = [&](double v) {
        const double gtv = p.gamma * p.tau * v;
        return gtv * p.g_off / (1.0 - gtv * (p.g_on - p.g_off));
    };
    for (double v : {2e-5, 5e-5, 8e-5}) {
        Circuit c = linear_circuit(chain_graph(1));
        ConstantResult r = run_constant(c, v, 20.0);
        CHECK(r.steady);
        CHECK(r.state.x[0] == Approx(fixed_point(v)).epsilon(1e-4));
        CHECK(std::abs(r.state.x[0] - fixed_point(v)) < 1e-3);
    }
}

TEST_CASE("single device threshold behavior") {
    SUBCASE("just below threshold stays off") {
        Circuit c = linear_circuit(chain_graph(1));
        ConstantResult r = run_constant(c, 0.9e-4, 20.0);
        CHECK(r.steady);
        CHECK(r.state.x[0] <= 0.01);
        CHECK(r.state.x[0] > 0.0);
    }
    SUBCASE("above threshold turns fully on") {
        Circuit c = linear_circuit(chain_graph(1));
        ConstantResult r = run_constant(c, 1.2e-4, 20.0);
        CHECK(r.steady);
        CHECK(r.state.x[0] >= 0.99);
    }
}

TEST_CASE("adaptive stepping keeps the state change bounded") {
    SolverConfig cfg = SolverConfig::defaults_for(ModelKind::Linear);
    cfg.dx_max = 0.005;
    Circuit c = linear_circuit(chain_graph(1), cfg);
    CircuitState s = c.initial_state(6e-4); // strongly over-driven
    auto v_of_t = [](double) { return 6e-4; };
    while (s.t < 0.4 && s.x[0] < 1.0) {
        const std::vector<double> before = s.x;
        c.step(s, v_of_t, 0.4 - s.t);
        for (std::size_t e = 0; e < s.x.size(); ++e)
            CHECK(std::abs(s.x[e] - before[e]) <= cfg.dx_max * (1 + 1e-12));
    }
    CHECK(s.stats.dt_halvings > 0);
    CHECK(s.x[0] == 1.0);
}

TEST_CASE("step respects max_dt and collapses when it cannot proceed") {
    SUBCASE("max_dt clip") {
        Circuit c = linear_circuit(chain_graph(1));
        CircuitState s = c.initial_state(5e-5);
        const double dt = c.step(s, [](double) { return 5e-5; }, 2.5e-4);
        CHECK(dt == Approx(2.5e-4));
        CHECK(s.t == Approx(2.5e-4));
    }
    SUBCASE("collapse") {
        SolverConfig cfg = SolverConfig::defaults_for(ModelKind::Linear);
        cfg.dx_max = 1e-12;
        Circuit c = linear_circuit(chain_graph(1), cfg);
        CircuitState s = c.initial_state(6e-4);
        CHECK_THROWS_AS(c.step(s, [](double) { return 6e-4; }, 1.0), Error);
        try {
            c.step(s, [](double) { return 6e-4; }, 1.0);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::StepCollapse);
        }
    }
}

TEST_CASE("run_until samples on an exact uniform grid") {
    Circuit c = linear_circuit(chain_graph(2));
    CircuitState s = c.initial_state(5e-5);
    CurrentTrace trace;
    auto status = c.run_until(
        s, [](double) { return 5e-5; }, [](const CircuitState&, const CurrentTrace&) { return false; },
        0.25, trace);
    CHECK(status.timed_out);
    CHECK(!status.stopped);
    REQUIRE(trace.samples.size() == 26); // t = 0.00, 0.01, ..., 0.25
    for (std::size_t m = 0; m < trace.samples.size(); ++m)
        CHECK(trace.samples[m].t == 0.0 + static_cast<double>(m) * c.config().sample_dt);

    SUBCASE("immediate stop yields exactly one sample") {
        CircuitState s2 = c.initial_state(5e-5);
        CurrentTrace t2;
        auto st = c.run_until(
            s2, [](double) { return 5e-5; },
            [](const CircuitState&, const CurrentTrace&) { return true; }, 0.25, t2);
        CHECK(st.stopped);
        CHECK(t2.samples.size() == 1);
    }
}

TEST_CASE("zero drive decays exponentially") {
    Circuit c = linear_circuit(chain_graph(3));
    CircuitState s = c.initial_state(0.0);
    std::fill(s.x.begin(), s.x.end(), 0.5);
    c.refresh(s, 0.0);
    CurrentTrace trace;
    c.run_until(s, [](double) { return 0.0; },
                [](const CircuitState&, const CurrentTrace&) { return false; }, 0.1, trace);
    const double expect = 0.5 * std::exp(-0.1 / LinearParams{}.tau);
    for (double x : s.x) CHECK(x == Approx(expect).epsilon(0.01));
    CHECK(s.energy == 0.0);
    CHECK(s.i_total == 0.0);
}

TEST_CASE("energy matches a trapezoid over the trace") {
    Circuit c = linear_circuit(chain_graph(1));
    CircuitState s = c.initial_state(1.1e-4);
    CurrentTrace trace;
    c.run_until(s, [](double) { return 1.1e-4; },
                [](const CircuitState&, const CurrentTrace&) { return false; }, 2.0, trace);
    double acc = 0.0;
    for (std::size_t m = 0; m + 1 < trace.samples.size(); ++m)
        acc += 0.5 *
               (trace.samples[m].v_ctrl * trace.samples[m].i_total +
                trace.samples[m + 1].v_ctrl * trace.samples[m + 1].i_total) *
               (trace.samples[m + 1].t - trace.samples[m].t);
    CHECK(s.energy == Approx(acc).epsilon(0.01));
    CHECK(s.energy > 0.0);
}

TEST_CASE("linear solve scales linearly with voltage at fixed state") {
    const Graph g = generate_grid(5, 5, 0.1, 4);
    Circuit c = linear_circuit(g);
    CircuitState s = c.initial_state(1e-3);
    std::mt19937_64 gen = rng::engine(11);
    for (double& x : s.x) x = rng::uniform01(gen);
    c.refresh(s, 1e-3);
    const std::vector<double> phi1 = s.potential;
    const double i1 = s.i_total;
    c.refresh(s, 2e-3);
    for (std::size_t d = 0; d < phi1.size(); ++d)
        CHECK(s.potential[d] == Approx(2.0 * phi1[d]).epsilon(1e-12));
    CHECK(s.i_total == Approx(2.0 * i1).epsilon(1e-12));
}

TEST_CASE("chang solve: trivial zero bias and single-edge current") {
    Circuit c = chang_circuit(chain_graph(1));
    CircuitState s = c.initial_state(0.0);
    CHECK(s.i_total == 0.0);
    CHECK(s.stats.factorizations == 0); // nothing to factorize without interiors

    c.refresh(s, 0.2);
    const ChangParams p;
    CHECK(s.i_total == Approx(chang_current(0.0, 0.2, p)).epsilon(1e-12));
}

TEST_CASE("chang newton converges with tight node balance") {
    const Graph g = generate_grid(5, 5, 0.1, 8);
    Circuit c = chang_circuit(g);
    CircuitState s = c.initial_state(0.05);
    std::mt19937_64 gen = rng::engine(2);
    for (double& x : s.x) x = rng::uniform01(gen);
    c.refresh(s, 0.05);
    CHECK(s.stats.max_rel_kcl <= 1e-10);
    // residual at the returned interior potentials is below the Newton tol
    Eigen::VectorXd phi(c.interior().size());
    for (std::size_t r = 0; r < c.interior().size(); ++r)
        phi[r] = s.potential[c.interior()[r]];
    CHECK(c.residual_at(s.x, phi, 0.05).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("chang jacobian matches finite differences") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        std::mt19937_64 gen = rng::engine(seed);
        Graph g = ws_lattice(8, 4, 0.3, gen);
        g.start = 0;
        g.end = 4;
        Circuit c = chang_circuit(prune(g));
        const int m = static_cast<int>(c.interior().size());
        std::vector<double> x(c.edge_count());
        for (double& xe : x) xe = rng::uniform01(gen);
        Eigen::VectorXd phi(m);
        for (int r = 0; r < m; ++r) phi[r] = 0.1 * rng::uniform01(gen);
        const double v = 0.15;
        const Eigen::MatrixXd jac = c.jacobian_at(x, phi, v);
        Eigen::MatrixXd fd(m, m);
        const double h = 1e-7;
        for (int col = 0; col < m; ++col) {
            Eigen::VectorXd lo = phi, hi = phi;
            lo[col] -= h;
            hi[col] += h;
            fd.col(col) = (c.residual_at(x, hi, v) - c.residual_at(x, lo, v)) / (2 * h);
        }
        const double scale = jac.cwiseAbs().maxCoeff();
        CHECK((jac - fd).cwiseAbs().maxCoeff() / scale <= 1e-5);
    }
}

TEST_CASE("trace csv format") {
    CurrentTrace trace;
    trace.sample_dt = 0.5;
    trace.samples = {{0.0, 1e-4, 2e-7}, {0.5, 1.5e-4, 3.25e-7}};
    std::ostringstream out;
    write_trace_csv(trace, out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "t_s,v_ctrl_V,i_total_A");
    std::getline(in, line);
    CHECK(line == "0,0.0001,1.9999999999999999e-07");
    std::getline(in, line);
    CHECK(line == "0.5,0.00014999999999999999,3.2500000000000001e-07");
    CHECK(!std::getline(in, line));
}

TEST_CASE("device count must match edge count") {
    CHECK_THROWS_AS(Circuit(chain_graph(3), DeviceSet::uniform_linear(LinearParams{}, 2),
                            SolverConfig{}),
                    Error);
}
