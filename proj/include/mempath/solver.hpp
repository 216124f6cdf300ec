#pragma once

#include "mempath/graph.hpp"
#include "mempath/kernels.hpp"
#include "mempath/models.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <functional>
#include <iosfwd>
#include <vector>

namespace mempath {

enum class Exec { Serial, OpenMP, Auto };

struct SolverConfig {
    double dt = 1e-3;          // base step, s
    double dx_max = 0.05;      // largest allowed per-step state change
    double newton_tol = 1e-12; // nodal residual, A (infinity norm)
    int newton_max_iter = 50;
    double sample_dt = 1e-2;   // trace sampling interval, s
    double t_max = 50.0;       // default wall for run_until, s
    Exec exec = Exec::Auto;
    int min_parallel_edges = 8192; // Auto switches to OpenMP at this edge count

    // Chang devices are ~100x slower than the linear ones, so their defaults
    // step and sample more coarsely.
    static SolverConfig defaults_for(ModelKind kind);
};

struct SolveStats {
    double max_rel_kcl = 0.0; // worst node imbalance / incident current magnitude
    long factorizations = 0;
    long newton_iterations = 0;
    long steps = 0;
    long dt_halvings = 0;
};

struct CircuitState {
    std::vector<double> x;         // per edge, in [0, 1]
    std::vector<double> potential; // per dense node (adjacency order)
    std::vector<double> v_branch;  // per edge, potential[u] - potential[v]
    std::vector<double> current;   // per edge, positive u -> v
    std::vector<double> dxdt;      // per edge at the current (x, v_branch)
    double t = 0.0;
    double v_ctrl = 0.0;
    double i_total = 0.0;      // A drawn from the source at the start node
    double power = 0.0;        // v_ctrl * i_total
    double energy = 0.0;       // J, trapezoidal integral of power
    double max_dxdt_eff = 0.0; // clamp-aware |dxdt| bound, steady-state measure
    SolveStats stats;
};

struct TraceSample {
    double t = 0.0;
    double v_ctrl = 0.0;
    double i_total = 0.0;
};

struct CurrentTrace {
    double sample_dt = 0.0;
    std::vector<TraceSample> samples;
};

// Header exactly: t_s,v_ctrl_V,i_total_A
void write_trace_csv(const CurrentTrace& trace, std::ostream& os);

// One graph wired with one device per edge, start node pinned to the control
// voltage and end node to ground. Owns the factorization workspace, hence the
// non-const solve entry points.
class Circuit {
public:
    Circuit(Graph graph, DeviceSet devices, SolverConfig config);

    const Graph& graph() const { return graph_; }
    const Adjacency& adjacency() const { return adj_; }
    const DeviceSet& devices() const { return devices_; }
    const SolverConfig& config() const { return cfg_; }
    SolverConfig& config() { return cfg_; }
    int edge_count() const { return static_cast<int>(graph_.edges.size()); }
    // Dense indices of the non-pinned nodes, in matrix order.
    const std::vector<int>& interior() const { return interior_; }

    // Fresh state at x = 0 everywhere, solved at the given control voltage.
    CircuitState initial_state(double v_ctrl);

    // Re-solve potentials, currents and rates at the state's x for a new
    // control voltage (state.t and energy are untouched).
    void refresh(CircuitState& state, double v_ctrl);

    // One adaptive explicit-Euler step of at most max_dt. The step shrinks
    // (down to config.dt / 64) until the clamped state change stays within
    // dx_max and the nodal solve converges; past the floor it throws
    // ErrorKind::StepCollapse. Returns the step actually taken.
    double step(CircuitState& state, const std::function<double(double)>& v_of_t,
                double max_dt);

    struct RunStatus {
        bool stopped = false;   // stop() returned true at a sample
        bool timed_out = false; // reached t_max without stop() firing
    };

    // Advance sample by sample, appending to the trace at a fixed sample_dt
    // grid anchored at the state's current time. stop() is evaluated at every
    // sample, including the initial one.
    RunStatus run_until(CircuitState& state, const std::function<double(double)>& v_of_t,
                        const std::function<bool(const CircuitState&, const CurrentTrace&)>& stop,
                        double t_max, CurrentTrace& trace);

    // Net current leaving the start node / entering the end node per the
    // state's branch currents; these match to rounding and back i_total.
    double current_out_of_start(const CircuitState& state) const;
    double current_into_end(const CircuitState& state) const;

    // Nodal balance over interior nodes at arbitrary inputs; used by the
    // finite-difference checks. Row order matches interior().
    Eigen::VectorXd residual_at(const std::vector<double>& x,
                                const Eigen::VectorXd& interior_phi, double v_ctrl) const;
    Eigen::MatrixXd jacobian_at(const std::vector<double>& x,
                                const Eigen::VectorXd& interior_phi, double v_ctrl) const;

private:
    void solve_fixed_x(CircuitState& state, double v_ctrl);
    void solve_linear(CircuitState& state, double v_ctrl);
    void solve_newton(CircuitState& state, double v_ctrl);
    void fill_rates(CircuitState& state);
    void scatter_matrix(std::span<const double> edge_weight);
    void scatter_residual(std::span<const double> current, Eigen::VectorXd& f) const;
    double residual_scale(std::span<const double> current) const;
    kernels::Dispatch dispatch() const;

    Graph graph_;
    Adjacency adj_;
    DeviceSet devices_;
    SolverConfig cfg_;

    std::vector<int> interior_;    // dense node index per matrix row
    std::vector<int> interior_of_; // dense node index -> matrix row or -1
    std::vector<int> slot_uu_, slot_vv_, slot_uv_, slot_vu_; // per edge, -1 if pinned
    Eigen::SparseMatrix<double> mat_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
    bool pattern_ready_ = false;

    // Scratch reused across solves.
    std::vector<double> g_work_, didv_work_, i_work_, vb_work_, x_work_;
    Eigen::VectorXd rhs_, f_work_, phi_work_;
};

} // namespace mempath
