#include "mempath/solver.hpp"

#include "mempath/error.hpp"
#include "mempath/format.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace mempath {

namespace {
// Relative node balance is measured against the incident current magnitude
// plus this floor, so nodes whose currents are pure rounding noise do not
// dominate the metric.
constexpr double kFloorCurrent = 1e-15; // A
}

SolverConfig SolverConfig::defaults_for(ModelKind kind) {
    SolverConfig cfg;
    if (kind == ModelKind::Chang) {
        cfg.dt = 1e-2;
        cfg.sample_dt = 1e-1;
        cfg.t_max = 200.0;
    }
    return cfg;
}

void write_trace_csv(const CurrentTrace& trace, std::ostream& os) {
    os << "t_s,v_ctrl_V,i_total_A\n";
    for (const TraceSample& s : trace.samples)
        os << g17(s.t) << ',' << g17(s.v_ctrl) << ',' << g17(s.i_total) << '\n';
}

Circuit::Circuit(Graph graph, DeviceSet devices, SolverConfig config)
    : graph_(std::move(graph)), adj_(build_adjacency(graph_)), devices_(std::move(devices)),
      cfg_(config) {
    if (devices_.size() != edge_count())
        fail(ErrorKind::ConfigInvalid, "device count " + std::to_string(devices_.size()) +
                                           " does not match edge count " +
                                           std::to_string(edge_count()));

    const int n = static_cast<int>(adj_.nodes.size());
    interior_of_.assign(n, -1);
    for (int d = 0; d < n; ++d) {
        if (d == adj_.start_index || d == adj_.end_index) continue;
        interior_of_[d] = static_cast<int>(interior_.size());
        interior_.push_back(d);
    }
    const int m = static_cast<int>(interior_.size());

    const int e_count = edge_count();
    slot_uu_.assign(e_count, -1);
    slot_vv_.assign(e_count, -1);
    slot_uv_.assign(e_count, -1);
    slot_vu_.assign(e_count, -1);

    mat_.resize(m, m);
    if (m > 0) {
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<std::size_t>(m) + 2 * graph_.edges.size());
        for (int r = 0; r < m; ++r) trips.emplace_back(r, r, 0.0);
        for (int e = 0; e < e_count; ++e) {
            const int ru = interior_of_[adj_.edge_u[e]];
            const int rv = interior_of_[adj_.edge_v[e]];
            if (ru >= 0 && rv >= 0) {
                trips.emplace_back(ru, rv, 0.0);
                trips.emplace_back(rv, ru, 0.0);
            }
        }
        mat_.setFromTriplets(trips.begin(), trips.end());
        mat_.makeCompressed();

        auto slot = [&](int row, int col) {
            for (int k = mat_.outerIndexPtr()[col]; k < mat_.outerIndexPtr()[col + 1]; ++k)
                if (mat_.innerIndexPtr()[k] == row) return k;
            fail(ErrorKind::SingularSystem, "nodal matrix pattern is missing an entry");
        };
        for (int e = 0; e < e_count; ++e) {
            const int ru = interior_of_[adj_.edge_u[e]];
            const int rv = interior_of_[adj_.edge_v[e]];
            if (ru >= 0) slot_uu_[e] = slot(ru, ru);
            if (rv >= 0) slot_vv_[e] = slot(rv, rv);
            if (ru >= 0 && rv >= 0) {
                slot_uv_[e] = slot(ru, rv);
                slot_vu_[e] = slot(rv, ru);
            }
        }
        ldlt_.analyzePattern(mat_);
        pattern_ready_ = true;
    }

    g_work_.resize(e_count);
    didv_work_.resize(e_count);
    i_work_.resize(e_count);
    vb_work_.resize(e_count);
    x_work_.resize(e_count);
    rhs_.resize(m);
    f_work_.resize(m);
    phi_work_.resize(m);
}

kernels::Dispatch Circuit::dispatch() const {
    bool par = cfg_.exec == Exec::OpenMP ||
               (cfg_.exec == Exec::Auto && edge_count() >= cfg_.min_parallel_edges);
    return kernels::Dispatch{par};
}

void Circuit::scatter_matrix(std::span<const double> w) {
    std::fill_n(mat_.valuePtr(), mat_.nonZeros(), 0.0);
    double* val = mat_.valuePtr();
    for (int e = 0; e < edge_count(); ++e) {
        if (slot_uu_[e] >= 0) val[slot_uu_[e]] += w[e];
        if (slot_vv_[e] >= 0) val[slot_vv_[e]] += w[e];
        if (slot_uv_[e] >= 0) {
            val[slot_uv_[e]] -= w[e];
            val[slot_vu_[e]] -= w[e];
        }
    }
}

void Circuit::scatter_residual(std::span<const double> current, Eigen::VectorXd& f) const {
    f.setZero();
    for (int e = 0; e < edge_count(); ++e) {
        const int ru = interior_of_[adj_.edge_u[e]];
        const int rv = interior_of_[adj_.edge_v[e]];
        if (ru >= 0) f[ru] += current[e]; // current leaves u through e
        if (rv >= 0) f[rv] -= current[e]; // and arrives at v
    }
}

double Circuit::residual_scale(std::span<const double> current) const {
    // Per-node imbalance relative to the incident current magnitude.
    const int m = static_cast<int>(interior_.size());
    if (m == 0) return 0.0;
    Eigen::VectorXd s = Eigen::VectorXd::Zero(m);
    for (int e = 0; e < edge_count(); ++e) {
        const int ru = interior_of_[adj_.edge_u[e]];
        const int rv = interior_of_[adj_.edge_v[e]];
        const double a = std::abs(current[e]);
        if (ru >= 0) s[ru] += a;
        if (rv >= 0) s[rv] += a;
    }
    double worst = 0.0;
    for (int r = 0; r < m; ++r)
        worst = std::max(worst, std::abs(f_work_[r]) / (s[r] + kFloorCurrent));
    return worst;
}

void Circuit::solve_linear(CircuitState& state, double v_ctrl) {
    const auto dk = dispatch();
    const int m = static_cast<int>(interior_.size());
    dk.linear_conductances(devices_.linear_params(), state.x, g_work_);

    if (m > 0) {
        scatter_matrix(g_work_);
        rhs_.setZero();
        for (int e = 0; e < edge_count(); ++e) {
            const int du = adj_.edge_u[e];
            const int dv = adj_.edge_v[e];
            const double pin_u = du == adj_.start_index ? v_ctrl : 0.0;
            const double pin_v = dv == adj_.start_index ? v_ctrl : 0.0;
            const int ru = interior_of_[du];
            const int rv = interior_of_[dv];
            if (ru >= 0 && rv < 0) rhs_[ru] += g_work_[e] * pin_v;
            if (rv >= 0 && ru < 0) rhs_[rv] += g_work_[e] * pin_u;
        }
        ldlt_.factorize(mat_);
        ++state.stats.factorizations;
        if (ldlt_.info() != Eigen::Success)
            fail(ErrorKind::SingularSystem, "nodal factorization failed (linear model)");
        phi_work_ = ldlt_.solve(rhs_);
    }

    auto apply_phi = [&] {
        for (int d = 0; d < static_cast<int>(adj_.nodes.size()); ++d) {
            if (d == adj_.start_index) state.potential[d] = v_ctrl;
            else if (d == adj_.end_index) state.potential[d] = 0.0;
            else state.potential[d] = phi_work_[interior_of_[d]];
        }
        dk.branch_voltages(adj_.edge_u, adj_.edge_v, state.potential, state.v_branch);
        dk.linear_rates(devices_.linear_params(), state.x, state.v_branch, state.current,
                        state.dxdt);
    };
    apply_phi();

    if (m > 0) {
        // Iterative refinement against the branch-current residual (not the
        // assembled matrix, which loses the cancellation) until the node
        // balance sits well under the 1e-10 relative bound or stops improving.
        scatter_residual(state.current, f_work_);
        double rel = residual_scale(state.current);
        Eigen::VectorXd phi_best = phi_work_;
        for (int round = 0; round < 6 && rel > 1e-12; ++round) {
            Eigen::VectorXd delta = ldlt_.solve(f_work_);
            phi_work_ -= delta;
            apply_phi();
            scatter_residual(state.current, f_work_);
            const double rel_new = residual_scale(state.current);
            if (rel_new >= rel) {
                phi_work_ = phi_best;
                apply_phi();
                scatter_residual(state.current, f_work_);
                break;
            }
            rel = rel_new;
            phi_best = phi_work_;
        }
        state.stats.max_rel_kcl = std::max(state.stats.max_rel_kcl, rel);
    }
}

void Circuit::solve_newton(CircuitState& state, double v_ctrl) {
    const auto dk = dispatch();
    const int m = static_cast<int>(interior_.size());
    const auto params = std::span<const ChangParams>(devices_.chang_params());

    if (m == 0) {
        for (int d = 0; d < static_cast<int>(adj_.nodes.size()); ++d)
            state.potential[d] = d == adj_.start_index ? v_ctrl : 0.0;
        dk.branch_voltages(adj_.edge_u, adj_.edge_v, state.potential, state.v_branch);
        dk.chang_eval(params, state.x, state.v_branch, state.current, didv_work_);
        return;
    }

    bool cold = v_ctrl != 0.0;
    for (int r = 0; r < m && cold; ++r)
        if (state.potential[interior_[r]] != 0.0) cold = false;
    if (cold) {
        // Small-signal linearization as the starting point: same matrix
        // pattern, conductance (1-x)*alpha*beta + x*gamma*delta per edge.
        for (int e = 0; e < edge_count(); ++e)
            g_work_[e] = chang_small_signal(state.x[e], params[e]);
        scatter_matrix(g_work_);
        rhs_.setZero();
        for (int e = 0; e < edge_count(); ++e) {
            const int du = adj_.edge_u[e];
            const int dv = adj_.edge_v[e];
            const int ru = interior_of_[du];
            const int rv = interior_of_[dv];
            if (ru >= 0 && rv < 0 && dv == adj_.start_index) rhs_[ru] += g_work_[e] * v_ctrl;
            if (rv >= 0 && ru < 0 && du == adj_.start_index) rhs_[rv] += g_work_[e] * v_ctrl;
        }
        ldlt_.factorize(mat_);
        ++state.stats.factorizations;
        if (ldlt_.info() != Eigen::Success)
            fail(ErrorKind::SingularSystem, "small-signal predictor factorization failed");
        phi_work_ = ldlt_.solve(rhs_);
    } else {
        for (int r = 0; r < m; ++r) phi_work_[r] = state.potential[interior_[r]];
    }

    // Evaluates currents/didv/residual at the interior potentials in
    // phi_work_ and returns the residual infinity norm.
    auto evaluate = [&](const Eigen::VectorXd& phi) {
        for (int d = 0; d < static_cast<int>(adj_.nodes.size()); ++d) {
            if (d == adj_.start_index) state.potential[d] = v_ctrl;
            else if (d == adj_.end_index) state.potential[d] = 0.0;
            else state.potential[d] = phi[interior_of_[d]];
        }
        dk.branch_voltages(adj_.edge_u, adj_.edge_v, state.potential, state.v_branch);
        dk.chang_eval(params, state.x, state.v_branch, state.current, didv_work_);
        scatter_residual(state.current, f_work_);
        return f_work_.lpNorm<Eigen::Infinity>();
    };

    double fnorm = evaluate(phi_work_);
    Eigen::VectorXd phi_try(m);
    bool converged = fnorm < cfg_.newton_tol;
    for (int iter = 0; iter < cfg_.newton_max_iter && !converged; ++iter) {
        scatter_matrix(didv_work_);
        ldlt_.factorize(mat_);
        ++state.stats.factorizations;
        if (ldlt_.info() != Eigen::Success)
            fail(ErrorKind::SingularSystem, "Newton factorization failed");
        const Eigen::VectorXd delta = ldlt_.solve(f_work_);

        double s = 1.0;
        for (;;) {
            phi_try = phi_work_ - s * delta;
            const double fnorm_try = evaluate(phi_try);
            if (fnorm_try < fnorm || fnorm_try < cfg_.newton_tol) {
                phi_work_ = phi_try;
                fnorm = fnorm_try;
                break;
            }
            s *= 0.5;
            if (s < 1e-10)
                fail(ErrorKind::NewtonNoConvergence,
                     "line search stalled at residual " + g17(fnorm) + " A");
        }
        ++state.stats.newton_iterations;
        converged = fnorm < cfg_.newton_tol;
    }
    if (!converged)
        fail(ErrorKind::NewtonNoConvergence,
             "residual " + g17(fnorm) + " A after " + std::to_string(cfg_.newton_max_iter) +
                 " iterations");

    // newton_tol is absolute; polish with full Newton steps until the node
    // balance is far below the 1e-10 relative bound or stops improving.
    double rel = residual_scale(state.current);
    for (int round = 0; round < 5 && rel > 1e-12; ++round) {
        scatter_matrix(didv_work_);
        ldlt_.factorize(mat_);
        ++state.stats.factorizations;
        if (ldlt_.info() != Eigen::Success) break;
        phi_try = phi_work_ - ldlt_.solve(f_work_);
        evaluate(phi_try);
        const double rel_new = residual_scale(state.current);
        if (rel_new >= rel) {
            evaluate(phi_work_); // restore the best evaluation
            break;
        }
        rel = rel_new;
        phi_work_ = phi_try;
    }
    state.stats.max_rel_kcl = std::max(state.stats.max_rel_kcl, rel);
}

void Circuit::fill_rates(CircuitState& state) {
    const auto dk = dispatch();
    if (devices_.kind() == ModelKind::Linear) {
        dk.linear_rates(devices_.linear_params(), state.x, state.v_branch, state.current,
                        state.dxdt);
    } else {
        dk.chang_rates(devices_.chang_params(), state.x, state.v_branch, state.dxdt);
    }
    state.max_dxdt_eff = dk.max_effective_rate(state.x, state.dxdt);
}

void Circuit::solve_fixed_x(CircuitState& state, double v_ctrl) {
    if (devices_.kind() == ModelKind::Linear) solve_linear(state, v_ctrl);
    else solve_newton(state, v_ctrl);
    state.v_ctrl = v_ctrl;
    state.i_total = current_out_of_start(state);
    state.power = v_ctrl * state.i_total;
}

CircuitState Circuit::initial_state(double v_ctrl) {
    CircuitState state;
    const int e_count = edge_count();
    state.x.assign(e_count, 0.0);
    state.potential.assign(adj_.nodes.size(), 0.0);
    state.v_branch.assign(e_count, 0.0);
    state.current.assign(e_count, 0.0);
    state.dxdt.assign(e_count, 0.0);
    solve_fixed_x(state, v_ctrl);
    fill_rates(state);
    return state;
}

void Circuit::refresh(CircuitState& state, double v_ctrl) {
    solve_fixed_x(state, v_ctrl);
    fill_rates(state);
}

double Circuit::step(CircuitState& state, const std::function<double(double)>& v_of_t,
                     double max_dt) {
    if (max_dt <= 0.0) return 0.0;
    const auto dk = dispatch();
    const double floor_dt = cfg_.dt / 64.0;
    double dt_try = std::min(cfg_.dt, max_dt);

    for (;;) {
        const double disp = dk.euler_clamp(state.x, state.dxdt, dt_try, x_work_);
        if (disp <= cfg_.dx_max) break;
        if (dt_try <= floor_dt * (1.0 + 1e-9))
            fail(ErrorKind::StepCollapse, "state change " + g17(disp) + " at dt floor " +
                                              g17(dt_try) + " s (t = " + g17(state.t) + " s)");
        dt_try *= 0.5;
        ++state.stats.dt_halvings;
    }

    const double power_before = state.power;
    std::vector<double> phi_snap = state.potential;
    for (;;) {
        const double t_new = state.t + dt_try;
        state.x.swap(x_work_); // candidate state in place
        try {
            solve_fixed_x(state, v_of_t(t_new));
        } catch (const Error& err) {
            state.x.swap(x_work_);
            state.potential = phi_snap;
            if (err.kind() != ErrorKind::NewtonNoConvergence ||
                dt_try <= floor_dt * (1.0 + 1e-9))
                throw;
            dt_try *= 0.5;
            ++state.stats.dt_halvings;
            dk.euler_clamp(state.x, state.dxdt, dt_try, x_work_);
            continue;
        }
        state.energy += 0.5 * (power_before + state.power) * dt_try;
        state.t = t_new;
        fill_rates(state);
        ++state.stats.steps;
        return dt_try;
    }
}

Circuit::RunStatus Circuit::run_until(
    CircuitState& state, const std::function<double(double)>& v_of_t,
    const std::function<bool(const CircuitState&, const CurrentTrace&)>& stop, double t_max,
    CurrentTrace& trace) {
    if (cfg_.sample_dt <= 0.0 || cfg_.dt <= 0.0)
        fail(ErrorKind::ConfigInvalid, "dt and sample_dt must be positive");
    trace.sample_dt = cfg_.sample_dt;
    const double t0 = state.t;
    const double tiny = 1e-9 * cfg_.sample_dt;

    if (std::abs(v_of_t(t0) - state.v_ctrl) > 0.0) refresh(state, v_of_t(t0));

    auto sample = [&] {
        trace.samples.push_back({state.t, state.v_ctrl, state.i_total});
        return stop(state, trace);
    };
    if (sample()) return {true, false};

    for (long m = 1;; ++m) {
        const double target = t0 + static_cast<double>(m) * cfg_.sample_dt;
        if (target > t_max + tiny) return {false, true};
        while (state.t < target - tiny) step(state, v_of_t, target - state.t);
        state.t = target; // keep the sample grid exact
        if (sample()) return {true, false};
    }
}

double Circuit::current_out_of_start(const CircuitState& state) const {
    double total = 0.0;
    for (const auto& [e, nbr] : adj_.incident[adj_.start_index])
        total += adj_.edge_u[e] == adj_.start_index ? state.current[e] : -state.current[e];
    return total;
}

double Circuit::current_into_end(const CircuitState& state) const {
    double total = 0.0;
    for (const auto& [e, nbr] : adj_.incident[adj_.end_index])
        total += adj_.edge_v[e] == adj_.end_index ? state.current[e] : -state.current[e];
    return total;
}

Eigen::VectorXd Circuit::residual_at(const std::vector<double>& x,
                                     const Eigen::VectorXd& interior_phi, double v_ctrl) const {
    const int m = static_cast<int>(interior_.size());
    std::vector<double> phi(adj_.nodes.size(), 0.0);
    phi[adj_.start_index] = v_ctrl;
    for (int r = 0; r < m; ++r) phi[interior_[r]] = interior_phi[r];
    Eigen::VectorXd f = Eigen::VectorXd::Zero(m);
    for (int e = 0; e < edge_count(); ++e) {
        const double vb = phi[adj_.edge_u[e]] - phi[adj_.edge_v[e]];
        const double i = devices_.current(e, x[e], vb);
        const int ru = interior_of_[adj_.edge_u[e]];
        const int rv = interior_of_[adj_.edge_v[e]];
        if (ru >= 0) f[ru] += i;
        if (rv >= 0) f[rv] -= i;
    }
    return f;
}

Eigen::MatrixXd Circuit::jacobian_at(const std::vector<double>& x,
                                     const Eigen::VectorXd& interior_phi, double v_ctrl) const {
    const int m = static_cast<int>(interior_.size());
    std::vector<double> phi(adj_.nodes.size(), 0.0);
    phi[adj_.start_index] = v_ctrl;
    for (int r = 0; r < m; ++r) phi[interior_[r]] = interior_phi[r];
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, m);
    for (int e = 0; e < edge_count(); ++e) {
        const double vb = phi[adj_.edge_u[e]] - phi[adj_.edge_v[e]];
        const double d = devices_.didv(e, x[e], vb);
        const int ru = interior_of_[adj_.edge_u[e]];
        const int rv = interior_of_[adj_.edge_v[e]];
        if (ru >= 0) jac(ru, ru) += d;
        if (rv >= 0) jac(rv, rv) += d;
        if (ru >= 0 && rv >= 0) {
            jac(ru, rv) -= d;
            jac(rv, ru) -= d;
        }
    }
    return jac;
}

} // namespace mempath
