#pragma once

#include "mempath/models.hpp"

#include <span>

// Per-edge sweeps of the time stepper. Each kernel has a serial reference
// implementation and an OpenMP variant; results are bitwise identical because
// every parallel loop is elementwise (no floating-point sum reorders) and the
// only reductions are max(), which is exact. The *_serial functions are the
// reference the tests and the benchmark compare against.

namespace mempath::kernels {

void branch_voltages_serial(std::span<const int> edge_u, std::span<const int> edge_v,
                            std::span<const double> potential, std::span<double> out);
void branch_voltages_omp(std::span<const int> edge_u, std::span<const int> edge_v,
                         std::span<const double> potential, std::span<double> out);

void linear_conductances_serial(std::span<const LinearParams> params,
                                std::span<const double> x, std::span<double> out);
void linear_conductances_omp(std::span<const LinearParams> params,
                             std::span<const double> x, std::span<double> out);

// Linear model: branch current and state rate in one pass.
void linear_rates_serial(std::span<const LinearParams> params, std::span<const double> x,
                         std::span<const double> v_branch, std::span<double> current,
                         std::span<double> dxdt);
void linear_rates_omp(std::span<const LinearParams> params, std::span<const double> x,
                      std::span<const double> v_branch, std::span<double> current,
                      std::span<double> dxdt);

// Chang model: current and dI/dV in one pass (shared exponentials).
void chang_eval_serial(std::span<const ChangParams> params, std::span<const double> x,
                       std::span<const double> v_branch, std::span<double> current,
                       std::span<double> didv);
void chang_eval_omp(std::span<const ChangParams> params, std::span<const double> x,
                    std::span<const double> v_branch, std::span<double> current,
                    std::span<double> didv);

void chang_rates_serial(std::span<const ChangParams> params, std::span<const double> x,
                        std::span<const double> v_branch, std::span<double> dxdt);
void chang_rates_omp(std::span<const ChangParams> params, std::span<const double> x,
                     std::span<const double> v_branch, std::span<double> dxdt);

// x_next = clamp(x + dt * dxdt, 0, 1); returns the largest |x_next - x|.
double euler_clamp_serial(std::span<const double> x, std::span<const double> dxdt,
                          double dt, std::span<double> x_next);
double euler_clamp_omp(std::span<const double> x, std::span<const double> dxdt,
                       double dt, std::span<double> x_next);

// Largest |dxdt| ignoring rates that push a clamped state further outward;
// this is the steady-state measure (a fully ON device counts as settled).
double max_effective_rate_serial(std::span<const double> x, std::span<const double> dxdt);
double max_effective_rate_omp(std::span<const double> x, std::span<const double> dxdt);

// Dispatchers used by the solver.
struct Dispatch {
    bool parallel = false;

    void branch_voltages(std::span<const int> eu, std::span<const int> ev,
                         std::span<const double> phi, std::span<double> out) const {
        parallel ? branch_voltages_omp(eu, ev, phi, out)
                 : branch_voltages_serial(eu, ev, phi, out);
    }
    void linear_conductances(std::span<const LinearParams> p, std::span<const double> x,
                             std::span<double> out) const {
        parallel ? linear_conductances_omp(p, x, out) : linear_conductances_serial(p, x, out);
    }
    void linear_rates(std::span<const LinearParams> p, std::span<const double> x,
                      std::span<const double> vb, std::span<double> i,
                      std::span<double> dxdt) const {
        parallel ? linear_rates_omp(p, x, vb, i, dxdt) : linear_rates_serial(p, x, vb, i, dxdt);
    }
    void chang_eval(std::span<const ChangParams> p, std::span<const double> x,
                    std::span<const double> vb, std::span<double> i,
                    std::span<double> didv) const {
        parallel ? chang_eval_omp(p, x, vb, i, didv) : chang_eval_serial(p, x, vb, i, didv);
    }
    void chang_rates(std::span<const ChangParams> p, std::span<const double> x,
                     std::span<const double> vb, std::span<double> dxdt) const {
        parallel ? chang_rates_omp(p, x, vb, dxdt) : chang_rates_serial(p, x, vb, dxdt);
    }
    double euler_clamp(std::span<const double> x, std::span<const double> dxdt, double dt,
                       std::span<double> x_next) const {
        return parallel ? euler_clamp_omp(x, dxdt, dt, x_next)
                        : euler_clamp_serial(x, dxdt, dt, x_next);
    }
    double max_effective_rate(std::span<const double> x, std::span<const double> dxdt) const {
        return parallel ? max_effective_rate_omp(x, dxdt) : max_effective_rate_serial(x, dxdt);
    }
};

} // namespace mempath::kernels
