#include "mempath/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace mempath::kernels {
namespace {

// Element bodies shared by the serial and OpenMP loops so both variants run
// the exact same arithmetic.

inline double vb_at(std::span<const int> eu, std::span<const int> ev,
                    std::span<const double> phi, std::int64_t e) {
    return phi[eu[e]] - phi[ev[e]];
}

inline void linear_rate_at(const LinearParams& p, double x, double vb, double& i,
                           double& dxdt) {
    const double g = p.g_on * x + p.g_off * (1.0 - x);
    i = g * vb;
    dxdt = p.gamma * std::abs(i) - x / p.tau;
}

inline void chang_eval_at(const ChangParams& p, double x, double vb, double& i,
                          double& didv) {
    // same expressions as the scalar model functions so results match bitwise
    i = (1.0 - x) * p.alpha * -std::expm1(-p.beta * vb) +
        x * p.gamma * std::sinh(p.delta * vb);
    didv = (1.0 - x) * p.alpha * p.beta * std::exp(-p.beta * vb) +
           x * p.gamma * p.delta * std::cosh(p.delta * vb);
}

inline double chang_rate_at(const ChangParams& p, double x, double vb) {
    return p.lambda * (std::expm1(p.eta1 * vb) - std::expm1(-p.eta2 * vb)) - x / p.tau;
}

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

inline double effective_rate_at(double x, double r) {
    if (x >= 1.0 && r > 0.0) return 0.0;
    if (x <= 0.0 && r < 0.0) return 0.0;
    return std::abs(r);
}

} // namespace

void branch_voltages_serial(std::span<const int> eu, std::span<const int> ev,
                            std::span<const double> phi, std::span<double> out) {
    for (std::int64_t e = 0; e < std::ssize(out); ++e) out[e] = vb_at(eu, ev, phi, e);
}

void branch_voltages_omp(std::span<const int> eu, std::span<const int> ev,
                         std::span<const double> phi, std::span<double> out) {
    const std::int64_t n = std::ssize(out);
#pragma omp parallel for schedule(static)
    for (std::int64_t e = 0; e < n; ++e) out[e] = vb_at(eu, ev, phi, e);
}

void linear_conductances_serial(std::span<const LinearParams> params,
                                std::span<const double> x, std::span<double> out) {
    for (std::int64_t e = 0; e < std::ssize(out); ++e)
        out[e] = params[e].g_on * x[e] + params[e].g_off * (1.0 - x[e]);
}

void linear_conductances_omp(std::span<const LinearParams> params, std::span<const double> x,
                             std::span<double> out) {
    const std::int64_t n = std::ssize(out);
#pragma omp parallel for schedule(static)
    for (std::int64_t e = 0; e < n; ++e)
        out[e] = params[e].g_on * x[e] + params[e].g_off * (1.0 - x[e]);
}

void linear_rates_serial(std::span<const LinearParams> params, std::span<const double> x,
                         std::span<const double> vb, std::span<double> current,
                         std::span<double> dxdt) {
    for (std::int64_t e = 0; e < std::ssize(current); ++e)
        linear_rate_at(params[e], x[e], vb[e], current[e], dxdt[e]);
}

void linear_rates_omp(std::span<const LinearParams> params, std::span<const double> x,
                      std::span<const double> vb, std::span<double> current,
                      std::span<double> dxdt) {
    const std::int64_t n = std::ssize(current);
#pragma omp parallel for schedule(static)
    for (std::int64_t e = 0; e < n; ++e)
        linear_rate_at(params[e], x[e], vb[e], current[e], dxdt[e]);
}

void chang_eval_serial(std::span<const ChangParams> params, std::span<const double> x,
                       std::span<const double> vb, std::span<double> current,
                       std::span<double> didv) {
    for (std::int64_t e = 0; e < std::ssize(current); ++e)
        chang_eval_at(params[e], x[e], vb[e], current[e], didv[e]);
}

void chang_eval_omp(std::span<const ChangParams> params, std::span<const double> x,
                    std::span<const double> vb, std::span<double> current,
                    std::span<double> didv) {
    const std::int64_t n = std::ssize(current);
#pragma omp parallel for schedule(static)
    for (std::int64_t e = 0; e < n; ++e)
        chang_eval_at(params[e], x[e], vb[e], current[e], didv[e]);
}

void chang_rates_serial(std::span<const ChangParams> params, std::span<const double> x,
                        std::span<const double> vb, std::span<double> dxdt) {
    for (std::int64_t e = 0; e < std::ssize(dxdt); ++e)
        dxdt[e] = chang_rate_at(params[e], x[e], vb[e]);
}

void chang_rates_omp(std::span<const ChangParams> params, std::span<const double> x,
                     std::span<const double> vb, std::span<double> dxdt) {
    const std::int64_t n = std::ssize(dxdt);
#pragma omp parallel for schedule(static)
    for (std::int64_t e = 0; e < n; ++e) dxdt[e] = chang_rate_at(params[e], x[e], vb[e]);
}

double euler_clamp_serial(std::span<const double> x, std::span<const double> dxdt, double dt,
                          std::span<double> x_next) {
    double worst = 0.0;
    for (std::int64_t e = 0; e < std::ssize(x_next); ++e) {
        x_next[e] = clamp01(x[e] + dt * dxdt[e]);
        worst = std::max(worst, std::abs(x_next[e] - x[e]));
    }
    return worst;
}

double euler_clamp_omp(std::span<const double> x, std::span<const double> dxdt, double dt,
                       std::span<double> x_next) {
    const std::int64_t n = std::ssize(x_next);
    double worst = 0.0;
#pragma omp parallel for schedule(static) reduction(max : worst)
    for (std::int64_t e = 0; e < n; ++e) {
        x_next[e] = clamp01(x[e] + dt * dxdt[e]);
        worst = std::max(worst, std::abs(x_next[e] - x[e]));
    }
    return worst;
}

double max_effective_rate_serial(std::span<const double> x, std::span<const double> dxdt) {
    double worst = 0.0;
    for (std::int64_t e = 0; e < std::ssize(x); ++e)
        worst = std::max(worst, effective_rate_at(x[e], dxdt[e]));
    return worst;
}

double max_effective_rate_omp(std::span<const double> x, std::span<const double> dxdt) {
    const std::int64_t n = std::ssize(x);
    double worst = 0.0;
#pragma omp parallel for schedule(static) reduction(max : worst)
    for (std::int64_t e = 0; e < n; ++e)
        worst = std::max(worst, effective_rate_at(x[e], dxdt[e]));
    return worst;
}

} // namespace mempath::kernels
