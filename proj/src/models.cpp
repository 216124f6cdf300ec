#include "mempath/models.hpp"

#include "mempath/error.hpp"
#include "mempath/rng.hpp"

#include <cmath>

namespace mempath {

const char* to_string(ModelKind kind) {
    return kind == ModelKind::Linear ? "linear" : "chang";
}

ModelKind model_from_string(const std::string& name) {
    if (name == "linear") {
        return ModelKind::Linear;
    }
    if (name == "chang") {
        return ModelKind::Chang;
    }
    fail(ErrorKind::ConfigInvalid, "unknown model \"" + name + "\"");
}

double linear_conductance(double x, const LinearParams& p) {
    return p.g_on * x + p.g_off * (1.0 - x);
}

double linear_current(double x, double v, const LinearParams& p) {
    return v * linear_conductance(x, p);
}

double linear_dxdt(double x, double i, const LinearParams& p) {
    return p.gamma * std::abs(i) - x / p.tau;
}

double chang_current(double x, double v, const ChangParams& p) {
    // expm1 keeps the error relative for small v; with 1 - exp the bracket
    // carries an absolute eps that dominates node balances in dead pockets.
    return (1.0 - x) * p.alpha * -std::expm1(-p.beta * v) +
           x * p.gamma * std::sinh(p.delta * v);
}

double chang_didv(double x, double v, const ChangParams& p) {
    return (1.0 - x) * p.alpha * p.beta * std::exp(-p.beta * v) +
           x * p.gamma * p.delta * std::cosh(p.delta * v);
}

double chang_dxdt(double x, double v, const ChangParams& p) {
    return p.lambda * (std::expm1(p.eta1 * v) - std::expm1(-p.eta2 * v)) - x / p.tau;
}

double chang_small_signal(double x, const ChangParams& p) {
    return (1.0 - x) * p.alpha * p.beta + x * p.gamma * p.delta;
}

namespace {

// One truncated-Gaussian draw; the [1 %, 300 %] window keeps parameters
// physical (strictly positive) under any sigma_rel.
double draw(std::mt19937_64& gen, double nominal, double sigma_rel) {
    if (sigma_rel == 0.0) {
        return nominal;
    }
    const double lo = 0.01 * nominal;
    const double hi = 3.0 * nominal;
    for (;;) {
        const double value = nominal * (1.0 + sigma_rel * rng::normal01(gen));
        if (value >= lo && value <= hi) {
            return value;
        }
    }
}

} // namespace

std::vector<LinearParams> sample_varied_params(const LinearParams& nominal, double sigma_rel,
                                               int device_count, std::uint64_t seed) {
    std::vector<LinearParams> out(device_count);
    for (int i = 0; i < device_count; ++i) {
        auto gen = rng::engine(rng::mix(seed, static_cast<std::uint64_t>(i)));
        out[i].g_on = draw(gen, nominal.g_on, sigma_rel);
        out[i].g_off = draw(gen, nominal.g_off, sigma_rel);
        out[i].gamma = draw(gen, nominal.gamma, sigma_rel);
        out[i].tau = draw(gen, nominal.tau, sigma_rel);
    }
    return out;
}

std::vector<ChangParams> sample_varied_params(const ChangParams& nominal, double sigma_rel,
                                              int device_count, std::uint64_t seed) {
    std::vector<ChangParams> out(device_count);
    for (int i = 0; i < device_count; ++i) {
        auto gen = rng::engine(rng::mix(seed, static_cast<std::uint64_t>(i)));
        out[i].alpha = draw(gen, nominal.alpha, sigma_rel);
        out[i].beta = draw(gen, nominal.beta, sigma_rel);
        out[i].gamma = draw(gen, nominal.gamma, sigma_rel);
        out[i].delta = draw(gen, nominal.delta, sigma_rel);
        out[i].lambda = draw(gen, nominal.lambda, sigma_rel);
        out[i].eta1 = draw(gen, nominal.eta1, sigma_rel);
        out[i].eta2 = draw(gen, nominal.eta2, sigma_rel);
        out[i].tau = draw(gen, nominal.tau, sigma_rel);
    }
    return out;
}

DeviceSet DeviceSet::uniform_linear(const LinearParams& params, int count) {
    DeviceSet set;
    set.kind_ = ModelKind::Linear;
    set.count_ = count;
    set.nominal_linear_ = params;
    set.linear_.assign(count, params);
    return set;
}

DeviceSet DeviceSet::uniform_chang(const ChangParams& params, int count) {
    DeviceSet set;
    set.kind_ = ModelKind::Chang;
    set.count_ = count;
    set.nominal_chang_ = params;
    set.chang_.assign(count, params);
    return set;
}

DeviceSet DeviceSet::varied_linear(const LinearParams& nominal, double sigma_rel, int count,
                                   std::uint64_t seed) {
    DeviceSet set;
    set.kind_ = ModelKind::Linear;
    set.count_ = count;
    set.nominal_linear_ = nominal;
    set.linear_ = sample_varied_params(nominal, sigma_rel, count, seed);
    return set;
}

DeviceSet DeviceSet::varied_chang(const ChangParams& nominal, double sigma_rel, int count,
                                  std::uint64_t seed) {
    DeviceSet set;
    set.kind_ = ModelKind::Chang;
    set.count_ = count;
    set.nominal_chang_ = nominal;
    set.chang_ = sample_varied_params(nominal, sigma_rel, count, seed);
    return set;
}

double DeviceSet::current(int e, double x, double v) const {
    return kind_ == ModelKind::Linear ? linear_current(x, v, linear_[e])
                                      : chang_current(x, v, chang_[e]);
}

double DeviceSet::didv(int e, double x, double v) const {
    return kind_ == ModelKind::Linear ? linear_conductance(x, linear_[e])
                                      : chang_didv(x, v, chang_[e]);
}

double DeviceSet::dxdt(int e, double x, double v, double i) const {
    return kind_ == ModelKind::Linear ? linear_dxdt(x, i, linear_[e])
                                      : chang_dxdt(x, v, chang_[e]);
}

double DeviceSet::conductance(int e, double x) const {
    return kind_ == ModelKind::Linear ? linear_conductance(x, linear_[e])
                                      : chang_small_signal(x, chang_[e]);
}

double DeviceSet::delta_g_max() const {
    if (kind_ == ModelKind::Linear) {
        return nominal_linear_.g_on - nominal_linear_.g_off;
    }
    return nominal_chang_.gamma * nominal_chang_.delta -
           nominal_chang_.alpha * nominal_chang_.beta;
}

} // namespace mempath
