#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mempath {

enum class ModelKind { Linear, Chang };

const char* to_string(ModelKind kind);
ModelKind model_from_string(const std::string& name);

// Generic linear memristor: I = V (g_on x + g_off (1 - x)),
// dx/dt = gamma |I| - x / tau.
struct LinearParams {
    double g_on = 1e-1;  // S
    double g_off = 1e-4; // S
    double gamma = 1e6;  // 1/(A s)
    double tau = 0.1;    // s
};

// Chang et al. Pd/WO3/W device:
// I = (1 - x) alpha (1 - exp(-beta V)) + x gamma sinh(delta V),
// dx/dt = lambda (exp(eta1 V) - exp(-eta2 V)) - x / tau.
struct ChangParams {
    double alpha = 5e-7;  // S
    double beta = 0.5;    // 1/V
    double gamma = 4e-6;  // S
    double delta = 2.0;   // 1/V
    double lambda = 4.5;  // 1/s
    double eta1 = 0.004;  // 1/V
    double eta2 = 4.0;    // 1/V
    double tau = 10.0;    // s
};

double linear_current(double x, double v, const LinearParams& p);
double linear_conductance(double x, const LinearParams& p);
double linear_dxdt(double x, double i, const LinearParams& p);

double chang_current(double x, double v, const ChangParams& p);
double chang_didv(double x, double v, const ChangParams& p);
double chang_dxdt(double x, double v, const ChangParams& p);
// Zero-bias small-signal conductance dI/dV at V = 0.
double chang_small_signal(double x, const ChangParams& p);

// Per-device parameter draws: every scalar independently from
// Normal(nominal, sigma_rel * nominal), truncated to [0.01, 3] x nominal by
// resampling. Device i depends only on (seed, i), never on device_count.
std::vector<LinearParams> sample_varied_params(const LinearParams& nominal, double sigma_rel,
                                               int device_count, std::uint64_t seed);
std::vector<ChangParams> sample_varied_params(const ChangParams& nominal, double sigma_rel,
                                              int device_count, std::uint64_t seed);

// The device laws of one circuit, one entry per edge.
class DeviceSet {
public:
    static DeviceSet uniform_linear(const LinearParams& params, int count);
    static DeviceSet uniform_chang(const ChangParams& params, int count);
    static DeviceSet varied_linear(const LinearParams& nominal, double sigma_rel, int count,
                                   std::uint64_t seed);
    static DeviceSet varied_chang(const ChangParams& nominal, double sigma_rel, int count,
                                  std::uint64_t seed);

    ModelKind kind() const { return kind_; }
    int size() const { return count_; }

    double current(int e, double x, double v) const;
    double didv(int e, double x, double v) const;
    // The linear law drives x with current, the Chang law with voltage; both
    // are passed so callers need not care.
    double dxdt(int e, double x, double v, double i) const;
    double conductance(int e, double x) const; // small-signal

    // Largest achievable conductance contrast, from the nominal parameters.
    double delta_g_max() const;

    const LinearParams& nominal_linear() const { return nominal_linear_; }
    const ChangParams& nominal_chang() const { return nominal_chang_; }
    const std::vector<LinearParams>& linear_params() const { return linear_; }
    const std::vector<ChangParams>& chang_params() const { return chang_; }

private:
    ModelKind kind_ = ModelKind::Linear;
    int count_ = 0;
    LinearParams nominal_linear_;
    ChangParams nominal_chang_;
    std::vector<LinearParams> linear_;
    std::vector<ChangParams> chang_;
};

} // namespace mempath
