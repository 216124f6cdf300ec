#pragma once

#include "mempath/readout.hpp"
#include "mempath/solver.hpp"

#include <deque>
#include <span>
#include <vector>

namespace mempath {

struct KinkDetectorConfig {
    int window = 5;           // centered moving average width, odd and >= 3
    double threshold = -0.01; // fires when normalized curvature drops below, 1/s^2
    double warmup = 0.1;      // s after the first sample before firing is allowed
};

// Offline scan of a uniformly sampled trace. The current is smoothed with the
// centered moving average, the second difference at sample i is normalized by
// the smoothed value at i+1 (the most recent one available online), and the
// first armed sample below threshold fires. Returns that sample index, or -1.
// The measure is invariant to time shifts and to rescaling the current.
int detect_kink(const CurrentTrace& trace, const KinkDetectorConfig& cfg);

// Streaming equivalent: feed samples in order; push() returns the fired kink
// index as soon as it is decidable (a lag of (window-1)/2 + 1 samples), else
// -1. Matches detect_kink bit for bit on the same trace.
class KinkDetector {
public:
    KinkDetector(double sample_dt, KinkDetectorConfig cfg);
    int push(const TraceSample& s);
    bool fired() const { return fired_index_ >= 0; }
    int fired_index() const { return fired_index_; }

private:
    KinkDetectorConfig cfg_;
    double sample_dt_ = 0.0;
    double t0_ = 0.0;
    long count_ = 0;
    std::deque<double> raw_;      // last window raw currents
    std::deque<double> smoothed_; // last three smoothed values
    int fired_index_ = -1;
};

struct RampConfig {
    double v0 = 1e-4;   // V at t = 0
    double rate = 5e-4; // V/s
    double t_max = 50.0;
    KinkDetectorConfig detector;

    // Chang devices need a slower, longer ramp from zero bias.
    static RampConfig for_model(ModelKind kind);
};

struct ConstantResult {
    CircuitState state;
    CurrentTrace trace;
    bool steady = false; // max effective |dx/dt| fell below steady_tol
};

// Holds v_ctrl fixed until the device states settle or t_max passes.
ConstantResult run_constant(Circuit& circuit, double v_ctrl, double t_max,
                            double steady_tol = 1e-6);

struct RampResult {
    CircuitState state;
    CurrentTrace trace;
    bool detected = false;
    int fired_index = -1;
    double detection_time_s = 0.0; // trace time of the kink sample
    double v_at_detection = 0.0;
};

// Ramps v(t) = v0 + rate*t with the streaming detector attached; stops at the
// first kink or at t_max (detected == false then, no throw).
RampResult run_ramp(Circuit& circuit, const RampConfig& ramp);

struct SweepPoint {
    double v_ctrl = 0.0;
    PathMetrics metrics;
    bool steady = false;
    double t_s = 0.0;    // simulated time spent at this voltage
    double energy_j = 0.0;
    double max_rel_kcl = 0.0; // worst node balance seen during this trial
};

struct SweepResult {
    std::vector<SweepPoint> points; // in the caller's voltage order
    int best_index = -1;            // argmax delta_g, ties to the lowest voltage
    double v_opt = 0.0;
};

// Independent constant-drive trials (state reset between voltages), scored by
// the shortest-path margin.
SweepResult sweep_voltage(Circuit& circuit, std::span<const double> voltages, double t_max,
                          double steady_tol = 1e-6);

} // namespace mempath
