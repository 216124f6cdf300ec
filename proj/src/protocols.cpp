#include "mempath/protocols.hpp"

#include "mempath/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mempath {
namespace {

void check_detector(const KinkDetectorConfig& cfg) {
    if (cfg.window < 3 || cfg.window % 2 == 0)
        fail(ErrorKind::ConfigInvalid, "detector window must be odd and >= 3");
    if (cfg.warmup < 0.0) fail(ErrorKind::ConfigInvalid, "detector warmup must be >= 0");
}

// Single source of truth for the curvature measure so the offline and the
// streaming detectors agree bit for bit.
inline double normalized_d2(double s_prev, double s_mid, double s_next, double dtt) {
    return (s_next - 2.0 * s_mid + s_prev) / (dtt * s_next);
}

} // namespace

int detect_kink(const CurrentTrace& trace, const KinkDetectorConfig& cfg) {
    check_detector(cfg);
    const int n = static_cast<int>(trace.samples.size());
    const int w = cfg.window;
    const int h = (w - 1) / 2;
    if (n < w + 2) return -1;
    if (trace.sample_dt <= 0.0) fail(ErrorKind::ConfigInvalid, "trace sample_dt must be > 0");

    const double dtt = trace.sample_dt * trace.sample_dt;
    const double tiny = 1e-9 * trace.sample_dt;
    const double t0 = trace.samples[0].t;
    auto smooth = [&](int j) {
        double sum = 0.0;
        for (int k = j - h; k <= j + h; ++k) sum += trace.samples[k].i_total;
        return sum / static_cast<double>(w);
    };
    for (int i = h + 1; i <= n - 2 - h; ++i) {
        if (trace.samples[i].t - t0 < cfg.warmup - tiny) continue;
        const double s_next = smooth(i + 1);
        if (s_next <= 0.0) continue;
        if (normalized_d2(smooth(i - 1), smooth(i), s_next, dtt) < cfg.threshold) return i;
    }
    return -1;
}

KinkDetector::KinkDetector(double sample_dt, KinkDetectorConfig cfg)
    : cfg_(cfg), sample_dt_(sample_dt) {
    check_detector(cfg_);
    if (sample_dt <= 0.0) fail(ErrorKind::ConfigInvalid, "sample_dt must be > 0");
}

int KinkDetector::push(const TraceSample& s) {
    if (fired_index_ >= 0) return fired_index_;
    const int w = cfg_.window;
    const int h = (w - 1) / 2;
    if (count_ == 0) t0_ = s.t;
    raw_.push_back(s.i_total);
    if (static_cast<int>(raw_.size()) > w) raw_.pop_front();
    ++count_;

    if (static_cast<int>(raw_.size()) == w) {
        // window now centered at sample count_-1-h; same ascending sum as the
        // offline scan
        double sum = 0.0;
        for (double r : raw_) sum += r;
        smoothed_.push_back(sum / static_cast<double>(w));
        if (smoothed_.size() > 3) smoothed_.pop_front();
    }
    if (smoothed_.size() < 3) return -1;

    const long i = count_ - 2 - h; // index whose curvature is now decidable
    const double t_i = t0_ + static_cast<double>(i) * sample_dt_;
    const double tiny = 1e-9 * sample_dt_;
    if (t_i - t0_ < cfg_.warmup - tiny) return -1;
    const double s_next = smoothed_[2];
    if (s_next <= 0.0) return -1;
    const double dtt = sample_dt_ * sample_dt_;
    if (normalized_d2(smoothed_[0], smoothed_[1], s_next, dtt) < cfg_.threshold)
        fired_index_ = static_cast<int>(i);
    return fired_index_;
}

RampConfig RampConfig::for_model(ModelKind kind) {
    RampConfig ramp;
    if (kind == ModelKind::Chang) {
        ramp.v0 = 0.0;
        ramp.rate = 1e-3;
        ramp.t_max = 200.0;
        ramp.detector.warmup = 1.0;
    }
    return ramp;
}

ConstantResult run_constant(Circuit& circuit, double v_ctrl, double t_max, double steady_tol) {
    ConstantResult r;
    r.state = circuit.initial_state(v_ctrl);
    auto status = circuit.run_until(
        r.state, [v_ctrl](double) { return v_ctrl; },
        [steady_tol](const CircuitState& s, const CurrentTrace&) {
            return s.max_dxdt_eff < steady_tol;
        },
        t_max, r.trace);
    r.steady = status.stopped;
    return r;
}

RampResult run_ramp(Circuit& circuit, const RampConfig& ramp) {
    RampResult r;
    const double v0 = ramp.v0;
    const double rate = ramp.rate;
    auto v_of_t = [v0, rate](double t) { return v0 + rate * t; };
    r.state = circuit.initial_state(v_of_t(0.0));
    KinkDetector detector(circuit.config().sample_dt, ramp.detector);
    auto status = circuit.run_until(
        r.state, v_of_t,
        [&detector](const CircuitState&, const CurrentTrace& tr) {
            return detector.push(tr.samples.back()) >= 0;
        },
        ramp.t_max, r.trace);
    r.detected = status.stopped;
    if (r.detected) {
        r.fired_index = detector.fired_index();
        r.detection_time_s = r.trace.samples[r.fired_index].t;
        r.v_at_detection = v_of_t(r.detection_time_s);
    }
    return r;
}

SweepResult sweep_voltage(Circuit& circuit, std::span<const double> voltages, double t_max,
                          double steady_tol) {
    if (voltages.empty()) fail(ErrorKind::ConfigInvalid, "voltage sweep needs at least one point");
    const PathOracle oracle = bfs_oracle(circuit.graph());

    SweepResult r;
    r.points.reserve(voltages.size());
    for (double v : voltages) {
        ConstantResult cr = run_constant(circuit, v, t_max, steady_tol);
        SweepPoint p;
        p.v_ctrl = v;
        p.metrics = compute_delta_g(circuit, cr.state, oracle);
        p.steady = cr.steady;
        p.t_s = cr.state.t;
        p.energy_j = cr.state.energy;
        p.max_rel_kcl = cr.state.stats.max_rel_kcl;
        r.points.push_back(std::move(p));
    }

    std::vector<int> order(r.points.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return r.points[a].v_ctrl != r.points[b].v_ctrl ? r.points[a].v_ctrl < r.points[b].v_ctrl
                                                        : a < b;
    });
    int best = order[0];
    for (int idx : order)
        if (r.points[idx].metrics.delta_g > r.points[best].metrics.delta_g) best = idx;
    r.best_index = best;
    r.v_opt = r.points[best].v_ctrl;
    return r;
}

} // namespace mempath
