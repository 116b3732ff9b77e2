// sequences.cpp: pulse schedules and the experiment runner

#include "fluxspec/sequences.hpp"

#include <cmath>
#include <numbers>

#include "fluxspec/errors.hpp"

namespace fluxspec {

namespace {

constexpr double phase_x = 0.0;
constexpr double phase_y = std::numbers::pi / 2.0;
constexpr double phase_xbar = std::numbers::pi;
constexpr double phase_ybar = -std::numbers::pi / 2.0;

struct Builder {
    const ExperimentSpec& spec;
    const QubitParams& params;
    const PulseShape& shape;
    Schedule out;

    void pulse(double cycles, double phase) {
        PulseSegment s;
        s.kind = SegmentKind::gaussian_pulse;
        s.sigma = shape.sigma;
        s.duration = 4.0 * shape.sigma;
        s.phase = phase;
        s.carrier_detuning = spec.detuning;
        s.amplitude = calibrate_amplitude(s, params.theta(), cycles);
        out.push_back(s);
    }
    void idle(double duration) {
        if (duration <= 0.0) return;
        PulseSegment s;
        s.kind = SegmentKind::idle;
        s.duration = duration;
        s.carrier_detuning = spec.detuning;
        out.push_back(s);
    }
    void drive(double duration, double phase, double edge_sigma) {
        PulseSegment s;
        s.kind = SegmentKind::flat_top;
        s.duration = duration;
        s.edge_sigma = std::min(edge_sigma, 0.25 * duration);
        s.phase = phase;
        s.carrier_detuning = spec.detuning;
        s.amplitude = 2.0 * spec.lock_rabi / std::cos(params.theta());
        out.push_back(s);
    }
};

} // namespace

bool ExperimentSpec::needs_lock() const {
    switch (protocol) {
    case Protocol::rabi:
    case Protocol::rotary_echo:
    case Protocol::sl3:
    case Protocol::sl5a:
    case Protocol::sl5b:
    case Protocol::sl5_interleaved:
        return true;
    default:
        return false;
    }
}

void ExperimentSpec::validate() const {
    if (tau_grid.empty()) throw DomainError("experiment '" + name + "' has an empty tau grid");
    for (std::size_t i = 0; i < tau_grid.size(); ++i) {
        if (!(tau_grid[i] > 0.0)) throw DomainError("experiment '" + name + "': tau values must be > 0");
        if (i > 0 && !(tau_grid[i] > tau_grid[i - 1])) {
            throw DomainError("experiment '" + name + "': tau grid must be strictly increasing");
        }
    }
    if (needs_lock() && !(lock_rabi > 0.0)) throw DomainError("experiment '" + name + "' needs lock_rabi > 0");
    if (protocol == Protocol::cpmg && n_pi < 1) throw DomainError("cpmg needs n_pi >= 1");
    if (!(gap >= 0.0)) throw DomainError("gap must be >= 0");
}

Schedule build_schedule(const ExperimentSpec& spec, double tau, const QubitParams& params, const PulseShape& shape) {
    if (!(tau > 0.0)) throw DomainError("tau must be > 0");
    Builder b{spec, params, shape, {}};
    const double g = spec.gap;
    switch (spec.protocol) {
    case Protocol::sl3:
        b.pulse(0.25, phase_ybar);
        b.idle(g);
        b.drive(tau, phase_x, shape.lock_edge_sigma);
        b.idle(g);
        b.pulse(0.25, phase_ybar);
        break;
    case Protocol::sl5a:
    case Protocol::sl5b:
    case Protocol::sl5_interleaved: {
        const double end_phase = spec.protocol == Protocol::sl5b ? phase_y : phase_ybar;
        b.pulse(0.25, end_phase);
        b.idle(0.5 * g);
        b.pulse(0.5, phase_x);
        b.idle(0.5 * g);
        b.drive(tau, phase_x, shape.lock_edge_sigma);
        b.idle(0.5 * g);
        b.pulse(0.5, phase_x);
        b.idle(0.5 * g);
        b.pulse(0.25, end_phase);
        break;
    }
    case Protocol::inversion_recovery:
        b.pulse(0.5, phase_x);
        b.idle(tau);
        break;
    case Protocol::ramsey:
        b.pulse(0.25, phase_ybar);
        b.idle(tau);
        b.pulse(0.25, phase_ybar);
        break;
    case Protocol::spin_echo:
    case Protocol::cpmg: {
        const int n = spec.protocol == Protocol::cpmg ? spec.n_pi : 1;
        if (n < 1) throw DomainError("cpmg needs n_pi >= 1");
        b.pulse(0.25, phase_ybar);
        b.idle(0.5 * tau / n);
        for (int j = 0; j < n; ++j) {
            b.pulse(0.5, phase_x);
            b.idle(j + 1 < n ? tau / n : 0.5 * tau / n);
        }
        b.pulse(0.25, phase_ybar);
        break;
    }
    case Protocol::rabi:
        b.drive(tau, phase_x, 0.0);
        break;
    case Protocol::rotary_echo:
        b.drive(0.5 * tau, phase_x, 0.0);
        b.drive(0.5 * tau, phase_xbar, 0.0);
        break;
    }
    return b.out;
}

static DecayCurve run_curve(const ExperimentSpec& spec, Protocol protocol, std::uint64_t salt, const QubitParams& params,
                            const NoiseModels& models, const SimConfig& config, const ReadoutCal& cal,
                            const PulseShape& shape) {
    ExperimentSpec s = spec;
    s.protocol = protocol;
    DecayCurve curve;
    curve.label = to_string(protocol);
    for (std::size_t i = 0; i < spec.tau_grid.size(); ++i) {
        const double tau = spec.tau_grid[i];
        const auto schedule = build_schedule(s, tau, params, shape);
        SimConfig c = config;
        c.master_seed = sub_seed(config.master_seed, i);
        EnsembleOptions opt;
        opt.fast_salt = salt;
        const auto res = run_ensemble(params, schedule, models.delta, models.epsilon, c, opt);
        curve.tau.push_back(tau);
        curve.value.push_back(readout(res.mean_state.back(), cal));
        curve.stderr.push_back(0.5 * cal.visibility * res.stderr.back().z);
    }
    return curve;
}

std::vector<DecayCurve> run_experiment(const ExperimentSpec& spec, const QubitParams& params,
                                       const NoiseModels& models, const SimConfig& config, const ReadoutCal& cal,
                                       const PulseShape& shape) {
    spec.validate();
    params.validate();
    cal.validate();
    if (spec.protocol != Protocol::sl5_interleaved) {
        auto c = run_curve(spec, spec.protocol, 0, params, models, config, cal, shape);
        if (!spec.name.empty()) c.label = spec.name;
        return {c};
    }
    // The a/b runs at each tau share seeds for slow noise and differ in the fast stream.
    auto a = run_curve(spec, Protocol::sl5a, 0, params, models, config, cal, shape);
    auto b = run_curve(spec, Protocol::sl5b, 1, params, models, config, cal, shape);
    DecayCurve avg;
    avg.label = "average";
    for (std::size_t i = 0; i < a.tau.size(); ++i) {
        avg.tau.push_back(a.tau[i]);
        avg.value.push_back(0.5 * (a.value[i] + b.value[i]));
        avg.stderr.push_back(0.5 * std::hypot(a.stderr[i], b.stderr[i]));
    }
    return {a, b, avg};
}

} // namespace fluxspec
