// dynamics.cpp: piecewise-constant rotation integrator, T1 damping and the trajectory ensemble

#include "fluxspec/dynamics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "fluxspec/errors.hpp"

namespace fluxspec {

namespace {

constexpr double max_step_phase = 0.05;  // field * dt bound, cycles
constexpr double pulse_substep_phase = 0.02;

double shifted_gaussian(double u, double sigma, double edge) {
    const double e0 = std::exp(-0.5 * edge * edge / (sigma * sigma));
    const double g = std::exp(-0.5 * u * u / (sigma * sigma));
    return std::max(0.0, (g - e0) / (1.0 - e0));
}

// sin(pi x) / (pi x)
double sinc_pi(double x) {
    if (x == 0.0) return 1.0;
    const double a = std::numbers::pi * x;
    return std::sin(a) / a;
}

// Integral of the shifted gaussian over [-edge, 0].
double half_shifted_area(double sigma, double edge) {
    const double e0 = std::exp(-0.5 * edge * edge / (sigma * sigma));
    const double g = sigma * std::sqrt(std::numbers::pi / 2.0) * std::erf(edge / (std::sqrt(2.0) * sigma));
    return (g - e0 * edge) / (1.0 - e0);
}

// Right-handed rotation of r about field omega (Hz) for time h: dr/dt = 2 pi omega x r.
inline void rotate(double r[3], double ox, double oy, double oz, double h) {
    const double mag = std::sqrt(ox * ox + oy * oy + oz * oz);
    if (mag == 0.0) return;
    const double a = two_pi * mag * h;
    const double kx = ox / mag, ky = oy / mag, kz = oz / mag;
    const double c = std::cos(a), s = std::sin(a);
    const double kr = kx * r[0] + ky * r[1] + kz * r[2];
    const double cx = ky * r[2] - kz * r[1];
    const double cy = kz * r[0] - kx * r[2];
    const double cz = kx * r[1] - ky * r[0];
    const double one_c = (1.0 - c) * kr;
    r[0] = r[0] * c + cx * s + kx * one_c;
    r[1] = r[1] * c + cy * s + ky * one_c;
    r[2] = r[2] * c + cz * s + kz * one_c;
}

struct Damping {
    double exy{1.0};
    double ez{1.0};
    double z_eq{-1.0};
    void apply(double r[3]) const {
        r[0] *= exy;
        r[1] *= exy;
        r[2] = z_eq + (r[2] - z_eq) * ez;
    }
};

} // namespace

double PulseSegment::envelope(double t) const {
    if (t < 0.0 || t > duration) return 0.0;
    switch (kind) {
    case SegmentKind::idle:
        return 0.0;
    case SegmentKind::gaussian_pulse:
        return shifted_gaussian(t - 0.5 * duration, sigma, 0.5 * duration);
    case SegmentKind::flat_top: {
        if (edge_sigma <= 0.0) return 1.0;
        const double rise = 2.0 * edge_sigma;
        if (t < rise) return shifted_gaussian(t - rise, edge_sigma, rise);
        if (t > duration - rise) return shifted_gaussian(t - (duration - rise), edge_sigma, rise);
        return 1.0;
    }
    }
    return 0.0;
}

double PulseSegment::envelope_area() const {
    switch (kind) {
    case SegmentKind::idle:
        return 0.0;
    case SegmentKind::gaussian_pulse:
        return 2.0 * half_shifted_area(sigma, 0.5 * duration);
    case SegmentKind::flat_top: {
        if (edge_sigma <= 0.0) return duration;
        const double rise = 2.0 * edge_sigma;
        return duration - 2.0 * rise + 2.0 * half_shifted_area(edge_sigma, rise);
    }
    }
    return 0.0;
}

void PulseSegment::validate() const {
    if (!(duration > 0.0)) throw DomainError("segment duration must be > 0");
    if (!(amplitude >= 0.0)) throw DomainError("segment amplitude must be >= 0");
    if (kind == SegmentKind::gaussian_pulse) {
        if (!(sigma > 0.0)) throw DomainError("gaussian pulse needs sigma > 0");
        if (duration < 4.0 * sigma * (1.0 - 1e-9)) throw DomainError("gaussian pulse duration must be >= 4 sigma");
    }
    if (kind == SegmentKind::flat_top) {
        if (!(edge_sigma >= 0.0)) throw DomainError("flat_top edge_sigma must be >= 0");
        if (duration < 4.0 * edge_sigma * (1.0 - 1e-9)) throw DomainError("flat_top duration must be >= 4 edge_sigma");
    }
}

double schedule_duration(const Schedule& schedule) {
    double t = 0.0;
    for (const auto& s : schedule) t += s.duration;
    return t;
}

double calibrate_amplitude(const PulseSegment& shape, double theta, double cycles) {
    const double area = shape.envelope_area();
    const double c = std::cos(theta);
    if (!(area > 0.0) || !(c > 0.0)) throw DomainError("cannot calibrate a segment with zero area or cos(theta) <= 0");
    return 2.0 * cycles / (c * area);
}

Trajectory integrate_trajectory(const QubitParams& params, const Schedule& schedule, const NoiseInput& noise,
                                const SimConfig& config, BlochState initial, std::size_t record_every) {
    params.validate();
    if (!(config.dt > 0.0)) throw DomainError("dt must be > 0");
    if (initial.frame != Frame::rotating) throw FrameMismatch("initial state must be in the rotating frame");
    for (const auto& s : schedule) s.validate();

    const double theta = params.theta();
    const double cth = std::cos(theta), sth = std::sin(theta);
    const double total = schedule_duration(schedule);

    // Longitudinal qubit-frame fluctuation in Hz.
    std::vector<double> dnu;
    double noise_dt = 0.0;
    auto add_trace = [&](const NoiseTrace* tr, double w) {
        if (!tr || w == 0.0) return;
        if (!(tr->dt > 0.0)) throw CoverageError("noise trace has dt <= 0");
        if (tr->dt > config.dt * (1.0 + 1e-9)) {
            throw CoverageError("noise trace resolution " + std::to_string(tr->dt) + " s is coarser than dt");
        }
        if (static_cast<double>(tr->samples.size()) * tr->dt < total * (1.0 - 1e-12)) {
            throw CoverageError("noise trace covers " + std::to_string(tr->samples.size() * tr->dt) +
                                " s, schedule lasts " + std::to_string(total) + " s");
        }
        if (dnu.empty()) {
            noise_dt = tr->dt;
            dnu.assign(tr->samples.size(), 0.0);
        } else if (tr->dt != noise_dt || tr->samples.size() != dnu.size()) {
            throw CoverageError("delta and epsilon traces must share dt and length");
        }
        for (std::size_t j = 0; j < dnu.size(); ++j) dnu[j] += w * tr->samples[j] / two_pi;
    };
    add_trace(noise.delta, cth);
    add_trace(noise.epsilon, sth);

    double dnu_max = 0.0;
    for (double v : dnu) dnu_max = std::max(dnu_max, std::abs(v));

    const bool full = config.integration_frame == IntegrationFrame::qubit_full;
    double lock_max = 0.0;
    for (const auto& s : schedule) {
        const double nu = s.kind == SegmentKind::flat_top ? 0.5 * s.amplitude * cth : 0.0;
        lock_max = std::max(lock_max, std::hypot(nu, s.carrier_detuning) + dnu_max);
    }
    if (!full && std::max(lock_max, dnu_max) * config.dt >= max_step_phase) {
        throw StabilityError("dt too large: max(nu_R', |dnu|) * dt = " +
                             std::to_string(std::max(lock_max, dnu_max) * config.dt) + " must be < 0.05");
    }
    const double nu_q = params.nu_q();
    const double carrier = full && !schedule.empty() ? nu_q - schedule.front().carrier_detuning : 0.0;
    if (full) {
        for (const auto& s : schedule) {
            if (s.carrier_detuning != schedule.front().carrier_detuning) {
                throw DomainError("qubit_full integration needs one carrier for the whole schedule");
            }
        }
    }

    Damping damp;
    const double z_eq = thermal_polarization(params);
    const bool t1 = config.include_t1 && params.gamma1 > 0.0;

    Trajectory out;
    double r[3] = {initial.x, initial.y, initial.z};
    double t = 0.0;
    auto record = [&](double when) {
        BlochState st{r[0], r[1], r[2], full ? Frame::qubit : Frame::rotating};
        if (full) st = to_rotating_frame(st, carrier, when);
        out.times.push_back(when);
        out.states.push_back(st);
    };
    record(0.0);

    auto noise_at = [&](double when) -> double {
        if (dnu.empty()) return 0.0;
        auto idx = static_cast<std::size_t>(when / noise_dt);
        return dnu[std::min(idx, dnu.size() - 1)];
    };

    std::size_t step_count = 0;
    bool last_recorded = false;
    for (const auto& seg : schedule) {
        const std::size_t m = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(seg.duration / config.dt)));
        const double h = seg.duration / static_cast<double>(m);
        const double nu_amp = 0.5 * seg.amplitude * cth;
        std::size_t q = 1;
        if (full) {
            q = static_cast<std::size_t>(std::ceil((nu_q + seg.amplitude) * h / (0.5 * max_step_phase)));
        } else if (seg.kind == SegmentKind::gaussian_pulse || nu_amp * h >= max_step_phase) {
            q = static_cast<std::size_t>(std::ceil(nu_amp * h / pulse_substep_phase));
        }
        q = std::max<std::size_t>(q, 1);
        const double hh = h / static_cast<double>(q);
        // Averaging the drive over a sub-step and rotating about a frozen field
        // each scale the co-rotating coupling by sinc(pi f hh); undo both.
        const double full_gain = full ? 1.0 / (sinc_pi(carrier * hh) * sinc_pi(nu_q * hh)) : 1.0;
        if (t1) {
            damp.exy = std::exp(-0.5 * params.gamma1 * hh);
            damp.ez = std::exp(-params.gamma1 * hh);
            damp.z_eq = z_eq;
        }
        const double cph = std::cos(seg.phase), sph = std::sin(seg.phase);
        for (std::size_t i = 0; i < m; ++i) {
            const double t_step = t + static_cast<double>(i) * h;
            for (std::size_t j = 0; j < q; ++j) {
                const double a = t_step + static_cast<double>(j) * hh;
                const double local = a - t + 0.5 * hh;
                const double env = seg.kind == SegmentKind::idle ? 0.0 : seg.envelope(local);
                const double dn = noise_at(a + 0.5 * hh);
                if (!full) {
                    const double nu = nu_amp * env;
                    rotate(r, nu * cph, nu * sph, seg.carrier_detuning + dn, hh);
                } else {
                    // Drive averaged exactly over the sub-step.
                    const double w = two_pi * carrier;
                    const double avg = (std::sin(w * (a + hh) + seg.phase) - std::sin(w * a + seg.phase)) / (w * hh);
                    const double rf = seg.amplitude * env * avg;
                    rotate(r, rf * cth * full_gain, 0.0, nu_q + dn + rf * sth, hh);
                }
                if (t1) damp.apply(r);
            }
            ++step_count;
            last_recorded = record_every > 0 && step_count % record_every == 0;
            if (last_recorded) record(t_step + h);
        }
        t += seg.duration;
    }
    if (!last_recorded) record(t);
    return out;
}

std::size_t trace_length(double duration, double dt, const NoiseModel& delta, const NoiseModel& epsilon) {
    double need = std::ceil(duration / dt) + 2.0;
    const double f = std::min(lowest_cutoff(delta), lowest_cutoff(epsilon));
    if (std::isfinite(f) && f > 0.0) need = std::max(need, std::ceil(1.0 / (f * dt)));
    std::size_t n = 2;
    while (static_cast<double>(n) < need) n <<= 1;
    return n;
}

std::size_t folded_trace_length(double duration, double dt) {
    const double need = std::max(4.0 * std::ceil(duration / dt), std::ceil(duration / dt) + 2.0);
    std::size_t n = 2;
    while (static_cast<double>(n) < need) n <<= 1;
    return n;
}

TrajectoryNoise trajectory_noise(const Synthesizer* delta, const Synthesizer* epsilon, std::uint64_t master_seed,
                                 std::size_t k, std::uint64_t fast_salt) {
    const std::uint64_t s = sub_seed(master_seed, k);
    TrajectoryNoise tn;
    if (delta) tn.delta = delta->generate(sub_seed(s, 0), sub_seed(s, 2 + 2 * fast_salt));
    if (epsilon) tn.epsilon = epsilon->generate(sub_seed(s, 1), sub_seed(s, 3 + 2 * fast_salt));
    return tn;
}

TrajectoryResult run_ensemble(const QubitParams& params, const Schedule& schedule, const NoiseModel& model_delta,
                              const NoiseModel& model_epsilon, const SimConfig& config,
                              const EnsembleOptions& options) {
    if (config.n_trajectories < 1) throw DomainError("n_trajectories must be >= 1");
    params.validate();
    const double theta = params.theta();
    const bool use_delta = !model_delta.empty() && std::cos(theta) != 0.0;
    const bool use_eps = !model_epsilon.empty() && std::sin(theta) != 0.0;
    const double total = schedule_duration(schedule);
    std::size_t n = options.min_trace_length;
    if (n == 0) {
        n = options.resolve_cutoffs ? trace_length(total, config.dt, use_delta ? model_delta : NoiseModel{},
                                                   use_eps ? model_epsilon : NoiseModel{})
                                    : folded_trace_length(total, config.dt);
    }

    const bool fold = !options.resolve_cutoffs;
    std::unique_ptr<Synthesizer> sd, se;
    if (use_delta) sd = std::make_unique<Synthesizer>(model_delta, config.dt, n, fold);
    if (use_eps) se = std::make_unique<Synthesizer>(model_epsilon, config.dt, n, fold);

    // Trajectories are reduced in fixed blocks so the sums do not depend on threading.
    constexpr std::size_t block = 32;
    const std::size_t n_traj = config.n_trajectories;
    const std::size_t n_blocks = (n_traj + block - 1) / block;
    struct BlockSum {
        std::vector<double> times;
        std::vector<double> sum;     // 3 per record
        std::vector<double> sum_sq;
    };
    std::vector<BlockSum> sums(n_blocks);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
        try {
            for (;;) {
                const std::size_t b = next.fetch_add(1);
                if (b >= n_blocks) return;
                auto& bs = sums[b];
                const std::size_t end = std::min(n_traj, (b + 1) * block);
                for (std::size_t k = b * block; k < end; ++k) {
                    auto tn = trajectory_noise(sd.get(), se.get(), config.master_seed, k, options.fast_salt);
                    NoiseInput in{use_delta ? &tn.delta : nullptr, use_eps ? &tn.epsilon : nullptr};
                    auto tr = integrate_trajectory(params, schedule, in, config, options.initial, options.record_every);
                    if (bs.sum.empty()) {
                        bs.times = tr.times;
                        bs.sum.assign(3 * tr.states.size(), 0.0);
                        bs.sum_sq.assign(3 * tr.states.size(), 0.0);
                    }
                    for (std::size_t i = 0; i < tr.states.size(); ++i) {
                        const double v[3] = {tr.states[i].x, tr.states[i].y, tr.states[i].z};
                        for (int c = 0; c < 3; ++c) {
                            bs.sum[3 * i + c] += v[c];
                            bs.sum_sq[3 * i + c] += v[c] * v[c];
                        }
                    }
                }
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = n_blocks;
        }
    };

    const unsigned n_threads = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(n_blocks)));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    TrajectoryResult res;
    res.n_trajectories = n_traj;
    res.times = sums.front().times;
    const std::size_t n_rec = res.times.size();
    std::vector<double> sum(3 * n_rec, 0.0), sum_sq(3 * n_rec, 0.0);
    for (const auto& bs : sums) {
        for (std::size_t i = 0; i < 3 * n_rec; ++i) {
            sum[i] += bs.sum[i];
            sum_sq[i] += bs.sum_sq[i];
        }
    }
    const double m = static_cast<double>(n_traj);
    for (std::size_t i = 0; i < n_rec; ++i) {
        double mean[3], err[3];
        for (int c = 0; c < 3; ++c) {
            mean[c] = sum[3 * i + c] / m;
            err[c] = 0.0;
            if (n_traj > 1) {
                const double var = std::max(0.0, (sum_sq[3 * i + c] - m * mean[c] * mean[c]) / (m - 1.0));
                err[c] = std::sqrt(var / m);
            }
        }
        res.mean_state.push_back({mean[0], mean[1], mean[2], Frame::rotating});
        res.stderr.push_back({err[0], err[1], err[2], Frame::rotating});
    }
    return res;
}

void ReadoutCal::validate() const {
    if (!(visibility > 0.0 && visibility <= 1.0)) throw DomainError("readout visibility must lie in (0, 1]");
    if (!(offset >= 0.0 && offset < 1.0)) throw DomainError("readout offset must lie in [0, 1)");
}

double readout(const BlochState& state, const ReadoutCal& cal) {
    return cal.offset + cal.visibility * 0.5 * (1.0 + state.z);
}

} // namespace fluxspec
