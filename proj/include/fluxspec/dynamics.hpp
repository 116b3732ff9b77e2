// dynamics.hpp: Bloch-vector integration under shaped drive, classical noise and T1

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fluxspec/model.hpp"
#include "fluxspec/noisegen.hpp"

namespace fluxspec {

enum class SegmentKind { gaussian_pulse, flat_top, idle };
enum class IntegrationFrame { rotating_rwa, qubit_full };

struct PulseSegment {
    SegmentKind kind{SegmentKind::idle};
    double amplitude{0.0};         // peak A_rf, Hz
    double phase{0.0};             // rad; 0 = X, pi/2 = Y, pi = -X, -pi/2 = -Y
    double duration{0.0};          // s
    double sigma{0.0};             // gaussian_pulse width, s
    double edge_sigma{0.0};        // flat_top rise/fall width, s
    double carrier_detuning{0.0};  // nu_q - nu_rf during this segment, Hz

    // Envelope in [0, 1] at time t since the segment start.
    double envelope(double t) const;
    // Integral of the envelope over the segment, s.
    double envelope_area() const;
    void validate() const;
};

using Schedule = std::vector<PulseSegment>;

double schedule_duration(const Schedule& schedule);

// A_rf that makes the segment rotate by `cycles` full turns on resonance
// (0.25 for pi/2, 0.5 for pi).
double calibrate_amplitude(const PulseSegment& shape, double theta, double cycles);

struct SimConfig {
    double dt{1e-9};
    std::size_t n_trajectories{100};
    std::uint64_t master_seed{1};
    IntegrationFrame integration_frame{IntegrationFrame::rotating_rwa};
    bool include_t1{true};
    unsigned threads{1};  // speed only, never results

    bool operator==(const SimConfig&) const = default;
};

struct NoiseInput {
    const NoiseTrace* delta{nullptr};    // rad/s, may be null
    const NoiseTrace* epsilon{nullptr};  // rad/s, may be null
};

struct Trajectory {
    std::vector<double> times;
    std::vector<BlochState> states;  // rotating frame
};

// record_every = 0 records only the initial and final states.
Trajectory integrate_trajectory(const QubitParams& params, const Schedule& schedule, const NoiseInput& noise,
                                const SimConfig& config, BlochState initial = BlochState::ground(),
                                std::size_t record_every = 0);

struct TrajectoryResult {
    std::vector<double> times;
    std::vector<BlochState> mean_state;
    std::vector<BlochState> stderr;  // per-component standard error of the mean
    std::size_t n_trajectories{0};
};

struct EnsembleOptions {
    BlochState initial{BlochState::ground()};
    std::size_t record_every{0};
    // Selects the fast-noise stream; slow (Quasistatic) components ignore it so
    // runs that differ only in salt share their slow noise trajectory by trajectory.
    std::uint64_t fast_salt{0};
    // Trace length in samples, 0 for automatic.
    std::size_t min_trace_length{0};
    // Synthesize down to every PowerLaw f_low instead of folding the band below
    // the trace resolution into a per-trajectory constant. Much slower.
    bool resolve_cutoffs{false};
};

// Trace length that covers the schedule and resolves every PowerLaw f_low,
// rounded up to a power of two.
std::size_t trace_length(double duration, double dt, const NoiseModel& delta, const NoiseModel& epsilon);
// Default trace length: a power of two of at least four schedule durations.
std::size_t folded_trace_length(double duration, double dt);

struct TrajectoryNoise {
    NoiseTrace delta;
    NoiseTrace epsilon;
};

// Noise realization for trajectory k of a run (sub-seeded from the master seed).
TrajectoryNoise trajectory_noise(const Synthesizer* delta, const Synthesizer* epsilon, std::uint64_t master_seed,
                                 std::size_t k, std::uint64_t fast_salt = 0);

TrajectoryResult run_ensemble(const QubitParams& params, const Schedule& schedule, const NoiseModel& model_delta,
                              const NoiseModel& model_epsilon, const SimConfig& config,
                              const EnsembleOptions& options = {});

struct ReadoutCal {
    double visibility{1.0};
    double offset{0.0};
    void validate() const;

    bool operator==(const ReadoutCal&) const = default;
};

// Switching probability after the final projection pulse.
double readout(const BlochState& state, const ReadoutCal& cal);

} // namespace fluxspec
