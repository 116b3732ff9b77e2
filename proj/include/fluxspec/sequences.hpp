// sequences.hpp: schedule builders for every protocol and the experiment runner

#pragma once

#include <string>
#include <vector>

#include "fluxspec/dynamics.hpp"
#include "fluxspec/protocol.hpp"

namespace fluxspec {

struct ExperimentSpec {
    std::string name;                 // output label
    Protocol protocol{Protocol::sl5a};
    std::vector<double> tau_grid;     // s
    double lock_rabi{0.0};            // Hz, locking / Rabi drive strength
    double detuning{0.0};             // Hz, nu_q - nu_rf
    double gap{5e-9};                 // s, idle time between pulses
    int n_pi{1};                      // cpmg only

    bool needs_lock() const;
    void validate() const;

    bool operator==(const ExperimentSpec&) const = default;
};

struct PulseShape {
    double sigma{2.5e-9};            // pi and pi/2 pulses last 4 sigma
    double lock_edge_sigma{2.5e-9};  // rise and fall of locking pulses

    bool operator==(const PulseShape&) const = default;
};

struct NoiseModels {
    NoiseModel delta;
    NoiseModel epsilon;

    bool operator==(const NoiseModels&) const = default;
};

struct DecayCurve {
    std::string label;
    std::vector<double> tau;
    std::vector<double> value;   // P_SW
    std::vector<double> stderr;
};

Schedule build_schedule(const ExperimentSpec& spec, double tau, const QubitParams& params,
                        const PulseShape& shape = {});

// Curves for the protocol; sl5_interleaved yields sl5a, sl5b and their average.
std::vector<DecayCurve> run_experiment(const ExperimentSpec& spec, const QubitParams& params,
                                       const NoiseModels& models, const SimConfig& config,
                                       const ReadoutCal& cal = {}, const PulseShape& shape = {});

} // namespace fluxspec
