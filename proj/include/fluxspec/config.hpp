// config.hpp: run configuration, JSON with unit-suffixed keys, canonicalized to SI on load

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fluxspec/analysis.hpp"
#include "fluxspec/dynamics.hpp"
#include "fluxspec/sequences.hpp"

namespace fluxspec {

struct SpectroscopyConfig {
    std::vector<double> nu_r_grid;           // Hz, nominal lock Rabi frequencies
    std::vector<double> bias_epsilon{0.0};   // Hz; 0 measures the delta channel
    Protocol protocol{Protocol::sl5_interleaved};
    std::vector<double> lock_tau;            // s, starting T1rho window
    bool adaptive_window{true};              // rescale the window to the measured rate
    std::vector<double> ir_tau;              // s
    int rabi_points{24};
    double rabi_periods{3.0};
    bool refit_gamma1_per_point{false};
    bool fit_model{true};
    int fit_lorentzians{2};
    std::optional<double> fit_alpha{0.9};

    bool operator==(const SpectroscopyConfig&) const = default;
};

struct EchoConfig {
    std::vector<double> tau;  // s, total free evolution
    Protocol protocol{Protocol::spin_echo};
    int n_pi{1};
    bool monte_carlo{false};

    bool operator==(const EchoConfig&) const = default;
};

struct OutputConfig {
    std::string dir{"out"};
    std::vector<std::string> formats{"csv"};  // csv, json

    bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
    QubitParams qubit;
    NoiseModels noise;
    std::vector<ExperimentSpec> experiments;
    SimConfig sim;
    PulseShape pulses;
    ReadoutCal readout;
    OutputConfig output;
    std::optional<SpectroscopyConfig> spectroscopy;
    std::optional<EchoConfig> echo;

    void validate() const;
    bool operator==(const RunConfig&) const = default;
};

// `origin` prefixes error locations (usually the file name).
RunConfig parse_config(const std::string& text, const std::string& origin = "config");
RunConfig load_config(const std::string& path);  // ConfigError when unreadable

// Canonical form: SI-suffixed keys, exact double round trip.
std::string serialize_config(const RunConfig& config);

NoiseModel parse_noise_model(const std::string& text, const std::string& origin = "noise");
std::string serialize_noise_model(const NoiseModel& model);

// 64-bit FNV-1a of the canonical serialization.
std::string config_hash(const RunConfig& config);

} // namespace fluxspec
