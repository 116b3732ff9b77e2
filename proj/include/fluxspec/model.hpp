// model.hpp: device parameters, reference frames and the maps between them

#pragma once

#include <array>
#include <numbers>

namespace fluxspec {

inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double planck = 6.62607015e-34;     // J s
inline constexpr double boltzmann = 1.380649e-23;    // J/K

enum class Frame { lab, qubit, rotating };

const char* frame_name(Frame f);

struct BlochState {
    double x{0.0};
    double y{0.0};
    double z{-1.0};
    Frame frame{Frame::rotating};

    double norm() const;
    static BlochState ground(Frame f = Frame::rotating) { return {0.0, 0.0, -1.0, f}; }
};

struct QubitParams {
    double delta{5.4e9};          // tunnel coupling, Hz
    double epsilon{0.0};          // flux bias, Hz
    double gamma1{1.0 / 12e-6};   // free-evolution relaxation rate, 1/s
    double temperature{0.065};    // K

    double theta() const;         // quantization-axis tilt, rad
    double nu_q() const;          // level splitting, Hz
    void validate() const;

    bool operator==(const QubitParams&) const = default;
};

struct DriveParams {
    double amplitude{0.0};  // A_rf, Hz
    double carrier{0.0};    // nu_rf, Hz
    double phase{0.0};      // rad
};

struct DerivedSummary {
    double theta{0.0};
    double nu_q{0.0};
    double nu_r{0.0};       // resonant Rabi frequency
    double detuning{0.0};   // nu_q - nu_rf
    double eta{0.0};        // tilt of the effective field, 0 when nu_r == 0
    double nu_r_eff{0.0};   // effective Rabi frequency
};

DerivedSummary derived_params(const QubitParams& params, const DriveParams& drive);

// Steady-state <sigma_z'> of the cold bath: -tanh(h nu_q / 2 k_B T).
double thermal_polarization(const QubitParams& params);

// tanh(h f / 2 k_B T)
double thermal_factor(double f, double temperature);

BlochState to_qubit_frame(const BlochState& s, const QubitParams& params);
BlochState from_qubit_frame(const BlochState& s, const QubitParams& params);
BlochState to_rotating_frame(const BlochState& s, double carrier, double t);
BlochState from_rotating_frame(const BlochState& s, double carrier, double t);

// Field vectors (Hz) such that H/h = 1/2 * field . sigma in the named frame.
using FieldVector = std::array<double, 3>;
FieldVector lab_hamiltonian(const QubitParams& params, const DriveParams& drive, double t);
FieldVector qubit_hamiltonian(const QubitParams& params, const DriveParams& drive, double t);
FieldVector rwa_hamiltonian(const QubitParams& params, const DriveParams& drive);

// Rotates a field vector from lab to qubit axes with the same map used for states.
FieldVector rotate_to_qubit_axes(const FieldVector& v, double theta);

} // namespace fluxspec
