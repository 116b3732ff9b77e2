// theory.hpp: closed-form rates, steady states, decay laws and filter-function dephasing

#pragma once

#include <array>
#include <complex>
#include <string>

#include "fluxspec/model.hpp"
#include "fluxspec/noisegen.hpp"
#include "fluxspec/protocol.hpp"

namespace fluxspec {

struct FramePsd {
    double s_xprime{0.0};
    double s_zprime{0.0};
};

FramePsd frame_psd(const NoiseModel& model_delta, const NoiseModel& model_epsilon, double theta, double f);

// Longitudinal (z') noise model: cos^2 theta * delta + sin^2 theta * epsilon.
NoiseModel longitudinal_model(const NoiseModel& model_delta, const NoiseModel& model_epsilon, double theta);

struct GbeRates {
    double gamma_x{0.0};
    double gamma_y{0.0};
    double gamma_z{0.0};
    double gamma_1rho{0.0};
    double gamma_nu{0.0};
    double gamma_rabi_dagger{0.0};
    double gamma_phi_rho{0.0};
};

// Weak-drive rates with the phenomenological Gamma1 standing in for S_x'(nu_q) / 2.
GbeRates gbe_rates(const QubitParams& params, const DriveParams& drive, const NoiseModel& model_delta,
                   const NoiseModel& model_epsilon);

// Full rates with S_x' evaluated from the models at nu_q and nu_q +- nu_R.
GbeRates gbe_rates_full(const QubitParams& params, const DriveParams& drive, const NoiseModel& model_delta,
                        const NoiseModel& model_epsilon);

struct SteadyState {
    double sx{0.0};          // first-order <sigma_X>
    double sy{0.0};
    double sz{0.0};
    double sz_tilted{0.0};   // <sigma_Z'> along the effective field
    bool regime_warning{false};
    std::string message;
};

SteadyState steady_state(const QubitParams& params, const DriveParams& drive, const NoiseModel& model_delta,
                         const NoiseModel& model_epsilon, double temperature);

// Exact fixed point of dr/dt = 2 pi (nu_r, 0, detuning) x r - diag(gamma) r + drift.
std::array<double, 3> bloch_steady_state(double nu_r, double detuning, const std::array<double, 3>& gamma,
                                         const std::array<double, 3>& drift);

struct NoiseMoments {
    double var_nu{0.0};    // <dnu^2>, Hz^2
    double var_nu_r{0.0};  // <dnu_R^2>, Hz^2
};

double decay_law(Protocol protocol, const QubitParams& params, const DriveParams& drive, const NoiseMoments& moments,
                 const GbeRates& rates, double tau);

// Gaussian average of exp(i 2 pi (nu_R' - nu_R) tau) over dnu ~ N(0, var_nu), by quadrature.
// exact = false uses the quadratic expansion dnu^2 / (2 nu_R).
std::complex<double> rabi_detuning_average(double nu_r, double var_nu, double tau, bool exact = false);

// Closed form of |rabi_detuning_average| in the quadratic expansion.
double rabi_algebraic_factor(double nu_r, double var_nu, double tau);

struct FilterProtocol {
    Protocol kind{Protocol::ramsey};  // ramsey, spin_echo or cpmg
    int n_pi{1};
};

// |Y(f, tau)|^2 of the protocol's +-1 toggling function, s^2.
double filter_weight(const FilterProtocol& protocol, double f, double tau);

// chi = 1/2 integral over all f of S |Y|^2.
double dephasing_exponent(const NoiseModel& model, const FilterProtocol& protocol, double tau);
double filter_function_decay(const NoiseModel& model, const FilterProtocol& protocol, double tau);

// Electron Larmor frequency, Hz.
double larmor_estimate(double field_tesla);

} // namespace fluxspec
