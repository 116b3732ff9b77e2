// analysis.hpp: decay fitting, rate-to-PSD inversion, spectrum-model fits and echo reports

#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fluxspec/noisegen.hpp"
#include "fluxspec/sequences.hpp"
#include "fluxspec/theory.hpp"

namespace fluxspec {

enum class DecayLaw { exponential, exp_gaussian, damped_cosine, rabi_full };

std::string to_string(DecayLaw law);

struct FitOptions {
    std::optional<double> fixed_offset;    // pin the long-time plateau
    std::optional<double> frequency_hint;  // Hz, oscillating laws
};

struct FitResult {
    std::string model;
    std::vector<std::string> names;               // parameter order of the covariance
    std::map<std::string, double> params;         // rate (1/s), amplitude, offset, frequency (Hz), var_nu (Hz^2) ...
    std::map<std::string, double> errors;         // 1 sigma
    std::vector<std::vector<double>> covariance;
    double residual_rms{0.0};
    double chi2{0.0};
    std::vector<std::string> warnings;

    double rate() const { return params.at("rate"); }
    double rate_error() const { return errors.at("rate"); }
    double value(double tau) const;  // fitted curve
};

// Weighted least squares: value = offset + amplitude * law(tau).
FitResult fit_decay(const DecayCurve& curve, DecayLaw law, const FitOptions& options = {});

struct RatePoint {
    double nu_r{0.0};        // Hz
    double gamma_1rho{0.0};  // 1/s
    double err{0.0};
};

// Delta channel when theta == 0, epsilon channel otherwise (needs s_delta_ref).
SpectrumEstimate extract_spectrum(const std::vector<RatePoint>& rates, double gamma1, double theta,
                                  const SpectrumEstimate* s_delta_ref = nullptr, double gamma1_err = 0.0);

// Linear interpolation in log f (clamped at the ends).
double interpolate_spectrum(const SpectrumEstimate& est, double f, double* err = nullptr);

struct SpectrumFitOptions {
    int n_lorentzians{2};
    std::optional<double> fixed_alpha{0.9};
    std::vector<LorentzianBump> initial;  // optional starting bumps
};

struct SpectrumFit {
    NoiseModel model;        // PowerLaw followed by the Lorentzians
    PowerLaw power_law;
    std::vector<LorentzianBump> bumps;
    std::map<std::string, double> params;
    std::map<std::string, double> errors;
    double cost{0.0};
    std::vector<std::string> warnings;
};

SpectrumFit fit_spectrum_model(const SpectrumEstimate& est, const SpectrumFitOptions& options = {});

struct BumpComparison {
    double s_peak{0.0};
    double center{0.0};
    double width{0.0};
    double max() const;
};

// |a - b| / max(|a|, |b|) per parameter.
BumpComparison compare_bumps(const LorentzianBump& a, const LorentzianBump& b);

struct EchoReport {
    std::vector<double> tau;
    std::vector<double> coherence;
    std::optional<double> dip_tau;       // strict local minimum of the coherence
    std::optional<double> shoulder_tau;  // local minimum of the decay rate d(chi)/d(tau)
};

EchoReport echo_dip_report(const NoiseModel& model, const std::vector<double>& tau_grid,
                           const FilterProtocol& protocol = {Protocol::spin_echo, 1});

void write_curve_csv(std::ostream& os, const DecayCurve& curve);
void write_spectrum_csv(std::ostream& os, const SpectrumEstimate& est);
std::string fit_to_json(const FitResult& fit);
std::string spectrum_to_json(const SpectrumEstimate& est);

} // namespace fluxspec
