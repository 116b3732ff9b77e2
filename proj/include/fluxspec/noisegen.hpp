// noisegen.hpp: parametric noise spectra, trace synthesis and periodogram estimates
//
// PSDs are two-sided in rad^2/s against f in Hz: the variance of a trace is the
// integral of S over (-inf, inf), i.e. twice the integral over positive f.

#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <variant>
#include <vector>

namespace fluxspec {

struct PowerLaw {
    double amplitude{0.0};  // A, PSD = A / f^alpha
    double alpha{1.0};
    double f_low{1e3};      // plateau below, 0 means no cutoff (analytic use only)
    double f_high{std::numeric_limits<double>::infinity()};

    bool operator==(const PowerLaw&) const = default;
};

struct LorentzianBump {
    double s_peak{0.0};
    double center{0.0};     // F, Hz
    double width{1.0};      // W, half width at half maximum, Hz

    bool operator==(const LorentzianBump&) const = default;
};

struct RtnLorentzian {
    double variance{0.0};     // rad^2/s^2
    double switch_rate{0.0};  // Hz, per state

    bool operator==(const RtnLorentzian&) const = default;
};

struct White {
    double level{0.0};

    bool operator==(const White&) const = default;
};

// Per-trace constant offset with Gaussian amplitude; contributes only at f = 0.
struct Quasistatic {
    double variance{0.0};

    bool operator==(const Quasistatic&) const = default;
};

using NoiseComponent = std::variant<PowerLaw, LorentzianBump, RtnLorentzian, White, Quasistatic>;

struct NoiseModel {
    std::vector<NoiseComponent> components;

    bool empty() const { return components.empty(); }
    void validate() const;

    bool operator==(const NoiseModel&) const = default;
};

struct NoiseTrace {
    double dt{0.0};
    std::vector<double> samples;  // rad/s
    std::uint64_t seed{0};
};

enum class Channel { none, delta, epsilon };

struct SpectrumEstimate {
    std::vector<double> freq;   // Hz
    std::vector<double> psd;    // rad^2/s
    std::vector<double> err;
    std::vector<bool> flagged;  // excluded from fits
    Channel channel{Channel::none};
};

double lorentzian_shape(double f, double center, double width);
double component_psd(const NoiseComponent& c, double f);
double evaluate_psd(const NoiseModel& model, double f);

// Sum of Quasistatic variances.
double quasistatic_variance(const NoiseModel& model);
// Smallest PowerLaw f_low, or +inf when the model has none.
double lowest_cutoff(const NoiseModel& model);

NoiseModel scaled(const NoiseModel& model, double weight);
NoiseModel weighted_sum(const NoiseModel& a, double wa, const NoiseModel& b, double wb);

std::uint64_t sub_seed(std::uint64_t master, std::uint64_t k);

// Variance carried by the band |f| < f_max of a Gaussian spectral component,
// rad^2/s^2. Zero for RtnLorentzian and Quasistatic.
double band_variance(const NoiseComponent& c, double f_max);

// Reusable synthesis setup for a fixed (model, dt, n). generate() is const and
// thread safe. Quasistatic components draw from slow_seed, all others from
// fast_seed; component i uses sub_seed(seed, i).
// With fold_low_band the Gaussian power below half the bin spacing, which the
// trace cannot resolve, becomes a per-trace constant drawn from slow_seed
// instead of raising BandTooShort.
class Synthesizer {
public:
    Synthesizer(const NoiseModel& model, double dt, std::size_t n, bool fold_low_band = false);
    ~Synthesizer();
    Synthesizer(const Synthesizer&) = delete;
    Synthesizer& operator=(const Synthesizer&) = delete;

    NoiseTrace generate(std::uint64_t slow_seed, std::uint64_t fast_seed) const;
    std::size_t size() const { return n_; }
    double dt() const { return dt_; }

private:
    struct Plan;
    NoiseModel model_;
    double dt_;
    std::size_t n_;
    std::vector<std::vector<double>> bin_amplitude_;  // per spectral component, empty for others
    std::vector<double> folded_variance_;              // per component, fold_low_band only
    bool spectral_{false};
    std::unique_ptr<Plan> plan_;
};

NoiseTrace synthesize(const NoiseModel& model, double dt, std::size_t n, std::uint64_t seed);
NoiseTrace synthesize_rtn(double variance, double switch_rate, double dt, std::size_t n, std::uint64_t seed);

// Averaged periodogram over positive frequencies k/(n dt), k = 1..n/2.
SpectrumEstimate estimate_psd(const std::vector<NoiseTrace>& traces);

void write_trace_csv(std::ostream& os, const NoiseTrace& trace);

} // namespace fluxspec
