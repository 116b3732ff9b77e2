// noisegen.cpp: PSD evaluation, FFT trace synthesis, RTN and periodograms

#include "fluxspec/noisegen.hpp"

#include <fftw3.h>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <cmath>
#include <mutex>
#include <ostream>
#include <random>
#include <string>

#include "fluxspec/errors.hpp"
#include "fluxspec/model.hpp"

namespace fluxspec {

namespace {

// FFTW's planner is not thread safe; execution on new arrays is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double[], FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

RealBuffer alloc_real(std::size_t n) { return RealBuffer(fftw_alloc_real(n)); }
ComplexBuffer alloc_complex(std::size_t n) { return ComplexBuffer(fftw_alloc_complex(n)); }

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

bool is_spectral(const NoiseComponent& c) {
    return std::holds_alternative<PowerLaw>(c) || std::holds_alternative<LorentzianBump>(c) ||
           std::holds_alternative<White>(c);
}

} // namespace

std::uint64_t sub_seed(std::uint64_t master, std::uint64_t k) {
    return splitmix64(splitmix64(master) ^ splitmix64(k + 0x632be59bd9b4e019ULL));
}

void NoiseModel::validate() const {
    for (const auto& c : components) {
        if (const auto* p = std::get_if<PowerLaw>(&c)) {
            if (!(p->amplitude >= 0.0)) throw DomainError("power law amplitude must be >= 0");
            if (!(p->alpha >= 0.0 && p->alpha <= 2.0)) throw DomainError("power law alpha must lie in [0, 2]");
            if (!(p->f_low >= 0.0 && p->f_low < p->f_high)) throw DomainError("power law needs 0 <= f_low < f_high");
        } else if (const auto* l = std::get_if<LorentzianBump>(&c)) {
            if (!(l->s_peak >= 0.0)) throw DomainError("lorentzian s_peak must be >= 0");
            if (!(l->width > 0.0)) throw DomainError("lorentzian width must be > 0");
            if (!(l->center >= 0.0)) throw DomainError("lorentzian center must be >= 0");
        } else if (const auto* r = std::get_if<RtnLorentzian>(&c)) {
            if (!(r->variance >= 0.0)) throw DomainError("rtn variance must be >= 0");
            if (!(r->switch_rate >= 0.0)) throw DomainError("rtn switch rate must be >= 0");
        } else if (const auto* w = std::get_if<White>(&c)) {
            if (!(w->level >= 0.0)) throw DomainError("white level must be >= 0");
        } else if (const auto* q = std::get_if<Quasistatic>(&c)) {
            if (!(q->variance >= 0.0)) throw DomainError("quasistatic variance must be >= 0");
        }
    }
}

double lorentzian_shape(double f, double center, double width) {
    const double d = f - center;
    return width * width / (d * d + width * width);
}

double component_psd(const NoiseComponent& c, double f) {
    if (const auto* p = std::get_if<PowerLaw>(&c)) {
        if (f > p->f_high) return 0.0;
        return p->amplitude / std::pow(std::max(f, p->f_low), p->alpha);
    }
    if (const auto* l = std::get_if<LorentzianBump>(&c)) return l->s_peak * lorentzian_shape(f, l->center, l->width);
    if (const auto* r = std::get_if<RtnLorentzian>(&c)) {
        if (r->switch_rate <= 0.0) return 0.0;
        const double tc = 1.0 / (2.0 * r->switch_rate);
        const double w = two_pi * f * tc;
        return 2.0 * r->variance * tc / (1.0 + w * w);
    }
    if (const auto* w = std::get_if<White>(&c)) return w->level;
    return 0.0;
}

double evaluate_psd(const NoiseModel& model, double f) {
    if (!(f > 0.0)) throw DomainError("evaluate_psd needs f > 0, got " + std::to_string(f));
    double s = 0.0;
    for (const auto& c : model.components) s += component_psd(c, f);
    return s;
}

double quasistatic_variance(const NoiseModel& model) {
    double v = 0.0;
    for (const auto& c : model.components)
        if (const auto* q = std::get_if<Quasistatic>(&c)) v += q->variance;
    return v;
}

double lowest_cutoff(const NoiseModel& model) {
    double f = std::numeric_limits<double>::infinity();
    for (const auto& c : model.components)
        if (const auto* p = std::get_if<PowerLaw>(&c)) f = std::min(f, p->f_low);
    return f;
}

NoiseModel scaled(const NoiseModel& model, double weight) {
    NoiseModel out = model;
    for (auto& c : out.components) {
        std::visit(
            [weight](auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, PowerLaw>) v.amplitude *= weight;
                else if constexpr (std::is_same_v<T, LorentzianBump>) v.s_peak *= weight;
                else if constexpr (std::is_same_v<T, RtnLorentzian>) v.variance *= weight;
                else if constexpr (std::is_same_v<T, White>) v.level *= weight;
                else if constexpr (std::is_same_v<T, Quasistatic>) v.variance *= weight;
            },
            c);
    }
    return out;
}

NoiseModel weighted_sum(const NoiseModel& a, double wa, const NoiseModel& b, double wb) {
    NoiseModel out;
    if (wa != 0.0)
        for (const auto& c : scaled(a, wa).components) out.components.push_back(c);
    if (wb != 0.0)
        for (const auto& c : scaled(b, wb).components) out.components.push_back(c);
    return out;
}

double band_variance(const NoiseComponent& c, double f_max) {
    if (!(f_max > 0.0)) return 0.0;
    double one_sided = 0.0;
    if (const auto* p = std::get_if<PowerLaw>(&c)) {
        const double cap = std::min(f_max, p->f_high);
        if (!(p->f_low > 0.0)) throw BandTooShort("band variance of a power law needs f_low > 0");
        const double plateau = p->amplitude / std::pow(p->f_low, p->alpha);
        one_sided = plateau * std::min(cap, p->f_low);
        if (cap > p->f_low) {
            one_sided += std::abs(p->alpha - 1.0) < 1e-12
                             ? p->amplitude * std::log(cap / p->f_low)
                             : p->amplitude * (std::pow(cap, 1.0 - p->alpha) - std::pow(p->f_low, 1.0 - p->alpha)) /
                                   (1.0 - p->alpha);
        }
    } else if (const auto* l = std::get_if<LorentzianBump>(&c)) {
        one_sided = l->s_peak * l->width *
                    (std::atan((f_max - l->center) / l->width) - std::atan(-l->center / l->width));
    } else if (const auto* w = std::get_if<White>(&c)) {
        one_sided = w->level * f_max;
    }
    return 2.0 * one_sided;
}

struct Synthesizer::Plan {
    fftw_plan c2r{nullptr};
    ~Plan() {
        if (c2r) {
            std::lock_guard lock(planner_mutex());
            fftw_destroy_plan(c2r);
        }
    }
};

Synthesizer::Synthesizer(const NoiseModel& model, double dt, std::size_t n, bool fold_low_band)
    : model_(model), dt_(dt), n_(n), plan_(std::make_unique<Plan>()) {
    if (!(dt > 0.0)) throw DomainError("synthesis needs dt > 0");
    if (n < 2) throw DomainError("synthesis needs at least 2 samples");
    model_.validate();
    const double df = 1.0 / (static_cast<double>(n) * dt);
    for (const auto& c : model_.components) {
        if (const auto* p = std::get_if<PowerLaw>(&c)) {
            if (!(p->f_low > 0.0) || (!fold_low_band && df > p->f_low * (1.0 + 1e-12))) {
                throw BandTooShort("trace of " + std::to_string(n) + " samples at dt=" + std::to_string(dt) +
                                   " resolves down to " + std::to_string(df) + " Hz, above f_low=" +
                                   std::to_string(p->f_low));
            }
        }
        if (const auto* r = std::get_if<RtnLorentzian>(&c)) {
            if (r->switch_rate * dt >= 0.5) throw TimestepTooCoarse("rtn switch_rate*dt must be < 0.5");
        }
    }
    const std::size_t half = n / 2;
    for (const auto& c : model_.components) {
        std::vector<double> amp;
        if (is_spectral(c)) {
            spectral_ = true;
            amp.assign(half + 1, 0.0);
            for (std::size_t k = 1; k <= half; ++k) {
                const double s = component_psd(c, static_cast<double>(k) * df);
                const bool nyquist = (n % 2 == 0) && k == half;
                amp[k] = std::sqrt(s * df * (nyquist ? 1.0 : 0.5));
            }
        }
        bin_amplitude_.push_back(std::move(amp));
        folded_variance_.push_back(fold_low_band ? band_variance(c, 0.5 * df) : 0.0);
    }
    if (spectral_) {
        auto in = alloc_complex(half + 1);
        auto out = alloc_real(n);
        std::lock_guard lock(planner_mutex());
        plan_->c2r = fftw_plan_dft_c2r_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
    }
}

Synthesizer::~Synthesizer() = default;

NoiseTrace Synthesizer::generate(std::uint64_t slow_seed, std::uint64_t fast_seed) const {
    NoiseTrace trace;
    trace.dt = dt_;
    trace.seed = fast_seed;
    trace.samples.assign(n_, 0.0);
    const std::size_t half = n_ / 2;

    if (spectral_) {
        auto spec = alloc_complex(half + 1);
        for (std::size_t k = 0; k <= half; ++k) spec[k][0] = spec[k][1] = 0.0;
        for (std::size_t i = 0; i < model_.components.size(); ++i) {
            const auto& amp = bin_amplitude_[i];
            if (amp.empty()) continue;
            std::mt19937_64 rng(sub_seed(fast_seed, i));
            boost::random::normal_distribution<double> normal;
            for (std::size_t k = 1; k <= half; ++k) {
                const double re = normal(rng);
                const double im = normal(rng);
                spec[k][0] += amp[k] * re;
                if (!((n_ % 2 == 0) && k == half)) spec[k][1] += amp[k] * im;
            }
        }
        auto out = alloc_real(n_);
        fftw_execute_dft_c2r(plan_->c2r, spec.get(), out.get());
        for (std::size_t j = 0; j < n_; ++j) trace.samples[j] = out[j];
    }

    for (std::size_t i = 0; i < model_.components.size(); ++i) {
        const auto& c = model_.components[i];
        if (const auto* r = std::get_if<RtnLorentzian>(&c)) {
            const auto rtn = synthesize_rtn(r->variance, r->switch_rate, dt_, n_, sub_seed(fast_seed, i));
            for (std::size_t j = 0; j < n_; ++j) trace.samples[j] += rtn.samples[j];
        } else if (const auto* q = std::get_if<Quasistatic>(&c)) {
            std::mt19937_64 rng(sub_seed(slow_seed, i));
            boost::random::normal_distribution<double> normal;
            const double v = std::sqrt(q->variance) * normal(rng);
            for (auto& s : trace.samples) s += v;
        }
        if (folded_variance_[i] > 0.0) {
            std::mt19937_64 rng(sub_seed(slow_seed, 1000 + i));
            boost::random::normal_distribution<double> normal;
            const double v = std::sqrt(folded_variance_[i]) * normal(rng);
            for (auto& s : trace.samples) s += v;
        }
    }
    return trace;
}

NoiseTrace synthesize(const NoiseModel& model, double dt, std::size_t n, std::uint64_t seed) {
    Synthesizer synth(model, dt, n);
    auto trace = synth.generate(seed, seed);
    trace.seed = seed;
    return trace;
}

NoiseTrace synthesize_rtn(double variance, double switch_rate, double dt, std::size_t n, std::uint64_t seed) {
    if (!(dt > 0.0)) throw DomainError("rtn needs dt > 0");
    if (n < 2) throw DomainError("rtn needs at least 2 samples");
    if (!(variance >= 0.0) || !(switch_rate >= 0.0)) throw DomainError("rtn needs variance, switch_rate >= 0");
    if (switch_rate * dt >= 0.5) {
        throw TimestepTooCoarse("rtn switch_rate*dt = " + std::to_string(switch_rate * dt) + " must be < 0.5");
    }
    NoiseTrace trace{dt, std::vector<double>(n), seed};
    std::mt19937_64 rng(seed);
    boost::random::uniform_01<double> uniform;
    // Flip probability per step that reproduces exp(-2 r t) at the sample lags.
    const double p_flip = 0.5 * (1.0 - std::exp(-2.0 * switch_rate * dt));
    const double a = std::sqrt(variance);
    double v = uniform(rng) < 0.5 ? a : -a;
    for (std::size_t j = 0; j < n; ++j) {
        if (j > 0 && uniform(rng) < p_flip) v = -v;
        trace.samples[j] = v;
    }
    return trace;
}

SpectrumEstimate estimate_psd(const std::vector<NoiseTrace>& traces) {
    if (traces.empty()) throw EmptyInput("estimate_psd needs at least one trace");
    const std::size_t n = traces.front().samples.size();
    const double dt = traces.front().dt;
    if (n < 2 || !(dt > 0.0)) throw DomainError("estimate_psd needs traces with n >= 2 and dt > 0");
    for (const auto& t : traces) {
        if (t.samples.size() != n || t.dt != dt) throw DomainError("estimate_psd traces must share dt and length");
    }
    const std::size_t half = n / 2;
    auto in = alloc_real(n);
    auto out = alloc_complex(half + 1);
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
    }
    std::vector<double> sum(half, 0.0), sum_sq(half, 0.0);
    const double norm = dt / static_cast<double>(n);
    for (const auto& t : traces) {
        for (std::size_t j = 0; j < n; ++j) in[j] = t.samples[j];
        fftw_execute(plan);
        for (std::size_t k = 1; k <= half; ++k) {
            const double p = (out[k][0] * out[k][0] + out[k][1] * out[k][1]) * norm;
            sum[k - 1] += p;
            sum_sq[k - 1] += p * p;
        }
    }
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    SpectrumEstimate est;
    const double m = static_cast<double>(traces.size());
    const double df = 1.0 / (static_cast<double>(n) * dt);
    for (std::size_t k = 1; k <= half; ++k) {
        const double mean = sum[k - 1] / m;
        double err = 0.0;
        if (traces.size() > 1) {
            const double var = std::max(0.0, (sum_sq[k - 1] - m * mean * mean) / (m - 1.0));
            err = std::sqrt(var / m);
        }
        est.freq.push_back(static_cast<double>(k) * df);
        est.psd.push_back(mean);
        est.err.push_back(err);
        est.flagged.push_back(false);
    }
    return est;
}

void write_trace_csv(std::ostream& os, const NoiseTrace& trace) {
    os << "t,value\n";
    os.precision(17);
    for (std::size_t j = 0; j < trace.samples.size(); ++j) {
        os << static_cast<double>(j) * trace.dt << ',' << trace.samples[j] << '\n';
    }
}

} // namespace fluxspec
