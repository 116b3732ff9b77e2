// theory.cpp: closed-form rates, decay laws and filter-function integrals

#include "fluxspec/theory.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <sstream>
#include <vector>

#include "fluxspec/errors.hpp"

namespace fluxspec {

using boost::math::quadrature::gauss_kronrod;

FramePsd frame_psd(const NoiseModel& model_delta, const NoiseModel& model_epsilon, double theta, double f) {
    const double sd = evaluate_psd(model_delta, f);
    const double se = evaluate_psd(model_epsilon, f);
    const double s2 = std::sin(theta) * std::sin(theta);
    const double c2 = std::cos(theta) * std::cos(theta);
    return {s2 * sd + c2 * se, c2 * sd + s2 * se};
}

NoiseModel longitudinal_model(const NoiseModel& model_delta, const NoiseModel& model_epsilon, double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    return weighted_sum(model_delta, c * c, model_epsilon, s * s);
}

static double lock_rabi(const QubitParams& params, const DriveParams& drive) {
    const double nu_r = derived_params(params, drive).nu_r;
    if (!(nu_r > 0.0)) throw DomainError("rates need a drive with nu_R > 0");
    return nu_r;
}

GbeRates gbe_rates(const QubitParams& params, const DriveParams& drive, const NoiseModel& model_delta,
                   const NoiseModel& model_epsilon) {
    const double nu_r = lock_rabi(params, drive);
    const double g1 = params.gamma1;
    const double s_z = frame_psd(model_delta, model_epsilon, params.theta(), nu_r).s_zprime;
    GbeRates r;
    r.gamma_nu = 0.5 * s_z;
    r.gamma_x = 0.5 * g1 + r.gamma_nu;
    r.gamma_y = 0.5 * g1 + r.gamma_nu;
    r.gamma_z = g1;
    r.gamma_1rho = r.gamma_x;
    r.gamma_rabi_dagger = 0.75 * g1 + 0.5 * r.gamma_nu;
    r.gamma_phi_rho = 0.5 * g1;
    return r;
}

GbeRates gbe_rates_full(const QubitParams& params, const DriveParams& drive, const NoiseModel& model_delta,
                        const NoiseModel& model_epsilon) {
    const double nu_r = lock_rabi(params, drive);
    const double th = params.theta();
    const double nu_q = params.nu_q();
    if (!(nu_q > nu_r)) throw DomainError("full rates need nu_q > nu_R");
    const double sx_q = frame_psd(model_delta, model_epsilon, th, nu_q).s_xprime;
    const double sx_side = frame_psd(model_delta, model_epsilon, th, nu_q + nu_r).s_xprime +
                           frame_psd(model_delta, model_epsilon, th, nu_q - nu_r).s_xprime;
    const double s_z = frame_psd(model_delta, model_epsilon, th, nu_r).s_zprime;
    GbeRates r;
    r.gamma_nu = 0.5 * s_z;
    r.gamma_x = sx_side / 8.0 + 0.5 * s_z;
    r.gamma_y = 0.25 * sx_q + 0.5 * s_z;
    r.gamma_z = 0.25 * sx_q + sx_side / 8.0;
    r.gamma_1rho = r.gamma_x;
    r.gamma_rabi_dagger = 0.5 * (r.gamma_y + r.gamma_z);
    r.gamma_phi_rho = 0.25 * sx_q;
    return r;
}

SteadyState steady_state(const QubitParams& params, const DriveParams& drive, const NoiseModel& model_delta,
                         const NoiseModel& model_epsilon, double temperature) {
    const auto d = derived_params(params, drive);
    if (!(d.nu_r > 0.0)) throw DomainError("steady state needs a drive with nu_R > 0");
    if (!(temperature > 0.0)) throw DomainError("steady state needs temperature > 0");
    const double s_x = 2.0 * params.gamma1;
    const double s_z = frame_psd(model_delta, model_epsilon, d.theta, d.nu_r).s_zprime;
    const double se = std::sin(d.eta), ce = std::cos(d.eta);
    const double tq = thermal_factor(d.nu_q, temperature);
    const double tr = thermal_factor(d.nu_r, temperature);

    SteadyState ss;
    const double den = 0.5 * (1.0 + se * se) * s_x + ce * ce * s_z;
    ss.sz_tilted = den > 0.0 ? -(se * s_x * tq + ce * ce * s_z * tr) / den : 0.0;
    const double den1 = 0.5 * s_x + s_z;
    ss.sx = den1 > 0.0 ? -se * s_x / den1 : 0.0;

    const auto r = gbe_rates(params, drive, model_delta, model_epsilon);
    const double max_rate = std::max({r.gamma_x, r.gamma_y, r.gamma_z});
    if (d.nu_r < 10.0 * max_rate) {
        ss.regime_warning = true;
        std::ostringstream os;
        os << "weak-coupling regime violated: nu_R = " << d.nu_r << " Hz < 10 x max rate " << max_rate;
        ss.message = os.str();
    }
    return ss;
}

std::array<double, 3> bloch_steady_state(double nu_r, double detuning, const std::array<double, 3>& gamma,
                                         const std::array<double, 3>& drift) {
    const double wx = two_pi * nu_r, wz = two_pi * detuning;
    // (w x r) with w = (wx, 0, wz): (-wz y, wz x - wx z, wx y)
    Eigen::Matrix3d m;
    m << -gamma[0], -wz, 0.0,
         wz, -gamma[1], -wx,
         0.0, wx, -gamma[2];
    const Eigen::Vector3d v(drift[0], drift[1], drift[2]);
    const Eigen::Vector3d r = m.fullPivLu().solve(-v);
    return {r[0], r[1], r[2]};
}

double decay_law(Protocol protocol, const QubitParams& params, const DriveParams& drive, const NoiseMoments& moments,
                 const GbeRates& rates, double tau) {
    if (!(tau >= 0.0)) throw DomainError("decay law needs tau >= 0");
    const auto d = derived_params(params, drive);
    const double g2 = two_pi * two_pi / 2.0;
    switch (protocol) {
    case Protocol::ramsey:
        return std::exp(-0.5 * params.gamma1 * tau - g2 * moments.var_nu * tau * tau) *
               std::cos(two_pi * d.detuning * tau);
    case Protocol::rabi:
        return std::exp(-rates.gamma_rabi_dagger * tau - g2 * moments.var_nu_r * tau * tau) *
               rabi_algebraic_factor(d.nu_r, moments.var_nu, tau) * std::cos(two_pi * d.nu_r * tau);
    case Protocol::sl3:
    case Protocol::sl5a:
    case Protocol::sl5b:
    case Protocol::sl5_interleaved:
        return std::exp(-rates.gamma_1rho * tau);
    case Protocol::inversion_recovery:
        return std::exp(-params.gamma1 * tau);
    default:
        throw UnsupportedProtocol("no closed-form decay law for " + to_string(protocol));
    }
}

double rabi_algebraic_factor(double nu_r, double var_nu, double tau) {
    if (!(nu_r > 0.0)) throw DomainError("rabi factor needs nu_R > 0");
    const double x = two_pi * var_nu * tau / nu_r;
    return std::pow(1.0 + x * x, -0.25);
}

std::complex<double> rabi_detuning_average(double nu_r, double var_nu, double tau, bool exact) {
    if (!(nu_r > 0.0)) throw DomainError("rabi average needs nu_R > 0");
    if (var_nu <= 0.0 || tau == 0.0) return {1.0, 0.0};
    const double sd = std::sqrt(var_nu);
    auto phase = [&](double u) {
        const double dn = sd * u;
        const double shift = exact ? std::hypot(nu_r, dn) - nu_r : dn * dn / (2.0 * nu_r);
        return two_pi * shift * tau;
    };
    const double norm = 1.0 / std::sqrt(two_pi);
    auto re = [&](double u) { return norm * std::exp(-0.5 * u * u) * std::cos(phase(u)); };
    auto im = [&](double u) { return norm * std::exp(-0.5 * u * u) * std::sin(phase(u)); };
    double err = 0.0;
    const double a = gauss_kronrod<double, 61>::integrate(re, -9.0, 9.0, 20, 1e-12, &err);
    const double b = gauss_kronrod<double, 61>::integrate(im, -9.0, 9.0, 20, 1e-12, &err);
    return {a, b};
}

double filter_weight(const FilterProtocol& protocol, double f, double tau) {
    const double x = std::numbers::pi * f;
    switch (protocol.kind) {
    case Protocol::ramsey: {
        if (std::abs(x * tau) < 1e-8) return tau * tau;
        const double s = std::sin(x * tau) / x;
        return s * s;
    }
    case Protocol::spin_echo: {
        if (std::abs(x * tau) < 1e-8) return 0.0;
        const double s = std::sin(0.5 * x * tau);
        return 4.0 * s * s * s * s / (x * x);
    }
    case Protocol::cpmg: {
        if (protocol.n_pi < 1) throw DomainError("cpmg needs n_pi >= 1");
        const int n = protocol.n_pi;
        std::vector<double> edges{0.0};
        for (int j = 1; j <= n; ++j) edges.push_back((j - 0.5) * tau / n);
        edges.push_back(tau);
        const double w = two_pi * f;
        if (std::abs(w * tau) < 1e-6) {
            double area = 0.0, sign = 1.0;
            for (std::size_t m = 0; m + 1 < edges.size(); ++m, sign = -sign) area += sign * (edges[m + 1] - edges[m]);
            return area * area;
        }
        std::complex<double> acc{0.0, 0.0};
        double sign = 1.0;
        for (std::size_t m = 0; m + 1 < edges.size(); ++m, sign = -sign) {
            acc += sign * (std::polar(1.0, -w * edges[m]) - std::polar(1.0, -w * edges[m + 1]));
        }
        return std::norm(acc) / (w * w);
    }
    default:
        throw UnsupportedProtocol("no filter function for " + to_string(protocol.kind));
    }
}

namespace {

// Mean of |Y|^2 (2 pi f)^2 over the fast filter oscillation.
double filter_tail_weight(const FilterProtocol& p) {
    switch (p.kind) {
    case Protocol::ramsey: return 2.0;
    case Protocol::spin_echo: return 6.0;
    default: return 2.0 + 4.0 * p.n_pi;
    }
}

void add_model_breaks(const NoiseModel& model, std::vector<double>& breaks) {
    for (const auto& c : model.components) {
        if (const auto* p = std::get_if<PowerLaw>(&c)) {
            if (p->f_low > 0.0) breaks.push_back(p->f_low);
            if (std::isfinite(p->f_high)) breaks.push_back(p->f_high);
        } else if (const auto* l = std::get_if<LorentzianBump>(&c)) {
            for (double k : {-3.0, -1.0, 0.0, 1.0, 3.0}) breaks.push_back(l->center + k * l->width);
        } else if (const auto* r = std::get_if<RtnLorentzian>(&c)) {
            if (r->switch_rate > 0.0) breaks.push_back(r->switch_rate / std::numbers::pi);
        }
    }
}

} // namespace

double dephasing_exponent(const NoiseModel& model, const FilterProtocol& protocol, double tau) {
    if (!(tau > 0.0)) throw DomainError("filter decay needs tau > 0");
    model.validate();
    constexpr double rtol = 1e-6;
    constexpr int uniform_intervals = 1000;
    const double step = 0.5 / tau;
    const double f_uniform = uniform_intervals * step;

    std::vector<double> breaks;
    for (int k = 1; k <= uniform_intervals; ++k) breaks.push_back(k * step);
    add_model_breaks(model, breaks);
    std::vector<double> inner;
    for (double b : breaks)
        if (b > 0.0) inner.push_back(b);
    std::sort(inner.begin(), inner.end());
    inner.erase(std::unique(inner.begin(), inner.end(),
                            [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(a, b); }),
                inner.end());

    auto s_of = [&](double f) {
        double s = 0.0;
        for (const auto& c : model.components) s += component_psd(c, f);
        return s;
    };
    auto integrand = [&](double f) { return s_of(f) * filter_weight(protocol, f, tau); };
    const double tail_w = filter_tail_weight(protocol);
    auto tail = [&](double f) { return s_of(f) * tail_w / (two_pi * two_pi * f * f); };

    double chi = 0.5 * quasistatic_variance(model) * filter_weight(protocol, 0.0, tau);
    double err_sum = 0.0;
    auto check = [](double v, double e) {
        if (!std::isfinite(v) || !std::isfinite(e)) throw IntegrationError("filter integral is not finite");
    };
    try {
        static thread_local boost::math::quadrature::tanh_sinh<double> ts;
        double e0 = 0.0;
        double lo = ts.integrate(integrand, 0.0, inner.front(), 1e-10, &e0);
        check(lo, e0);
        chi += lo;
        err_sum += std::abs(e0) * 0.5 * inner.front();
        for (std::size_t i = 0; i + 1 < inner.size(); ++i) {
            const double a = inner[i], b = inner[i + 1];
            double e = 0.0, v = 0.0;
            if (b <= f_uniform * (1.0 + 1e-12)) {
                v = gauss_kronrod<double, 61>::integrate(integrand, a, b, 15, 1e-10, &e);
            } else {
                v = gauss_kronrod<double, 61>::integrate(tail, a, b, 15, 1e-10, &e);
            }
            check(v, e);
            chi += v;
            err_sum += e;
        }
        double e = 0.0;
        // f = F / u maps [F, inf) onto (0, 1]
        const double f_last = inner.back();
        auto mapped = [&](double u) { return tail(f_last / u) * f_last / (u * u); };
        const double v = gauss_kronrod<double, 61>::integrate(mapped, 0.0, 1.0, 15, 1e-10, &e);
        check(v, e);
        chi += v;
        err_sum += e;
    } catch (const IntegrationError&) {
        throw;
    } catch (const std::exception& ex) {
        throw IntegrationError(std::string("filter integral failed: ") + ex.what());
    }
    if (!std::isfinite(chi) || err_sum > rtol * std::abs(chi) + 1e-300) {
        std::ostringstream os;
        os << "filter integral did not converge (value " << chi << ", error estimate " << err_sum << ")";
        throw IntegrationError(os.str());
    }
    return chi;
}

double filter_function_decay(const NoiseModel& model, const FilterProtocol& protocol, double tau) {
    return std::exp(-dephasing_exponent(model, protocol, tau));
}

double larmor_estimate(double field_tesla) {
    if (!(field_tesla >= 0.0)) throw DomainError("field must be >= 0");
    return 28.0e9 * field_tesla;
}

} // namespace fluxspec
