// analysis.cpp: least-squares fits, spectrum inversion and report writers

#include "fluxspec/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <array>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>
#include "json.hpp"

#include "fluxspec/errors.hpp"

namespace fluxspec {

namespace {

constexpr double pi = 3.14159265358979323846;

using Residuals = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r)>;

// Eigen's LM works on x in units of `scale`; the jacobian is a central difference.
struct ScaledFunctor : Eigen::DenseFunctor<double> {
    Residuals fn;
    Eigen::VectorXd scale;

    ScaledFunctor(Residuals f, Eigen::VectorXd s, int m)
        : Eigen::DenseFunctor<double>(static_cast<int>(s.size()), m), fn(std::move(f)), scale(std::move(s)) {}

    int operator()(const Eigen::VectorXd& u, Eigen::VectorXd& r) const {
        fn(u.cwiseProduct(scale), r);
        return 0;
    }

    int df(const Eigen::VectorXd& u, Eigen::MatrixXd& jac) const {
        Eigen::VectorXd up = u, rp(values()), rm(values());
        for (int j = 0; j < inputs(); ++j) {
            const double h = 1e-6 * std::max(1.0, std::abs(u[j]));
            up[j] = u[j] + h;
            (*this)(up, rp);
            up[j] = u[j] - h;
            (*this)(up, rm);
            up[j] = u[j];
            jac.col(j) = (rp - rm) / (2.0 * h);
        }
        return 0;
    }
};

struct LsqResult {
    Eigen::VectorXd x;
    Eigen::MatrixXd jacobian;  // d r / d x, physical units
    double cost{0.0};          // sum r^2
    bool converged{false};
    int status{0};
};

LsqResult least_squares(const Residuals& fn, const Eigen::VectorXd& x0, const Eigen::VectorXd& scale, int m) {
    ScaledFunctor functor(fn, scale, m);
    Eigen::LevenbergMarquardt<ScaledFunctor> lm(functor);
    lm.setMaxfev(400 * static_cast<int>(x0.size() + 1));
    lm.setXtol(1e-12);
    lm.setFtol(1e-14);
    Eigen::VectorXd u = x0.cwiseQuotient(scale);
    const auto status = lm.minimize(u);

    LsqResult out;
    out.status = static_cast<int>(status);
    out.converged = status != Eigen::LevenbergMarquardtSpace::ImproperInputParameters &&
                    status != Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation &&
                    u.allFinite();
    out.x = u.cwiseProduct(scale);
    Eigen::VectorXd r(m);
    functor(u, r);
    out.cost = r.squaredNorm();
    Eigen::MatrixXd ju(m, x0.size());
    functor.df(u, ju);
    out.jacobian = ju * scale.cwiseInverse().asDiagonal();
    if (!std::isfinite(out.cost)) out.converged = false;
    return out;
}

// (J^T J)^-1, or a pseudo-inverse with singular = true. Columns are
// equilibrated first so parameters of very different magnitude do not trip
// the rank test.
Eigen::MatrixXd normal_inverse(const Eigen::MatrixXd& jac, bool& singular) {
    Eigen::VectorXd d = jac.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < d.size(); ++j)
        if (d[j] == 0.0) d[j] = 1.0;
    const Eigen::MatrixXd js = jac * d.cwiseInverse().asDiagonal();
    const Eigen::MatrixXd jtj = js.transpose() * js;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
    lu.setThreshold(1e-13);
    singular = !lu.isInvertible();
    const Eigen::MatrixXd inv = singular ? Eigen::MatrixXd(jtj.completeOrthogonalDecomposition().pseudoInverse())
                                         : Eigen::MatrixXd(lu.inverse());
    return d.cwiseInverse().asDiagonal() * inv * d.cwiseInverse().asDiagonal();
}

struct LawSpec {
    std::vector<std::string> names;
    std::function<double(const Eigen::VectorXd& p, double tau)> shape;  // law(tau), amplitude 1
};

double rabi_full_shape(double rate, double freq, double var_nu, double var_nu_r, double tau) {
    const double a = 2.0 * pi * var_nu * tau / std::max(std::abs(freq), 1e-300);
    return std::exp(-rate * tau - 2.0 * pi * pi * var_nu_r * tau * tau) * std::pow(1.0 + a * a, -0.25) *
           std::cos(2.0 * pi * freq * tau);
}

LawSpec law_spec(DecayLaw law) {
    switch (law) {
    case DecayLaw::exponential:
        return {{"rate"}, [](const Eigen::VectorXd& p, double t) { return std::exp(-p[0] * t); }};
    case DecayLaw::exp_gaussian:
        return {{"rate", "var_nu"},
                [](const Eigen::VectorXd& p, double t) { return std::exp(-p[0] * t - 2.0 * pi * pi * p[1] * t * t); }};
    case DecayLaw::damped_cosine:
        return {{"rate", "frequency", "phase"},
                [](const Eigen::VectorXd& p, double t) { return std::exp(-p[0] * t) * std::cos(2.0 * pi * p[1] * t + p[2]); }};
    case DecayLaw::rabi_full:
        return {{"rate", "frequency", "var_nu", "var_nu_r"},
                [](const Eigen::VectorXd& p, double t) { return rabi_full_shape(p[0], p[1], p[2], p[3], t); }};
    }
    throw DomainError("unknown decay law");
}

// Best amplitude and offset for fixed shape values, weighted.
double linear_fit(const std::vector<double>& g, const std::vector<double>& y, const std::vector<double>& w,
                  const std::optional<double>& fixed_offset, double& amp, double& off) {
    const std::size_t n = y.size();
    if (fixed_offset) {
        off = *fixed_offset;
        double num = 0, den = 0;
        for (std::size_t i = 0; i < n; ++i) {
            num += w[i] * w[i] * g[i] * (y[i] - off);
            den += w[i] * w[i] * g[i] * g[i];
        }
        amp = den > 0 ? num / den : 0.0;
    } else {
        Eigen::MatrixXd a(n, 2);
        Eigen::VectorXd b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a(i, 0) = w[i] * g[i];
            a(i, 1) = w[i];
            b[i] = w[i] * y[i];
        }
        const Eigen::Vector2d s = a.completeOrthogonalDecomposition().solve(b);
        amp = s[0];
        off = s[1];
    }
    double c = 0;
    for (std::size_t i = 0; i < n; ++i) c += std::pow(w[i] * (y[i] - off - amp * g[i]), 2);
    return c;
}

std::vector<double> logspace(double lo, double hi, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
    return v;
}

} // namespace

std::string to_string(DecayLaw law) {
    switch (law) {
    case DecayLaw::exponential: return "exponential";
    case DecayLaw::exp_gaussian: return "exp_gaussian";
    case DecayLaw::damped_cosine: return "damped_cosine";
    case DecayLaw::rabi_full: return "rabi_full";
    }
    return "unknown";
}

double FitResult::value(double tau) const {
    const DecayLaw laws[] = {DecayLaw::exponential, DecayLaw::exp_gaussian, DecayLaw::damped_cosine, DecayLaw::rabi_full};
    for (DecayLaw law : laws) {
        if (to_string(law) != model) continue;
        const LawSpec spec = law_spec(law);
        Eigen::VectorXd p(spec.names.size());
        for (std::size_t j = 0; j < spec.names.size(); ++j) p[j] = params.at(spec.names[j]);
        return params.at("offset") + params.at("amplitude") * spec.shape(p, tau);
    }
    throw DomainError("fit result has unknown model '" + model + "'");
}

FitResult fit_decay(const DecayCurve& curve, DecayLaw law, const FitOptions& options) {
    const std::size_t n = curve.tau.size();
    if (curve.value.size() != n) throw DomainError("curve tau and value lengths differ");
    if (n < 6) throw FitError("fit needs at least 6 points, got " + std::to_string(n));

    const auto& tau = curve.tau;
    const auto& y = curve.value;
    const auto [tmin_it, tmax_it] = std::minmax_element(tau.begin(), tau.end());
    const double span = *tmax_it - *tmin_it;
    if (!(span > 0)) throw FitError("fit needs a nonzero tau span");

    // weights 1/stderr; zero errors borrow the smallest positive one
    std::vector<double> w(n, 1.0);
    bool weighted = false;
    if (curve.stderr.size() == n) {
        double min_pos = std::numeric_limits<double>::infinity();
        for (double e : curve.stderr)
            if (e > 0) min_pos = std::min(min_pos, e);
        if (std::isfinite(min_pos)) {
            weighted = true;
            for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / (curve.stderr[i] > 0 ? curve.stderr[i] : min_pos);
        }
    }

    const LawSpec spec = law_spec(law);
    const std::size_t k = spec.names.size();
    const bool free_offset = !options.fixed_offset.has_value();
    const std::size_t np = k + 1 + (free_offset ? 1 : 0);
    if (n <= np) throw FitError("fit needs more points than parameters");

    double yscale = 0;
    for (double v : y) yscale = std::max(yscale, std::abs(v));
    if (yscale == 0) yscale = 1;

    // grid search for the nonlinear parameters with amplitude and offset solved linearly
    std::vector<double> g(n);
    auto grid_cost = [&](const Eigen::VectorXd& p, double& amp, double& off) {
        for (std::size_t i = 0; i < n; ++i) g[i] = spec.shape(p, tau[i]);
        return linear_fit(g, y, w, options.fixed_offset, amp, off);
    };

    std::vector<Eigen::VectorXd> starts;
    const auto rates = logspace(0.01 / span, 100.0 / span, 120);
    if (law == DecayLaw::exponential || law == DecayLaw::exp_gaussian) {
        double best = std::numeric_limits<double>::infinity();
        Eigen::VectorXd p0 = Eigen::VectorXd::Zero(k);
        for (double r : rates) {
            Eigen::VectorXd p = Eigen::VectorXd::Zero(k);
            p[0] = r;
            double a, o;
            const double c = grid_cost(p, a, o);
            if (c < best) best = c, p0 = p;
        }
        starts.push_back(p0);
        if (law == DecayLaw::exp_gaussian) {
            best = std::numeric_limits<double>::infinity();
            Eigen::VectorXd pg = Eigen::VectorXd::Zero(k);
            for (double r : rates) {
                Eigen::VectorXd p = Eigen::VectorXd::Zero(k);
                p[1] = r * r / (2.0 * pi * pi);
                double a, o;
                const double c = grid_cost(p, a, o);
                if (c < best) best = c, pg = p;
            }
            starts.push_back(pg);
            Eigen::VectorXd mix = 0.5 * (p0 + pg);
            starts.push_back(mix);
        }
    } else {
        // frequency scan of an undamped cosine with free phase, then a rate scan
        std::vector<double> freqs;
        if (options.frequency_hint && *options.frequency_hint > 0) {
            const double h = *options.frequency_hint;
            for (int i = 0; i <= 200; ++i) freqs.push_back(h * (0.7 + 0.6 * i / 200.0));
        } else {
            double dtmin = span;
            std::vector<double> ts = tau;
            std::sort(ts.begin(), ts.end());
            for (std::size_t i = 1; i < n; ++i)
                if (ts[i] > ts[i - 1]) dtmin = std::min(dtmin, ts[i] - ts[i - 1]);
            for (double f = 0.25 / span; f < 0.5 / dtmin; f += 0.05 / span) freqs.push_back(f);
        }
        double best = std::numeric_limits<double>::infinity();
        Eigen::VectorXd p0 = Eigen::VectorXd::Zero(k);
        const double phases[] = {0.0, pi / 2, pi, -pi / 2};
        for (double f : freqs) {
            for (double ph : phases) {
                Eigen::VectorXd p = Eigen::VectorXd::Zero(k);
                p[1] = f;
                if (law == DecayLaw::damped_cosine) p[2] = ph;
                else if (ph != 0.0) continue;
                double a, o;
                const double c = grid_cost(p, a, o);
                if (c < best) best = c, p0 = p;
            }
        }
        double best_r = std::numeric_limits<double>::infinity();
        Eigen::VectorXd pr = p0;
        for (double r : rates) {
            Eigen::VectorXd p = p0;
            p[0] = r;
            double a, o;
            const double c = grid_cost(p, a, o);
            if (c < best_r) best_r = c, pr = p;
        }
        starts.push_back(pr);
    }

    // full parameter vector: law parameters, amplitude, offset (if free)
    auto residuals = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
        const Eigen::VectorXd p = x.head(k);
        const double amp = x[k];
        const double off = free_offset ? x[k + 1] : *options.fixed_offset;
        for (std::size_t i = 0; i < n; ++i) r[i] = w[i] * (y[i] - off - amp * spec.shape(p, tau[i]));
    };

    Eigen::VectorXd scale(np);
    for (std::size_t j = 0; j < k; ++j) {
        const std::string& nm = spec.names[j];
        if (nm == "rate") scale[j] = 1.0 / span;
        else if (nm == "frequency") scale[j] = 1.0 / span;
        else if (nm == "phase") scale[j] = 1.0;
        else scale[j] = 1.0 / (2.0 * pi * pi * span * span);
    }
    scale[k] = yscale;
    if (free_offset) scale[k + 1] = yscale;

    LsqResult best;
    best.cost = std::numeric_limits<double>::infinity();
    for (const auto& p0 : starts) {
        Eigen::VectorXd x0(np);
        x0.head(k) = p0;
        double a, o;
        grid_cost(p0, a, o);
        x0[k] = a;
        if (free_offset) x0[k + 1] = o;
        if (law != DecayLaw::exponential)
            for (std::size_t j = 0; j < k; ++j)
                if (x0[j] == 0.0 && spec.names[j] != "phase") x0[j] = 1e-3 * scale[j];
        LsqResult res = least_squares(residuals, x0, scale, static_cast<int>(n));
        if (res.converged && res.cost < best.cost) best = std::move(res);
    }
    if (!best.converged)
        throw FitError("decay fit (" + to_string(law) + ") did not converge on " + std::to_string(n) + " points");

    FitResult out;
    out.model = to_string(law);
    out.names = spec.names;
    out.names.push_back("amplitude");
    if (free_offset) out.names.push_back("offset");
    out.chi2 = best.cost;

    bool singular = false;
    Eigen::MatrixXd cov = normal_inverse(best.jacobian, singular);
    const double dof = static_cast<double>(n - np);
    const double red = best.cost / dof;
    cov *= weighted ? std::max(1.0, red) : red;
    if (singular) out.warnings.push_back("singular normal matrix: some parameters are not determined");

    for (std::size_t j = 0; j < np; ++j) {
        out.params[out.names[j]] = best.x[j];
        out.errors[out.names[j]] = std::sqrt(std::max(0.0, cov(j, j)));
    }
    if (!free_offset) {
        out.params["offset"] = *options.fixed_offset;
        out.errors["offset"] = 0.0;
    }
    out.covariance.assign(np, std::vector<double>(np));
    for (std::size_t a = 0; a < np; ++a)
        for (std::size_t b = 0; b < np; ++b) out.covariance[a][b] = cov(a, b);

    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) ss += std::pow(y[i] - out.value(tau[i]), 2);
    out.residual_rms = std::sqrt(ss / n);

    const double rate = out.params["rate"];
    if (std::abs(rate) * span < 1.0)
        out.warnings.push_back("tau span covers " + std::to_string(std::abs(rate) * span) +
                               " decay times; rate is poorly constrained");
    return out;
}

double interpolate_spectrum(const SpectrumEstimate& est, double f, double* err) {
    const std::size_t n = est.freq.size();
    if (n == 0 || est.psd.size() != n) throw EmptyInput("reference spectrum is empty");
    if (!(f > 0)) throw DomainError("interpolation frequency must be positive");
    auto errat = [&](std::size_t i) { return est.err.size() == n ? est.err[i] : 0.0; };
    if (n == 1 || f <= est.freq.front()) {
        if (err) *err = errat(0);
        return est.psd.front();
    }
    if (f >= est.freq.back()) {
        if (err) *err = errat(n - 1);
        return est.psd.back();
    }
    const auto it = std::upper_bound(est.freq.begin(), est.freq.end(), f);
    const std::size_t hi = static_cast<std::size_t>(it - est.freq.begin());
    const std::size_t lo = hi - 1;
    const double u = std::log(f / est.freq[lo]) / std::log(est.freq[hi] / est.freq[lo]);
    if (err) *err = std::hypot((1 - u) * errat(lo), u * errat(hi));
    return (1 - u) * est.psd[lo] + u * est.psd[hi];
}

SpectrumEstimate extract_spectrum(const std::vector<RatePoint>& rates, double gamma1, double theta,
                                  const SpectrumEstimate* s_delta_ref, double gamma1_err) {
    if (rates.empty()) throw EmptyInput("no rate points to invert");
    const double s2 = std::pow(std::sin(theta), 2);
    const double c2 = std::pow(std::cos(theta), 2);
    const bool delta_channel = theta == 0.0;
    if (!delta_channel && s2 == 0.0) throw DomainError("sin^2 theta = 0: the epsilon channel is not observable");
    if (!delta_channel && !s_delta_ref)
        throw DomainError("epsilon channel at theta != 0 needs a delta-channel reference spectrum");

    SpectrumEstimate est;
    est.channel = delta_channel ? Channel::delta : Channel::epsilon;
    std::vector<RatePoint> sorted = rates;
    std::sort(sorted.begin(), sorted.end(), [](const RatePoint& a, const RatePoint& b) { return a.nu_r < b.nu_r; });
    for (const auto& p : sorted) {
        if (!(p.nu_r > 0)) throw DomainError("rate point with nonpositive nu_R");
        const double sz = 2.0 * p.gamma_1rho - gamma1;  // S_z'(nu_R)
        double s, e;
        if (delta_channel) {
            s = sz;
            e = std::hypot(2.0 * p.err, gamma1_err);
        } else {
            double e_ref = 0;
            const double s_ref = interpolate_spectrum(*s_delta_ref, p.nu_r, &e_ref);
            s = (sz - c2 * s_ref) / s2;
            e = std::sqrt(std::pow(2.0 * p.err, 2) + std::pow(gamma1_err, 2) + std::pow(c2 * e_ref, 2)) / s2;
        }
        est.freq.push_back(p.nu_r);
        est.psd.push_back(s);
        est.err.push_back(e);
        est.flagged.push_back(s < 0.0);
    }
    return est;
}

namespace {

struct BumpTemplate {
    int n_bumps;
    bool free_alpha;
    double alpha;

    int size() const { return 1 + (free_alpha ? 1 : 0) + 3 * n_bumps; }

    // x = [log A, (alpha), {log S, log F, log W}...]
    double psd(const Eigen::VectorXd& x, double f) const {
        const double a = free_alpha ? x[1] : alpha;
        double s = std::exp(x[0]) / std::pow(f, a);
        const int off = free_alpha ? 2 : 1;
        for (int b = 0; b < n_bumps; ++b) {
            const double sp = std::exp(x[off + 3 * b]);
            const double fc = std::exp(x[off + 3 * b + 1]);
            const double wd = std::exp(x[off + 3 * b + 2]);
            s += sp * lorentzian_shape(f, fc, wd);
        }
        return s;
    }
};

} // namespace

SpectrumFit fit_spectrum_model(const SpectrumEstimate& est, const SpectrumFitOptions& options) {
    if (options.n_lorentzians < 0) throw DomainError("negative Lorentzian count");
    std::vector<double> f, lp, sl;
    SpectrumFit out;
    for (std::size_t i = 0; i < est.freq.size(); ++i) {
        const bool flagged = i < est.flagged.size() && est.flagged[i];
        if (flagged || !(est.psd[i] > 0) || !(est.freq[i] > 0)) continue;
        f.push_back(est.freq[i]);
        lp.push_back(std::log(est.psd[i]));
        const double e = i < est.err.size() ? est.err[i] : 0.0;
        sl.push_back(e > 0 ? std::min(e / est.psd[i], 10.0) : 1.0);
    }
    if (f.size() < est.freq.size())
        out.warnings.push_back(std::to_string(est.freq.size() - f.size()) + " flagged or nonpositive points skipped");

    const BumpTemplate tpl{options.n_lorentzians, !options.fixed_alpha.has_value(), options.fixed_alpha.value_or(1.0)};
    const int np = tpl.size();
    const std::size_t m = f.size();
    if (m <= static_cast<std::size_t>(np)) throw FitError("spectrum fit needs more usable points than parameters");
    if (m < static_cast<std::size_t>(3 * np))
        out.warnings.push_back("only " + std::to_string(m) + " points for " + std::to_string(np) +
                               " free parameters; fewer than three per parameter");

    // baseline from the lower envelope of f^alpha S
    const double alpha0 = tpl.free_alpha ? 1.0 : tpl.alpha;
    double log_a = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) log_a = std::min(log_a, lp[i] + alpha0 * std::log(f[i]));

    auto residuals = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
        for (std::size_t i = 0; i < m; ++i) r[i] = (std::log(tpl.psd(x, f[i])) - lp[i]) / sl[i];
    };

    // greedy bump seeds from the largest relative excess over the current model
    auto seed_vector = [&](double base_shift, double width_mult) {
        Eigen::VectorXd x(np);
        x[0] = log_a + base_shift;
        if (tpl.free_alpha) x[1] = alpha0;
        const int off = tpl.free_alpha ? 2 : 1;
        BumpTemplate partial = tpl;
        for (int b = 0; b < tpl.n_bumps; ++b) {
            partial.n_bumps = b;
            if (b < static_cast<int>(options.initial.size())) {
                const auto& ib = options.initial[b];
                x[off + 3 * b] = std::log(ib.s_peak);
                x[off + 3 * b + 1] = std::log(ib.center);
                x[off + 3 * b + 2] = std::log(ib.width * width_mult);
                continue;
            }
            std::size_t imax = 0;
            double best = -std::numeric_limits<double>::infinity();
            std::vector<double> excess(m);
            for (std::size_t i = 0; i < m; ++i) {
                const double model = partial.psd(x, f[i]);
                excess[i] = std::exp(lp[i]) - model;
                const double rel = excess[i] / model;
                if (rel > best) best = rel, imax = i;
            }
            const double peak = std::max(excess[imax], 1e-6 * std::exp(lp[imax]));
            double lo = f.front(), hi = f.back();
            for (std::size_t i = imax; i-- > 0;)
                if (excess[i] < 0.5 * peak) { lo = f[i]; break; }
            for (std::size_t i = imax + 1; i < m; ++i)
                if (excess[i] < 0.5 * peak) { hi = f[i]; break; }
            const double width = std::max(0.5 * (hi - lo), 0.05 * f[imax]) * width_mult;
            x[off + 3 * b] = std::log(peak);
            x[off + 3 * b + 1] = std::log(f[imax]);
            x[off + 3 * b + 2] = std::log(width);
        }
        return x;
    };

    LsqResult best;
    best.cost = std::numeric_limits<double>::infinity();
    const Eigen::VectorXd scale = Eigen::VectorXd::Ones(np);
    for (double shift : {0.0, std::log(0.5)})
        for (double wm : {1.0, 0.5, 2.0}) {
            LsqResult res = least_squares(residuals, seed_vector(shift, wm), scale, static_cast<int>(m));
            if (res.converged && res.cost < best.cost) best = std::move(res);
        }
    if (!best.converged) throw FitError("spectrum model fit did not converge");

    bool singular = false;
    Eigen::MatrixXd cov = normal_inverse(best.jacobian, singular);
    cov *= std::max(1.0, best.cost / static_cast<double>(m - np));
    if (singular) out.warnings.push_back("singular normal matrix: some spectrum parameters are not determined");
    auto sd = [&](int j) { return std::sqrt(std::max(0.0, cov(j, j))); };

    const Eigen::VectorXd& x = best.x;
    const double fmin = f.front();
    out.power_law.amplitude = std::exp(x[0]);
    out.power_law.alpha = tpl.free_alpha ? x[1] : tpl.alpha;
    out.power_law.f_low = std::min(PowerLaw{}.f_low, 0.1 * fmin);
    out.params["amplitude"] = out.power_law.amplitude;
    out.errors["amplitude"] = out.power_law.amplitude * sd(0);
    out.params["alpha"] = out.power_law.alpha;
    out.errors["alpha"] = tpl.free_alpha ? sd(1) : 0.0;

    const int off = tpl.free_alpha ? 2 : 1;
    std::vector<std::pair<LorentzianBump, std::array<double, 3>>> bumps;
    for (int b = 0; b < tpl.n_bumps; ++b) {
        LorentzianBump lb{std::exp(x[off + 3 * b]), std::exp(x[off + 3 * b + 1]), std::exp(x[off + 3 * b + 2])};
        if (lb.width < 1e-3 * lb.center || lb.width < 1e-6 * f.back())
            throw FitError("degenerate Lorentzian: width " + std::to_string(lb.width) + " Hz at " +
                           std::to_string(lb.center) + " Hz");
        bumps.push_back({lb, {lb.s_peak * sd(off + 3 * b), lb.center * sd(off + 3 * b + 1),
                              lb.width * sd(off + 3 * b + 2)}});
    }
    std::sort(bumps.begin(), bumps.end(), [](const auto& a, const auto& b) { return a.first.center < b.first.center; });

    out.model.components.push_back(out.power_law);
    for (std::size_t b = 0; b < bumps.size(); ++b) {
        const auto& [lb, e] = bumps[b];
        out.bumps.push_back(lb);
        out.model.components.push_back(lb);
        const std::string k = std::to_string(b + 1);
        out.params["s" + k] = lb.s_peak;
        out.params["f" + k] = lb.center;
        out.params["w" + k] = lb.width;
        out.errors["s" + k] = e[0];
        out.errors["f" + k] = e[1];
        out.errors["w" + k] = e[2];
    }
    out.cost = best.cost;
    return out;
}

double BumpComparison::max() const { return std::max({s_peak, center, width}); }

BumpComparison compare_bumps(const LorentzianBump& a, const LorentzianBump& b) {
    auto rel = [](double u, double v) {
        const double d = std::max(std::abs(u), std::abs(v));
        return d > 0 ? std::abs(u - v) / d : 0.0;
    };
    return {rel(a.s_peak, b.s_peak), rel(a.center, b.center), rel(a.width, b.width)};
}

EchoReport echo_dip_report(const NoiseModel& model, const std::vector<double>& tau_grid,
                           const FilterProtocol& protocol) {
    if (tau_grid.empty()) throw EmptyInput("echo report needs a nonempty tau grid");
    EchoReport rep;
    rep.tau = tau_grid;
    std::sort(rep.tau.begin(), rep.tau.end());
    std::vector<double> chi;
    for (double t : rep.tau) {
        chi.push_back(dephasing_exponent(model, protocol, t));
        rep.coherence.push_back(std::exp(-chi.back()));
    }
    // vertex of the parabola through three points, clamped to their span
    auto vertex = [](double x0, double x1, double x2, double y0, double y1, double y2) {
        const double d = (x0 - x1) * (x0 - x2) * (x1 - x2);
        const double a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / d;
        const double b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / d;
        return std::clamp(a != 0 ? -b / (2 * a) : x1, x0, x2);
    };
    // a dip is the first interior local maximum of the exponent
    for (std::size_t i = 1; i + 1 < chi.size(); ++i) {
        const double tol = 1e-9 * std::abs(chi[i]);
        if (chi[i] > chi[i - 1] + tol && chi[i] > chi[i + 1] + tol) {
            rep.dip_tau = vertex(rep.tau[i - 1], rep.tau[i], rep.tau[i + 1], chi[i - 1], chi[i], chi[i + 1]);
            break;
        }
    }
    // a shoulder is where the decay slows down most before speeding up again
    if (chi.size() >= 5) {
        std::vector<double> rate(chi.size(), 0.0);
        for (std::size_t i = 1; i + 1 < chi.size(); ++i)
            rate[i] = (chi[i + 1] - chi[i - 1]) / (rep.tau[i + 1] - rep.tau[i - 1]);
        for (std::size_t i = 2; i + 2 < chi.size(); ++i) {
            const double tol = 1e-9 * std::abs(rate[i]);
            if (rate[i] < rate[i - 1] - tol && rate[i] < rate[i + 1] - tol) {
                rep.shoulder_tau =
                    vertex(rep.tau[i - 1], rep.tau[i], rep.tau[i + 1], rate[i - 1], rate[i], rate[i + 1]);
                break;
            }
        }
    }
    return rep;
}

void write_curve_csv(std::ostream& os, const DecayCurve& curve) {
    os << "tau_s,psw,stderr\n";
    os.precision(10);
    for (std::size_t i = 0; i < curve.tau.size(); ++i)
        os << curve.tau[i] << ',' << curve.value[i] << ',' << (i < curve.stderr.size() ? curve.stderr[i] : 0.0)
           << '\n';
}

void write_spectrum_csv(std::ostream& os, const SpectrumEstimate& est) {
    os << "freq_hz,psd_rad2_per_s,err\n";
    os.precision(10);
    for (std::size_t i = 0; i < est.freq.size(); ++i)
        os << est.freq[i] << ',' << est.psd[i] << ',' << (i < est.err.size() ? est.err[i] : 0.0) << '\n';
}

std::string fit_to_json(const FitResult& fit) {
    nlohmann::json j;
    j["model"] = fit.model;
    j["params"] = fit.params;
    j["errors"] = fit.errors;
    j["parameter_order"] = fit.names;
    j["covariance"] = fit.covariance;
    j["residual_rms"] = fit.residual_rms;
    j["chi2"] = fit.chi2;
    j["warnings"] = fit.warnings;
    return j.dump(2);
}

std::string spectrum_to_json(const SpectrumEstimate& est) {
    nlohmann::json j;
    j["channel"] = est.channel == Channel::delta ? "delta" : est.channel == Channel::epsilon ? "epsilon" : "none";
    j["freq_hz"] = est.freq;
    j["psd_rad2_per_s"] = est.psd;
    j["err"] = est.err;
    std::vector<bool> flagged = est.flagged;
    j["flagged"] = flagged;
    return j.dump(2);
}

} // namespace fluxspec
