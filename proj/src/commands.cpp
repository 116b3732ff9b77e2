// commands.cpp: run, spectroscopy, predict-echo and validate

#include "fluxspec/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"

#include "fluxspec/analysis.hpp"
#include "fluxspec/config.hpp"
#include "fluxspec/errors.hpp"
#include "fluxspec/theory.hpp"

namespace fluxspec {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Messages go to stderr immediately and to run.log at the end.
class Log {
public:
    void info(const std::string& msg) { write("info", msg); }
    void warn(const std::string& msg) { write("warning", msg); }
    void error(const std::string& msg) { write("error", msg); }
    const std::string& text() const { return text_; }

private:
    void write(const char* level, const std::string& msg) {
        const std::string line = std::string(level) + ": " + msg + "\n";
        std::cerr << line;
        text_ += line;
    }
    std::string text_;
};

struct Context {
    RunConfig config;
    std::string command;
    fs::path out;
    Log log;
    std::vector<std::string> outputs;

    bool wants(const std::string& fmt) const {
        const auto& f = config.output.formats;
        return std::find(f.begin(), f.end(), fmt) != f.end();
    }

    void write_file(const std::string& name, const std::string& content) {
        std::ofstream os(out / name, std::ios::binary);
        if (!os) throw Error("cannot write " + (out / name).string());
        os << content;
        outputs.push_back(name);
    }

    void write_curve(const std::string& base, const DecayCurve& curve) {
        if (wants("csv")) {
            std::ostringstream os;
            write_curve_csv(os, curve);
            write_file(base + ".csv", os.str());
        }
        if (wants("json")) {
            json j{{"label", curve.label}, {"tau_s", curve.tau}, {"psw", curve.value}, {"stderr", curve.stderr}};
            write_file(base + ".json", j.dump(2) + "\n");
        }
    }

    void write_spectrum(const std::string& base, const SpectrumEstimate& est) {
        if (wants("csv")) {
            std::ostringstream os;
            write_spectrum_csv(os, est);
            write_file(base + ".csv", os.str());
        }
        if (wants("json")) write_file(base + ".json", spectrum_to_json(est) + "\n");
    }

    void finish() {
        json m;
        m["command"] = command;
        m["config_hash"] = config_hash(config);
        m["master_seed"] = config.sim.master_seed;
        m["version"] = FLUXSPEC_VERSION;
        m["compiler"] = __VERSION__;
        m["outputs"] = outputs;
        m["config"] = json::parse(serialize_config(config));
        std::ofstream(out / "manifest.json", std::ios::binary) << m.dump(2) << "\n";
        std::ofstream(out / "run.log", std::ios::binary) << log.text();
    }
};

RunConfig load_with_overrides(const CommandOptions& o) {
    RunConfig c = load_config(o.config_path);
    if (o.seed) c.sim.master_seed = *o.seed;
    if (o.out_dir) c.output.dir = *o.out_dir;
    if (o.threads) c.sim.threads = *o.threads;
    if (o.format) c.output.formats = {*o.format};
    c.validate();
    return c;
}

// Shared error handling: 1 for config problems, 2 for everything else.
template <typename Body>
int guarded(const CommandOptions& options, const std::string& command, Body&& body) {
    Context ctx;
    ctx.command = command;
    try {
        ctx.config = load_with_overrides(options);
    } catch (const ConfigError& e) {
        std::cerr << "error: invalid config: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: invalid config: " << e.what() << "\n";
        return 1;
    }
    try {
        ctx.out = ctx.config.output.dir;
        fs::create_directories(ctx.out);
        const int rc = body(ctx);
        ctx.finish();
        return rc;
    } catch (const ConfigError& e) {
        ctx.log.error(std::string("invalid config: ") + e.what());
        return 1;
    } catch (const std::exception& e) {
        ctx.log.error(e.what());
        try {
            ctx.finish();
        } catch (...) {
        }
        return 2;
    }
}

std::string file_base(const ExperimentSpec& spec, std::size_t index) {
    return spec.name.empty() ? to_string(spec.protocol) + "_" + std::to_string(index) : spec.name;
}

std::vector<double> linspace_positive(double stop, int n) {
    std::vector<double> v;
    for (int i = 1; i <= n; ++i) v.push_back(stop * i / n);
    return v;
}

const DecayCurve& lock_curve(const std::vector<DecayCurve>& curves) {
    for (const auto& c : curves)
        if (c.label == "average") return c;
    return curves.front();
}

struct Gamma1Measurement {
    double rate{0.0};
    double err{0.0};
};

Gamma1Measurement measure_gamma1(Context& ctx, const QubitParams& params, std::uint64_t seed) {
    const auto& sc = *ctx.config.spectroscopy;
    ExperimentSpec ir;
    ir.name = "inversion_recovery";
    ir.protocol = Protocol::inversion_recovery;
    ir.tau_grid = sc.ir_tau;
    SimConfig sim = ctx.config.sim;
    sim.master_seed = seed;
    const auto curves = run_experiment(ir, params, ctx.config.noise, sim, ctx.config.readout, ctx.config.pulses);
    const FitResult fit = fit_decay(curves.front(), DecayLaw::exponential);
    for (const auto& w : fit.warnings) ctx.log.warn("inversion recovery: " + w);
    return {fit.rate(), fit.rate_error()};
}

struct PointResult {
    RatePoint rate;
    double nu_nominal{0.0};
    double gamma1{0.0};
};

PointResult measure_point(Context& ctx, const QubitParams& params, double nu_nominal, std::uint64_t seed) {
    const auto& sc = *ctx.config.spectroscopy;
    SimConfig sim = ctx.config.sim;
    PointResult out;
    out.nu_nominal = nu_nominal;

    // Rabi frequency from a short Rabi run at the same drive amplitude
    ExperimentSpec rabi;
    rabi.protocol = Protocol::rabi;
    rabi.lock_rabi = nu_nominal;
    rabi.tau_grid = linspace_positive(sc.rabi_periods / nu_nominal, sc.rabi_points);
    sim.master_seed = sub_seed(seed, 0);
    double nu_r = nu_nominal;
    try {
        const auto rc = run_experiment(rabi, params, ctx.config.noise, sim, ctx.config.readout, ctx.config.pulses);
        FitOptions fo;
        fo.frequency_hint = nu_nominal;
        nu_r = fit_decay(rc.front(), DecayLaw::damped_cosine, fo).params.at("frequency");
    } catch (const FitError& e) {
        ctx.log.warn("Rabi calibration at " + std::to_string(nu_nominal) + " Hz failed (" + e.what() +
                     "); using the nominal frequency");
    }

    ExperimentSpec lock;
    lock.protocol = sc.protocol;
    lock.lock_rabi = nu_nominal;
    lock.tau_grid = sc.lock_tau;
    FitResult fit;
    for (int pass = 0; pass < 3; ++pass) {
        sim.master_seed = sub_seed(seed, 1 + pass);
        const auto curves = run_experiment(lock, params, ctx.config.noise, sim, ctx.config.readout, ctx.config.pulses);
        fit = fit_decay(lock_curve(curves), DecayLaw::exponential);
        const double span = lock.tau_grid.back();
        const double covered = fit.rate() * span;
        if (!sc.adaptive_window || (covered > 1.0 && covered < 5.0) || !(fit.rate() > 0)) break;
        const double factor = std::clamp(2.5 / covered, 0.05, 20.0);
        for (double& t : lock.tau_grid) t *= factor;
    }
    for (const auto& w : fit.warnings) ctx.log.warn("T1rho at " + std::to_string(nu_nominal) + " Hz: " + w);
    out.rate = {nu_r, fit.rate(), fit.rate_error()};
    return out;
}

std::string rates_csv(const std::vector<PointResult>& points) {
    std::ostringstream os;
    os.precision(10);
    os << "nu_r_hz,nu_r_nominal_hz,gamma_1rho_per_s,err,gamma1_per_s\n";
    for (const auto& p : points)
        os << p.rate.nu_r << ',' << p.nu_nominal << ',' << p.rate.gamma_1rho << ',' << p.rate.err << ',' << p.gamma1
           << '\n';
    return os.str();
}

void fit_and_write(Context& ctx, const std::string& base, const SpectrumEstimate& est) {
    const auto& sc = *ctx.config.spectroscopy;
    if (!sc.fit_model) return;
    std::size_t usable = 0;
    for (std::size_t i = 0; i < est.psd.size(); ++i)
        if (est.psd[i] > 0 && !est.flagged[i]) ++usable;
    const std::size_t free = 1 + (sc.fit_alpha ? 0 : 1) + 3 * static_cast<std::size_t>(sc.fit_lorentzians);
    if (usable <= free) {
        ctx.log.warn(base + ": " + std::to_string(usable) + " usable points for " + std::to_string(free) +
                     " parameters; model fit skipped");
        return;
    }
    SpectrumFitOptions fo;
    fo.n_lorentzians = sc.fit_lorentzians;
    fo.fixed_alpha = sc.fit_alpha;
    try {
        const SpectrumFit fit = fit_spectrum_model(est, fo);
        for (const auto& w : fit.warnings) ctx.log.warn(base + " fit: " + w);
        json j;
        j["params"] = fit.params;
        j["errors"] = fit.errors;
        j["cost"] = fit.cost;
        j["warnings"] = fit.warnings;
        j["model"] = json::parse(serialize_noise_model(fit.model));
        ctx.write_file(base + "_fit.json", j.dump(2) + "\n");
    } catch (const FitError& e) {
        ctx.log.warn(base + ": model fit failed: " + e.what());
    }
}

int run_body(Context& ctx) {
    const auto& c = ctx.config;
    if (c.experiments.empty()) throw ConfigError("/experiments", "no experiments to run");
    for (std::size_t i = 0; i < c.experiments.size(); ++i) {
        const auto& spec = c.experiments[i];
        SimConfig sim = c.sim;
        sim.master_seed = sub_seed(c.sim.master_seed, i);
        ctx.log.info("running " + file_base(spec, i) + " (" + to_string(spec.protocol) + ", " +
                     std::to_string(spec.tau_grid.size()) + " points)");
        const auto curves = run_experiment(spec, c.qubit, c.noise, sim, c.readout, c.pulses);
        const std::string base = file_base(spec, i);
        if (curves.size() == 1) {
            ctx.write_curve(base, curves.front());
        } else {
            for (const auto& curve : curves) ctx.write_curve(base + "_" + curve.label, curve);
        }
    }
    return 0;
}

int spectroscopy_body(Context& ctx) {
    const auto& c = ctx.config;
    if (!c.spectroscopy) throw ConfigError("/spectroscopy", "section missing");
    const auto& sc = *c.spectroscopy;

    // delta-channel bias points first so epsilon points can use them as reference
    std::vector<std::size_t> order;
    for (std::size_t b = 0; b < sc.bias_epsilon.size(); ++b)
        if (sc.bias_epsilon[b] == 0.0) order.push_back(b);
    for (std::size_t b = 0; b < sc.bias_epsilon.size(); ++b)
        if (sc.bias_epsilon[b] != 0.0) order.push_back(b);
    std::size_t n_eps = sc.bias_epsilon.size() - std::count(sc.bias_epsilon.begin(), sc.bias_epsilon.end(), 0.0);

    std::optional<SpectrumEstimate> delta_ref;
    for (std::size_t b : order) {
        QubitParams params = c.qubit;
        params.epsilon = sc.bias_epsilon[b];
        const std::uint64_t bias_seed = sub_seed(c.sim.master_seed, 1000 + b);
        const bool delta_channel = params.epsilon == 0.0;
        const std::string base = delta_channel ? "delta" : (n_eps > 1 ? "epsilon_" + std::to_string(b) : "epsilon");
        ctx.log.info("bias point epsilon = " + std::to_string(params.epsilon) + " Hz (" + base + " channel)");

        const Gamma1Measurement g1 = measure_gamma1(ctx, params, sub_seed(bias_seed, 0));
        ctx.log.info("Gamma1 = " + std::to_string(g1.rate) + " +- " + std::to_string(g1.err) + " 1/s");

        std::vector<PointResult> points;
        std::vector<RatePoint> rates;
        for (std::size_t j = 0; j < sc.nu_r_grid.size(); ++j) {
            const std::uint64_t point_seed = sub_seed(bias_seed, 1 + j);
            PointResult p = measure_point(ctx, params, sc.nu_r_grid[j], point_seed);
            p.gamma1 = g1.rate;
            if (sc.refit_gamma1_per_point) p.gamma1 = measure_gamma1(ctx, params, sub_seed(point_seed, 9)).rate;
            ctx.log.info("nu_R = " + std::to_string(p.rate.nu_r) + " Hz: Gamma1rho = " + std::to_string(p.rate.gamma_1rho) +
                         " +- " + std::to_string(p.rate.err) + " 1/s");
            points.push_back(p);
        }

        // a per-point Gamma1 enters through an equivalent shift of the rate
        for (const auto& p : points) {
            RatePoint r = p.rate;
            r.gamma_1rho += 0.5 * (g1.rate - p.gamma1);
            rates.push_back(r);
        }
        ctx.write_file("rates_" + base + ".csv", rates_csv(points));

        SpectrumEstimate est;
        if (delta_channel) {
            est = extract_spectrum(rates, g1.rate, 0.0, nullptr, g1.err);
            delta_ref = est;
        } else {
            SpectrumEstimate ref;
            if (delta_ref) {
                ref = *delta_ref;
            } else {
                // no delta measurement: the configured delta model is the reference
                ref.channel = Channel::delta;
                for (const auto& r : rates) ref.freq.push_back(r.nu_r);
                std::sort(ref.freq.begin(), ref.freq.end());
                for (double f : ref.freq) {
                    ref.psd.push_back(c.noise.delta.empty() ? 0.0 : evaluate_psd(c.noise.delta, f));
                    ref.err.push_back(0.0);
                    ref.flagged.push_back(false);
                }
            }
            est = extract_spectrum(rates, g1.rate, params.theta(), &ref, g1.err);
        }
        for (std::size_t i = 0; i < est.flagged.size(); ++i)
            if (est.flagged[i]) ctx.log.warn(base + ": negative PSD at " + std::to_string(est.freq[i]) + " Hz flagged");
        ctx.write_spectrum("spectrum_" + base, est);
        fit_and_write(ctx, "spectrum_" + base, est);
    }
    return 0;
}

int echo_body(Context& ctx) {
    const auto& c = ctx.config;
    if (!c.echo) throw ConfigError("/echo", "section missing");
    const auto& ec = *c.echo;
    const NoiseModel model = longitudinal_model(c.noise.delta, c.noise.epsilon, c.qubit.theta());
    const EchoReport rep = echo_dip_report(model, ec.tau, {ec.protocol, ec.n_pi});

    std::ostringstream os;
    os.precision(10);
    os << "tau_s,coherence\n";
    for (std::size_t i = 0; i < rep.tau.size(); ++i) os << rep.tau[i] << ',' << rep.coherence[i] << '\n';
    if (ctx.wants("csv")) ctx.write_file("echo_prediction.csv", os.str());
    if (ctx.wants("json"))
        ctx.write_file("echo_prediction.json",
                       json{{"tau_s", rep.tau}, {"coherence", rep.coherence}}.dump(2) + "\n");

    json dip;
    dip["protocol"] = to_string(ec.protocol);
    dip["n_pi"] = ec.n_pi;
    dip["dip_tau_s"] = rep.dip_tau ? json(*rep.dip_tau) : json(nullptr);
    dip["shoulder_tau_s"] = rep.shoulder_tau ? json(*rep.shoulder_tau) : json(nullptr);
    ctx.write_file("echo_dip.json", dip.dump(2) + "\n");
    ctx.log.info(rep.dip_tau ? "coherence dip at tau = " + std::to_string(*rep.dip_tau * 1e6) + " us"
                             : std::string("no coherence dip on this grid"));
    if (rep.shoulder_tau) ctx.log.info("decay shoulder at tau = " + std::to_string(*rep.shoulder_tau * 1e6) + " us");

    if (ec.monte_carlo) {
        ExperimentSpec spec;
        spec.name = "echo_mc";
        spec.protocol = ec.protocol;
        spec.tau_grid = rep.tau;
        spec.n_pi = ec.n_pi;
        const auto curves = run_experiment(spec, c.qubit, c.noise, c.sim, c.readout, c.pulses);
        ctx.write_curve("echo_mc", curves.front());
        // prediction on the same readout scale; T1 damps the transverse signal by exp(-Gamma1 tau / 2)
        DecayCurve pred;
        pred.label = "echo_predicted";
        for (std::size_t i = 0; i < rep.tau.size(); ++i) {
            const double t1 = c.sim.include_t1 ? std::exp(-0.5 * c.qubit.gamma1 * rep.tau[i]) : 1.0;
            pred.tau.push_back(rep.tau[i]);
            pred.value.push_back(c.readout.offset + c.readout.visibility * 0.5 * (1.0 + rep.coherence[i] * t1));
            pred.stderr.push_back(0.0);
        }
        ctx.write_curve("echo_predicted", pred);
    }
    return 0;
}

} // namespace

int cmd_run(const CommandOptions& options) { return guarded(options, "run", run_body); }

int cmd_spectroscopy(const CommandOptions& options) { return guarded(options, "spectroscopy", spectroscopy_body); }

int cmd_predict_echo(const CommandOptions& options) { return guarded(options, "predict-echo", echo_body); }

int cmd_validate(const CommandOptions& options) {
    try {
        const RunConfig c = load_with_overrides(options);
        std::cout << "config ok: " << c.experiments.size() << " experiments, hash " << config_hash(c) << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: invalid config: " << e.what() << "\n";
        return 1;
    }
}

} // namespace fluxspec
