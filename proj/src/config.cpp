// config.cpp: JSON run configuration with unit-suffixed keys

#include "fluxspec/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "fluxspec/errors.hpp"

namespace fluxspec {

namespace {

using json = nlohmann::json;

struct UnitSuffix {
    const char* suffix;
    double factor;
};

const std::vector<UnitSuffix> frequency_units{{"hz", 1.0}, {"khz", 1e3}, {"mhz", 1e6}, {"ghz", 1e9}};
const std::vector<UnitSuffix> time_units{{"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}, {"ns", 1e-9}};
const std::vector<UnitSuffix> temperature_units{{"k", 1.0}, {"mk", 1e-3}};

std::string join(const std::string& path, const std::string& key) { return path + "/" + key; }

// Object view that tracks consumed keys so leftovers can be reported.
class Obj {
public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    }

    const std::string& path() const { return path_; }
    bool has(const std::string& key) const { return j_.contains(key); }

    const json* get(const std::string& key) {
        if (!j_.contains(key)) return nullptr;
        used_.insert(key);
        return &j_.at(key);
    }

    std::optional<double> number(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_number()) throw ConfigError(join(path_, key), "expected a number");
        return v->get<double>();
    }

    std::optional<long long> integer(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_number_integer()) throw ConfigError(join(path_, key), "expected an integer");
        return v->get<long long>();
    }

    std::optional<bool> boolean(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_boolean()) throw ConfigError(join(path_, key), "expected true or false");
        return v->get<bool>();
    }

    std::optional<std::string> string(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_string()) throw ConfigError(join(path_, key), "expected a string");
        return v->get<std::string>();
    }

    // base_<unit> in SI; at most one unit variant may be present.
    std::optional<double> quantity(const std::string& base, const std::vector<UnitSuffix>& units) {
        std::optional<double> out;
        std::string found;
        for (const auto& u : units) {
            const std::string key = base + "_" + u.suffix;
            if (!has(key)) continue;
            if (out) throw ConfigError(join(path_, key), "conflicts with " + found);
            out = *number(key) * u.factor;
            found = key;
        }
        return out;
    }

    // base_<unit> as a list, or base_grid {start_<unit>, stop_<unit>, points, spacing}.
    std::optional<std::vector<double>> quantity_list(const std::string& base, const std::vector<UnitSuffix>& units) {
        std::optional<std::vector<double>> out;
        std::string found;
        for (const auto& u : units) {
            const std::string key = base + "_" + u.suffix;
            const json* v = get(key);
            if (!v) continue;
            if (out) throw ConfigError(join(path_, key), "conflicts with " + found);
            if (!v->is_array()) throw ConfigError(join(path_, key), "expected a list of numbers");
            std::vector<double> vals;
            for (std::size_t i = 0; i < v->size(); ++i) {
                if (!(*v)[i].is_number())
                    throw ConfigError(join(path_, key) + "/" + std::to_string(i), "expected a number");
                vals.push_back((*v)[i].get<double>() * u.factor);
            }
            out = vals;
            found = key;
        }
        const std::string gkey = base + "_grid";
        if (const json* g = get(gkey)) {
            if (out) throw ConfigError(join(path_, gkey), "conflicts with " + found);
            Obj grid(*g, join(path_, gkey));
            const auto start = grid.quantity("start", units);
            const auto stop = grid.quantity("stop", units);
            const auto points = grid.integer("points");
            const std::string spacing = grid.string("spacing").value_or("linear");
            grid.finish();
            if (!start || !stop || !points) throw ConfigError(grid.path(), "needs start, stop and points");
            if (*points < 0) throw ConfigError(join(grid.path(), "points"), "must be nonnegative");
            std::vector<double> vals;
            const long long n = *points;
            for (long long i = 0; i < n; ++i) {
                const double u = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
                if (spacing == "linear") {
                    vals.push_back(*start + u * (*stop - *start));
                } else if (spacing == "log") {
                    if (!(*start > 0 && *stop > 0)) throw ConfigError(grid.path(), "log spacing needs positive bounds");
                    vals.push_back(*start * std::pow(*stop / *start, u));
                } else {
                    throw ConfigError(join(grid.path(), "spacing"), "expected 'linear' or 'log'");
                }
            }
            out = vals;
        }
        return out;
    }

    Obj object(const std::string& key) {
        const json* v = get(key);
        return Obj(*v, join(path_, key));
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError(join(path_, it.key()), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(origin, std::string("malformed JSON: ") + e.what());
    }
}

NoiseComponent read_component(Obj o) {
    const auto type = o.string("type");
    if (!type) throw ConfigError(o.path(), "component needs a 'type'");
    NoiseComponent c;
    if (*type == "power_law") {
        PowerLaw p;
        p.amplitude = o.number("amplitude").value_or(0.0);
        p.alpha = o.number("alpha").value_or(p.alpha);
        p.f_low = o.quantity("f_low", frequency_units).value_or(p.f_low);
        p.f_high = o.quantity("f_high", frequency_units).value_or(p.f_high);
        c = p;
    } else if (*type == "lorentzian") {
        LorentzianBump b;
        b.s_peak = o.number("s_peak_rad2_per_s").value_or(0.0);
        b.center = o.quantity("center", frequency_units).value_or(0.0);
        b.width = o.quantity("width", frequency_units).value_or(b.width);
        c = b;
    } else if (*type == "rtn") {
        RtnLorentzian r;
        r.variance = o.number("variance_rad2_per_s2").value_or(0.0);
        r.switch_rate = o.quantity("switch_rate", frequency_units).value_or(0.0);
        c = r;
    } else if (*type == "white") {
        c = White{o.number("level_rad2_per_s").value_or(0.0)};
    } else if (*type == "quasistatic") {
        c = Quasistatic{o.number("variance_rad2_per_s2").value_or(0.0)};
    } else {
        throw ConfigError(join(o.path(), "type"), "unknown noise component '" + *type + "'");
    }
    o.finish();
    return c;
}

NoiseModel read_noise_model(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path, "expected a list of noise components");
    NoiseModel m;
    for (std::size_t i = 0; i < j.size(); ++i) m.components.push_back(read_component(Obj(j[i], path + "/" + std::to_string(i))));
    try {
        m.validate();
    } catch (const Error& e) {
        throw ConfigError(path, e.what());
    }
    return m;
}

json write_noise_model(const NoiseModel& m) {
    json arr = json::array();
    for (const auto& c : m.components) {
        json o;
        if (const auto* p = std::get_if<PowerLaw>(&c)) {
            o = {{"type", "power_law"}, {"amplitude", p->amplitude}, {"alpha", p->alpha}, {"f_low_hz", p->f_low}};
            if (std::isfinite(p->f_high)) o["f_high_hz"] = p->f_high;
        } else if (const auto* b = std::get_if<LorentzianBump>(&c)) {
            o = {{"type", "lorentzian"}, {"s_peak_rad2_per_s", b->s_peak}, {"center_hz", b->center}, {"width_hz", b->width}};
        } else if (const auto* r = std::get_if<RtnLorentzian>(&c)) {
            o = {{"type", "rtn"}, {"variance_rad2_per_s2", r->variance}, {"switch_rate_hz", r->switch_rate}};
        } else if (const auto* w = std::get_if<White>(&c)) {
            o = {{"type", "white"}, {"level_rad2_per_s", w->level}};
        } else if (const auto* q = std::get_if<Quasistatic>(&c)) {
            o = {{"type", "quasistatic"}, {"variance_rad2_per_s2", q->variance}};
        }
        arr.push_back(o);
    }
    return arr;
}

Protocol read_protocol(Obj& o, const std::string& key, Protocol fallback) {
    const auto s = o.string(key);
    if (!s) return fallback;
    try {
        return protocol_from_string(*s);
    } catch (const UnsupportedProtocol& e) {
        throw ConfigError(join(o.path(), key), e.what());
    }
}

// Rethrow library validation errors with the config location attached.
template <typename F>
void checked(const std::string& where, F&& f) {
    try {
        f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(where, e.what());
    }
}

void require_positive_list(const std::vector<double>& v, const std::string& where, bool allow_zero) {
    if (v.empty()) throw ConfigError(where, "grid is empty");
    for (double x : v)
        if (!(allow_zero ? x >= 0 : x > 0) || !std::isfinite(x)) throw ConfigError(where, "grid values must be positive");
}

} // namespace

void RunConfig::validate() const {
    checked("/qubit", [&] { qubit.validate(); });
    checked("/noise/delta", [&] { noise.delta.validate(); });
    checked("/noise/epsilon", [&] { noise.epsilon.validate(); });
    for (std::size_t i = 0; i < experiments.size(); ++i)
        checked("/experiments/" + std::to_string(i), [&] { experiments[i].validate(); });
    if (!(sim.dt > 0)) throw ConfigError("/sim/dt_s", "must be positive");
    if (sim.n_trajectories < 1) throw ConfigError("/sim/trajectories", "must be at least 1");
    if (sim.threads < 1) throw ConfigError("/sim/threads", "must be at least 1");
    if (!(pulses.sigma > 0)) throw ConfigError("/pulses/sigma_s", "must be positive");
    if (!(pulses.lock_edge_sigma >= 0)) throw ConfigError("/pulses/lock_edge_sigma_s", "must be nonnegative");
    checked("/readout", [&] { readout.validate(); });
    if (output.formats.empty()) throw ConfigError("/output/formats", "needs at least one format");
    for (const auto& f : output.formats)
        if (f != "csv" && f != "json") throw ConfigError("/output/formats", "unknown format '" + f + "'");
    if (spectroscopy) {
        const auto& s = *spectroscopy;
        require_positive_list(s.nu_r_grid, "/spectroscopy/nu_r_hz", false);
        if (s.bias_epsilon.empty()) throw ConfigError("/spectroscopy/bias_epsilon_hz", "needs at least one bias point");
        require_positive_list(s.lock_tau, "/spectroscopy/lock_tau_s", false);
        require_positive_list(s.ir_tau, "/spectroscopy/ir_tau_s", false);
        if (s.rabi_points < 6) throw ConfigError("/spectroscopy/rabi_points", "must be at least 6");
        if (!(s.rabi_periods > 0)) throw ConfigError("/spectroscopy/rabi_periods", "must be positive");
        if (s.fit_lorentzians < 0) throw ConfigError("/spectroscopy/fit_lorentzians", "must be nonnegative");
        const Protocol p = s.protocol;
        if (p != Protocol::sl3 && p != Protocol::sl5a && p != Protocol::sl5b && p != Protocol::sl5_interleaved)
            throw ConfigError("/spectroscopy/protocol", "needs a spin-locking protocol");
    }
    if (echo) {
        require_positive_list(echo->tau, "/echo/tau_s", false);
        if (echo->protocol != Protocol::spin_echo && echo->protocol != Protocol::cpmg && echo->protocol != Protocol::ramsey)
            throw ConfigError("/echo/protocol", "needs ramsey, spin_echo or cpmg");
        if (echo->n_pi < 1) throw ConfigError("/echo/n_pi", "must be at least 1");
    }
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
    const json root = parse_json(text, origin);
    Obj top(root, origin + ":");
    RunConfig c;

    if (top.has("qubit")) {
        Obj q = top.object("qubit");
        c.qubit.delta = q.quantity("delta", frequency_units).value_or(c.qubit.delta);
        c.qubit.epsilon = q.quantity("epsilon", frequency_units).value_or(c.qubit.epsilon);
        const auto t1 = q.quantity("t1", time_units);
        const auto g1 = q.number("gamma1_per_s");
        if (t1 && g1) throw ConfigError(join(q.path(), "gamma1_per_s"), "conflicts with t1");
        if (t1) {
            if (!(*t1 > 0)) throw ConfigError(join(q.path(), "t1"), "must be positive");
            c.qubit.gamma1 = 1.0 / *t1;
        }
        if (g1) c.qubit.gamma1 = *g1;
        c.qubit.temperature = q.quantity("temperature", temperature_units).value_or(c.qubit.temperature);
        q.finish();
    }

    if (top.has("noise")) {
        Obj n = top.object("noise");
        if (const json* d = n.get("delta")) c.noise.delta = read_noise_model(*d, join(n.path(), "delta"));
        if (const json* e = n.get("epsilon")) c.noise.epsilon = read_noise_model(*e, join(n.path(), "epsilon"));
        n.finish();
    }

    if (const json* ex = top.get("experiments")) {
        const std::string path = join(top.path(), "experiments");
        if (!ex->is_array()) throw ConfigError(path, "expected a list");
        for (std::size_t i = 0; i < ex->size(); ++i) {
            Obj e((*ex)[i], path + "/" + std::to_string(i));
            ExperimentSpec s;
            s.name = e.string("name").value_or("");
            s.protocol = read_protocol(e, "protocol", s.protocol);
            s.tau_grid = e.quantity_list("tau", time_units).value_or(std::vector<double>{});
            s.lock_rabi = e.quantity("lock_rabi", frequency_units).value_or(0.0);
            s.detuning = e.quantity("detuning", frequency_units).value_or(0.0);
            s.gap = e.quantity("gap", time_units).value_or(s.gap);
            s.n_pi = static_cast<int>(e.integer("n_pi").value_or(s.n_pi));
            e.finish();
            checked(e.path(), [&] { s.validate(); });
            c.experiments.push_back(s);
        }
    }

    if (top.has("sim")) {
        Obj s = top.object("sim");
        c.sim.dt = s.quantity("dt", time_units).value_or(c.sim.dt);
        if (const auto n = s.integer("trajectories")) {
            if (*n < 1) throw ConfigError(join(s.path(), "trajectories"), "must be at least 1");
            c.sim.n_trajectories = static_cast<std::size_t>(*n);
        }
        if (const json* seed = s.get("seed")) {
            if (!seed->is_number_unsigned()) throw ConfigError(join(s.path(), "seed"), "expected a nonnegative integer");
            c.sim.master_seed = seed->get<std::uint64_t>();
        }
        if (const auto f = s.string("frame")) {
            if (*f == "rotating_rwa") c.sim.integration_frame = IntegrationFrame::rotating_rwa;
            else if (*f == "qubit_full") c.sim.integration_frame = IntegrationFrame::qubit_full;
            else throw ConfigError(join(s.path(), "frame"), "expected 'rotating_rwa' or 'qubit_full'");
        }
        c.sim.include_t1 = s.boolean("include_t1").value_or(c.sim.include_t1);
        if (const auto t = s.integer("threads")) {
            if (*t < 1) throw ConfigError(join(s.path(), "threads"), "must be at least 1");
            c.sim.threads = static_cast<unsigned>(*t);
        }
        s.finish();
    }

    if (top.has("pulses")) {
        Obj p = top.object("pulses");
        c.pulses.sigma = p.quantity("sigma", time_units).value_or(c.pulses.sigma);
        c.pulses.lock_edge_sigma = p.quantity("lock_edge_sigma", time_units).value_or(c.pulses.lock_edge_sigma);
        p.finish();
    }

    if (top.has("readout")) {
        Obj r = top.object("readout");
        c.readout.visibility = r.number("visibility").value_or(c.readout.visibility);
        c.readout.offset = r.number("offset").value_or(c.readout.offset);
        r.finish();
    }

    if (top.has("output")) {
        Obj o = top.object("output");
        c.output.dir = o.string("dir").value_or(c.output.dir);
        if (const json* f = o.get("formats")) {
            if (!f->is_array()) throw ConfigError(join(o.path(), "formats"), "expected a list of strings");
            c.output.formats.clear();
            for (const auto& v : *f) {
                if (!v.is_string()) throw ConfigError(join(o.path(), "formats"), "expected a list of strings");
                c.output.formats.push_back(v.get<std::string>());
            }
        }
        o.finish();
    }

    if (top.has("spectroscopy")) {
        Obj s = top.object("spectroscopy");
        SpectroscopyConfig sc;
        sc.nu_r_grid = s.quantity_list("nu_r", frequency_units).value_or(std::vector<double>{});
        sc.bias_epsilon = s.quantity_list("bias_epsilon", frequency_units).value_or(sc.bias_epsilon);
        sc.protocol = read_protocol(s, "protocol", sc.protocol);
        sc.lock_tau = s.quantity_list("lock_tau", time_units).value_or(std::vector<double>{});
        sc.adaptive_window = s.boolean("adaptive_window").value_or(sc.adaptive_window);
        sc.ir_tau = s.quantity_list("ir_tau", time_units).value_or(std::vector<double>{});
        sc.rabi_points = static_cast<int>(s.integer("rabi_points").value_or(sc.rabi_points));
        sc.rabi_periods = s.number("rabi_periods").value_or(sc.rabi_periods);
        sc.refit_gamma1_per_point = s.boolean("refit_gamma1_per_point").value_or(sc.refit_gamma1_per_point);
        sc.fit_model = s.boolean("fit_model").value_or(sc.fit_model);
        sc.fit_lorentzians = static_cast<int>(s.integer("fit_lorentzians").value_or(sc.fit_lorentzians));
        if (const json* a = s.get("fit_alpha")) {
            if (a->is_null()) sc.fit_alpha.reset();
            else if (a->is_number()) sc.fit_alpha = a->get<double>();
            else throw ConfigError(join(s.path(), "fit_alpha"), "expected a number or null");
        }
        s.finish();
        c.spectroscopy = sc;
    }

    if (top.has("echo")) {
        Obj e = top.object("echo");
        EchoConfig ec;
        ec.tau = e.quantity_list("tau", time_units).value_or(std::vector<double>{});
        ec.protocol = read_protocol(e, "protocol", ec.protocol);
        ec.n_pi = static_cast<int>(e.integer("n_pi").value_or(ec.n_pi));
        ec.monte_carlo = e.boolean("monte_carlo").value_or(ec.monte_carlo);
        e.finish();
        c.echo = ec;
    }

    top.finish();
    c.validate();
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

std::string serialize_config(const RunConfig& c) {
    json j;
    j["qubit"] = {{"delta_hz", c.qubit.delta},
                  {"epsilon_hz", c.qubit.epsilon},
                  {"gamma1_per_s", c.qubit.gamma1},
                  {"temperature_k", c.qubit.temperature}};
    j["noise"] = {{"delta", write_noise_model(c.noise.delta)}, {"epsilon", write_noise_model(c.noise.epsilon)}};
    json ex = json::array();
    for (const auto& s : c.experiments)
        ex.push_back({{"name", s.name},
                      {"protocol", to_string(s.protocol)},
                      {"tau_s", s.tau_grid},
                      {"lock_rabi_hz", s.lock_rabi},
                      {"detuning_hz", s.detuning},
                      {"gap_s", s.gap},
                      {"n_pi", s.n_pi}});
    j["experiments"] = ex;
    j["sim"] = {{"dt_s", c.sim.dt},
                {"trajectories", c.sim.n_trajectories},
                {"seed", c.sim.master_seed},
                {"frame", c.sim.integration_frame == IntegrationFrame::qubit_full ? "qubit_full" : "rotating_rwa"},
                {"include_t1", c.sim.include_t1},
                {"threads", c.sim.threads}};
    j["pulses"] = {{"sigma_s", c.pulses.sigma}, {"lock_edge_sigma_s", c.pulses.lock_edge_sigma}};
    j["readout"] = {{"visibility", c.readout.visibility}, {"offset", c.readout.offset}};
    j["output"] = {{"dir", c.output.dir}, {"formats", c.output.formats}};
    if (c.spectroscopy) {
        const auto& s = *c.spectroscopy;
        j["spectroscopy"] = {{"nu_r_hz", s.nu_r_grid},
                             {"bias_epsilon_hz", s.bias_epsilon},
                             {"protocol", to_string(s.protocol)},
                             {"lock_tau_s", s.lock_tau},
                             {"adaptive_window", s.adaptive_window},
                             {"ir_tau_s", s.ir_tau},
                             {"rabi_points", s.rabi_points},
                             {"rabi_periods", s.rabi_periods},
                             {"refit_gamma1_per_point", s.refit_gamma1_per_point},
                             {"fit_model", s.fit_model},
                             {"fit_lorentzians", s.fit_lorentzians},
                             {"fit_alpha", s.fit_alpha ? json(*s.fit_alpha) : json(nullptr)}};
    }
    if (c.echo) {
        j["echo"] = {{"tau_s", c.echo->tau},
                     {"protocol", to_string(c.echo->protocol)},
                     {"n_pi", c.echo->n_pi},
                     {"monte_carlo", c.echo->monte_carlo}};
    }
    return j.dump(2) + "\n";
}

NoiseModel parse_noise_model(const std::string& text, const std::string& origin) {
    return read_noise_model(parse_json(text, origin), origin + ":");
}

std::string serialize_noise_model(const NoiseModel& model) { return write_noise_model(model).dump(2) + "\n"; }

std::string config_hash(const RunConfig& config) {
    // speed and output location do not change results
    RunConfig c = config;
    c.sim.threads = 1;
    c.output.dir.clear();
    const std::string text = serialize_config(c);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace fluxspec
