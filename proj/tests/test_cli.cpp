// test_cli.cpp: config parsing and canonical form, command exit codes and output files

#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fluxspec/commands.hpp"
#include "fluxspec/config.hpp"
#include "fluxspec/errors.hpp"
#include "json.hpp"

using namespace fluxspec;
namespace fs = std::filesystem;

namespace {

// Scratch directory, wiped per test.
struct Scratch {
    fs::path dir;
    explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("fluxspec_test_" + name)) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }

    std::string write(const std::string& name, const std::string& text) const {
        const auto p = dir / name;
        std::ofstream(p) << text;
        return p.string();
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* small_run = R"({
  "qubit": {"delta_ghz": 5.4, "t1_us": 12},
  "noise": {"delta": [{"type": "white", "level_rad2_per_s": 1e5}]},
  "experiments": [
    {"name": "lock", "protocol": "sl5_interleaved", "lock_rabi_mhz": 10,
     "tau_us": [0.2, 0.6, 1.0, 1.5]},
    {"protocol": "spin_echo", "tau_grid": {"start_us": 0.1, "stop_us": 1, "points": 4}}
  ],
  "sim": {"dt_ns": 1, "trajectories": 40, "seed": 5}
})";

CommandOptions opts(const std::string& config, const fs::path& out, unsigned threads = 1) {
    CommandOptions o;
    o.config_path = config;
    o.out_dir = out.string();
    o.threads = threads;
    return o;
}

int run_binary(const std::string& args) {
    const std::string cmd = std::string(FLUXSPEC_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

} // namespace

TEST_CASE("canonical form round trips exactly") {
    RunConfig c = parse_config(small_run);
    c.spectroscopy = SpectroscopyConfig{};
    c.spectroscopy->nu_r_grid = {1.0 / 3.0 * 1e6, 7e6};
    c.spectroscopy->lock_tau = {1e-7, 2e-6};
    c.spectroscopy->ir_tau = {1e-6, 3e-5};
    c.spectroscopy->fit_alpha.reset();
    c.echo = EchoConfig{{0.1e-6, 0.7e-6}, Protocol::cpmg, 4, true};
    c.validate();
    const std::string text = serialize_config(c);
    const RunConfig back = parse_config(text);
    CHECK(back == c);
    CHECK(serialize_config(back) == text);
    CHECK(config_hash(back) == config_hash(c));
    CHECK(config_hash(c).size() == 16);
}

TEST_CASE("hash ignores threads and output location but not physics") {
    const RunConfig a = parse_config(small_run);
    RunConfig b = a;
    b.sim.threads = 4;
    b.output.dir = "elsewhere";
    CHECK(config_hash(a) == config_hash(b));
    b.sim.master_seed += 1;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("unit suffixes canonicalize to SI") {
    const auto a = parse_config(R"({"qubit": {"delta_ghz": 5.4, "t1_us": 12, "temperature_mk": 65}})");
    const auto b = parse_config(R"({"qubit": {"delta_mhz": 5400, "gamma1_per_s": 83333.33333333333, "temperature_k": 0.065}})");
    CHECK(a.qubit.delta == doctest::Approx(5.4e9));
    CHECK(a.qubit.delta == doctest::Approx(b.qubit.delta).epsilon(1e-15));
    CHECK(a.qubit.gamma1 == doctest::Approx(b.qubit.gamma1).epsilon(1e-14));
    CHECK(a.qubit.temperature == doctest::Approx(b.qubit.temperature).epsilon(1e-15));
    const auto g = parse_config(R"({"experiments": [{"protocol": "ramsey",
        "tau_grid": {"start_ns": 10, "stop_us": 1, "points": 3, "spacing": "log"}}]})");
    REQUIRE(g.experiments[0].tau_grid.size() == 3);
    CHECK(g.experiments[0].tau_grid[1] == doctest::Approx(1e-7));
}

TEST_CASE("config errors name the offending location") {
    auto message = [](const std::string& text) {
        try {
            parse_config(text, "cfg");
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("accepted");
    };
    CHECK(message(R"({"qubit": {"delta_ghz": 5, "dleta_hz": 1}})").find("dleta_hz") != std::string::npos);
    CHECK(message(R"({"qubit": {"delta_ghz": 5, "delta_hz": 1}})").find("conflicts") != std::string::npos);
    CHECK(message(R"({"sim": {"trajectories": 0}})").find("trajectories") != std::string::npos);
    CHECK(message(R"({"experiments": [{"protocol": "hahn"}]})").find("protocol") != std::string::npos);
    CHECK(message(R"({"noise": {"delta": [{"type": "pink"}]}})").find("pink") != std::string::npos);
    CHECK(message(R"({"echo": {"tau_s": []}})").find("/echo/tau_s") != std::string::npos);
    CHECK(message(R"({"echo": {"tau_us": [1], "protocol": "sl5a"}})").find("/echo/protocol") != std::string::npos);
    CHECK(message(R"({"output": {"formats": ["xml"]}})").find("xml") != std::string::npos);
    CHECK(message("{ not json").find("malformed") != std::string::npos);
    CHECK(message(R"({"qubit": {"delta_ghz": -1}})") != "accepted");
}

TEST_CASE("shipped example configs validate") {
    for (const auto& entry : fs::directory_iterator(FLUXSPEC_CONFIG_DIR)) {
        CAPTURE(entry.path().string());
        CHECK(cmd_validate(CommandOptions{entry.path().string(), {}, {}, {}, {}}) == 0);
    }
}

TEST_CASE("run writes curves and a manifest, and reruns are byte-identical") {
    Scratch s("run");
    const auto cfg = s.write("cfg.json", small_run);
    REQUIRE(cmd_run(opts(cfg, s.dir / "a")) == 0);
    REQUIRE(cmd_run(opts(cfg, s.dir / "b")) == 0);
    REQUIRE(cmd_run(opts(cfg, s.dir / "c", 3)) == 0);

    const auto manifest = nlohmann::json::parse(slurp(s.dir / "a" / "manifest.json"));
    const auto outputs = manifest.at("outputs").get<std::vector<std::string>>();
    CHECK(outputs == std::vector<std::string>{"lock_sl5a.csv", "lock_sl5b.csv", "lock_average.csv", "spin_echo_1.csv"});
    CHECK(manifest.at("master_seed") == 5);
    CHECK(manifest.at("config_hash") == config_hash(load_config(cfg)));
    for (const auto& name : outputs) {
        CAPTURE(name);
        const auto a = slurp(s.dir / "a" / name);
        CHECK(a.rfind("tau_s,psw,stderr\n", 0) == 0);
        CHECK(a == slurp(s.dir / "b" / name));
        CHECK(a == slurp(s.dir / "c" / name));
    }
    const auto threaded = nlohmann::json::parse(slurp(s.dir / "c" / "manifest.json"));
    CHECK(threaded.at("config_hash") == manifest.at("config_hash"));

    CommandOptions o = opts(cfg, s.dir / "d");
    o.seed = 6;
    o.format = "json";
    REQUIRE(cmd_run(o) == 0);
    const auto j = nlohmann::json::parse(slurp(s.dir / "d" / "lock_average.json"));
    CHECK(j.at("tau_s").size() == 4);
    CHECK_FALSE(fs::exists(s.dir / "d" / "lock_average.csv"));
}

TEST_CASE("exit codes") {
    Scratch s("codes");
    CHECK(cmd_run(opts((s.dir / "missing.json").string(), s.dir / "o")) == 1);
    CHECK(cmd_predict_echo(opts(s.write("e.json", R"({"echo": {"tau_us": []}})"), s.dir / "o")) == 1);
    CHECK(cmd_run(opts(s.write("n.json", "{}"), s.dir / "o")) == 1);
    CHECK(cmd_spectroscopy(opts(s.write("n2.json", "{}"), s.dir / "o")) == 1);
    // Telegraph switching faster than the time step only shows up when traces are built.
    const auto rtn = s.write("rtn.json", R"({
      "noise": {"delta": [{"type": "rtn", "variance_rad2_per_s2": 1e12, "switch_rate_ghz": 5}]},
      "experiments": [{"protocol": "ramsey", "tau_us": [0.1, 0.2]}],
      "sim": {"dt_ns": 1, "trajectories": 2}})");
    CHECK(cmd_validate(opts(rtn, s.dir / "r")) == 0);
    CHECK(cmd_run(opts(rtn, s.dir / "r")) == 2);
    CHECK(slurp(s.dir / "r" / "run.log").find("error:") != std::string::npos);
}

TEST_CASE("delta-only spectroscopy with a single grid point") {
    Scratch s("spec");
    const auto cfg = s.write("cfg.json", R"({
      "qubit": {"delta_ghz": 5.4, "t1_us": 12},
      "noise": {"delta": [{"type": "white", "level_rad2_per_s": 1.667e5}]},
      "spectroscopy": {"nu_r_mhz": [10], "protocol": "sl5a",
        "lock_tau_grid": {"start_us": 1, "stop_us": 30, "points": 8},
        "ir_tau_grid": {"start_us": 1, "stop_us": 36, "points": 8},
        "rabi_points": 12, "rabi_periods": 2},
      "sim": {"dt_ns": 2, "trajectories": 24, "seed": 3}})");
    REQUIRE(cmd_spectroscopy(opts(cfg, s.dir / "o")) == 0);
    CHECK(fs::exists(s.dir / "o" / "rates_delta.csv"));
    CHECK(fs::exists(s.dir / "o" / "spectrum_delta.csv"));
    CHECK_FALSE(fs::exists(s.dir / "o" / "spectrum_delta_fit.json"));
    for (const auto& e : fs::directory_iterator(s.dir / "o"))
        CHECK(e.path().filename().string().find("epsilon") == std::string::npos);
    const auto log = slurp(s.dir / "o" / "run.log");
    CHECK(log.find("model fit skipped") != std::string::npos);
    const auto spectrum = slurp(s.dir / "o" / "spectrum_delta.csv");
    CHECK(std::count(spectrum.begin(), spectrum.end(), '\n') == 2);
}

TEST_CASE("predict-echo writes the prediction and the dip report") {
    Scratch s("echo");
    const auto cfg = (fs::path(FLUXSPEC_CONFIG_DIR) / "echo_prediction.json").string();
    REQUIRE(cmd_predict_echo(opts(cfg, s.dir / "o")) == 0);
    const auto csv = slurp(s.dir / "o" / "echo_prediction.csv");
    CHECK(csv.rfind("tau_s,coherence\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 60);
    const auto dip = nlohmann::json::parse(slurp(s.dir / "o" / "echo_dip.json"));
    CHECK(dip.at("protocol") == "spin_echo");
    CHECK(dip.at("shoulder_tau_s").get<double>() == doctest::Approx(1.0e-6).epsilon(0.3));
}

TEST_CASE("command-line front end") {
    Scratch s("bin");
    const std::string cfg = (fs::path(FLUXSPEC_CONFIG_DIR) / "echo_prediction.json").string();
    CHECK(run_binary("validate --config " + cfg) == 0);
    CHECK(run_binary("validate") == 1);
    CHECK(run_binary("predict-echo --config " + cfg + " --format xml") == 1);
    CHECK(run_binary("validate --config " + (s.dir / "nope.json").string()) == 1);
    CHECK(run_binary("predict-echo --config " + cfg + " --out " + (s.dir / "o").string() + " --format json") == 0);
    CHECK(fs::exists(s.dir / "o" / "echo_prediction.json"));
    CHECK(run_binary("--version") == 0);
}
