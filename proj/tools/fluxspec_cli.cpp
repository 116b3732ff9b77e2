// fluxspec_cli.cpp: command-line front end

#include <iostream>

#include "CLI11.hpp"

#include "fluxspec/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Noise spectroscopy of driven flux qubits: simulate, extract and fit noise spectra"};
    app.set_version_flag("--version", FLUXSPEC_VERSION);
    app.require_subcommand(1);

    fluxspec::CommandOptions opts;
    std::uint64_t seed = 0;
    std::string out, format;
    unsigned threads = 1;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config_path, "Run configuration (JSON)")->required();
        sub->add_option("--seed", seed, "Master seed, overrides the config");
        sub->add_option("--out", out, "Output directory, overrides the config");
        sub->add_option("--threads", threads, "Worker threads (results do not depend on it)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    };

    auto* run = app.add_subcommand("run", "Run the configured experiments and write decay curves");
    auto* spec = app.add_subcommand("spectroscopy", "Measure T1rho over the nu_R grid and extract the noise spectrum");
    auto* echo = app.add_subcommand("predict-echo", "Filter-function echo prediction and dip report");
    auto* validate = app.add_subcommand("validate", "Check a configuration without running it");
    for (auto* sub : {run, spec, echo, validate}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    for (auto* sub : {run, spec, echo, validate}) {
        if (sub->count("--seed")) opts.seed = seed;
        if (sub->count("--out")) opts.out_dir = out;
        if (sub->count("--threads")) opts.threads = threads;
        if (sub->count("--format")) opts.format = format;
    }

    if (*run) return fluxspec::cmd_run(opts);
    if (*spec) return fluxspec::cmd_spectroscopy(opts);
    if (*echo) return fluxspec::cmd_predict_echo(opts);
    return fluxspec::cmd_validate(opts);
}
