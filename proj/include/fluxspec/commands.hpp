// commands.hpp: batch entry points behind the command-line tool

#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace fluxspec {

struct CommandOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<unsigned> threads;
    std::optional<std::string> format;  // csv or json
};

// Exit codes: 0 success, 1 invalid config or unreadable file, 2 runtime failure.
int cmd_run(const CommandOptions& options);
int cmd_spectroscopy(const CommandOptions& options);
int cmd_predict_echo(const CommandOptions& options);
int cmd_validate(const CommandOptions& options);

} // namespace fluxspec
