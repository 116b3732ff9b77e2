// protocol.cpp: protocol name table

#include "fluxspec/protocol.hpp"

#include <array>
#include <utility>

#include "fluxspec/errors.hpp"

namespace fluxspec {

namespace {
constexpr std::array<std::pair<Protocol, std::string_view>, 10> names{{
    {Protocol::inversion_recovery, "inversion_recovery"},
    {Protocol::ramsey, "ramsey"},
    {Protocol::spin_echo, "spin_echo"},
    {Protocol::cpmg, "cpmg"},
    {Protocol::rabi, "rabi"},
    {Protocol::rotary_echo, "rotary_echo"},
    {Protocol::sl3, "sl3"},
    {Protocol::sl5a, "sl5a"},
    {Protocol::sl5b, "sl5b"},
    {Protocol::sl5_interleaved, "sl5_interleaved"},
}};
} // namespace

std::string to_string(Protocol p) {
    for (const auto& [id, name] : names)
        if (id == p) return std::string(name);
    return "unknown";
}

Protocol protocol_from_string(std::string_view name) {
    for (const auto& [id, n] : names)
        if (n == name) return id;
    throw UnsupportedProtocol("unknown protocol '" + std::string(name) + "'");
}

} // namespace fluxspec
