// protocol.hpp: experiment protocol identifiers shared by sequences, theory and cli

#pragma once

#include <string>
#include <string_view>

namespace fluxspec {

enum class Protocol {
    inversion_recovery,
    ramsey,
    spin_echo,
    cpmg,
    rabi,
    rotary_echo,
    sl3,
    sl5a,
    sl5b,
    sl5_interleaved,
};

std::string to_string(Protocol p);
Protocol protocol_from_string(std::string_view name);  // throws UnsupportedProtocol

} // namespace fluxspec
