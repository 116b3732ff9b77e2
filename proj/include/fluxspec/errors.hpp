// errors.hpp: exception types shared by all modules

#pragma once

#include <stdexcept>
#include <string>

namespace fluxspec {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FrameMismatch : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct BandTooShort : Error { using Error::Error; };
struct TimestepTooCoarse : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };
struct CoverageError : Error { using Error::Error; };
struct StabilityError : Error { using Error::Error; };
struct UnsupportedProtocol : Error { using Error::Error; };
struct IntegrationError : Error { using Error::Error; };
struct FitError : Error { using Error::Error; };

// Invalid user input; `where` names the offending config path.
struct ConfigError : Error {
    std::string where;
    ConfigError(std::string location, const std::string& what)
        : Error(location.empty() ? what : location + ": " + what), where(std::move(location)) {}
};

} // namespace fluxspec
