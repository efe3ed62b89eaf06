#pragma once

#include <stdexcept>
#include <string>

namespace supplyshare {

/// Base of every error raised by the library. `kind()` names the failing check.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define SUPPLYSHARE_ERROR(Name)                                              \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string& message) : Error(#Name, message) {} \
    }

SUPPLYSHARE_ERROR(SchemaError);
SUPPLYSHARE_ERROR(RangeError);
SUPPLYSHARE_ERROR(UnknownCountryError);
SUPPLYSHARE_ERROR(DegenerateCompositionError);
SUPPLYSHARE_ERROR(WindowError);
SUPPLYSHARE_ERROR(ConfigError);
SUPPLYSHARE_ERROR(SPDError);
SUPPLYSHARE_ERROR(NumericalError);
SUPPLYSHARE_ERROR(InsufficientChainsError);
SUPPLYSHARE_ERROR(InsufficientDataError);
SUPPLYSHARE_ERROR(TestSetMismatchError);
SUPPLYSHARE_ERROR(GridMismatchError);
SUPPLYSHARE_ERROR(IOError);

#undef SUPPLYSHARE_ERROR

}  // namespace supplyshare
