#pragma once

#include <stdexcept>
#include <string>

namespace kzcal {

enum class ErrorCode {
    InvalidWeight,
    InvalidIndex,
    InvalidSites,
    InvalidParams,
    SingularConfiguration,
    UnsupportedOrder,
    Unsupported,
    DimensionCap,
    SingularPath,
    IntegrationFailure,
    DegenerateSpectrum,
    Config,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidWeight: return "invalid-weight";
        case ErrorCode::InvalidIndex: return "invalid-index";
        case ErrorCode::InvalidSites: return "invalid-sites";
        case ErrorCode::InvalidParams: return "invalid-params";
        case ErrorCode::SingularConfiguration: return "singular-configuration";
        case ErrorCode::UnsupportedOrder: return "unsupported-order";
        case ErrorCode::Unsupported: return "unsupported";
        case ErrorCode::DimensionCap: return "dimension-cap";
        case ErrorCode::SingularPath: return "singular-path";
        case ErrorCode::IntegrationFailure: return "integration-failure";
        case ErrorCode::DegenerateSpectrum: return "degenerate-spectrum";
        case ErrorCode::Config: return "config";
    }
    return "unknown";
}

/// Every library failure carries a machine-readable code next to the message.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace kzcal
