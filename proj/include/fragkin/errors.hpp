#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fragkin {

enum class ErrorCode {
    IndexOutOfRange,
    InvalidParameter,
    WeightBelowIndex,
    LengthMismatch,
    ToleranceNotMet,
    TruncationNotConverged,
    AssumptionNotCertified,
    NotMassConserving,
    DegenerateFit,
    IllConditioned,
    TailUnavailable,
    ConfigInvalid,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::WeightBelowIndex: return "WeightBelowIndex";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ToleranceNotMet: return "ToleranceNotMet";
    case ErrorCode::TruncationNotConverged: return "TruncationNotConverged";
    case ErrorCode::AssumptionNotCertified: return "AssumptionNotCertified";
    case ErrorCode::NotMassConserving: return "NotMassConserving";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::TailUnavailable: return "TailUnavailable";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    }
    return "Unknown";
}

/// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const std::string& what) {
    if (!condition) fail(code, what);
}

} // namespace fragkin
