#pragma once

#include <stdexcept>
#include <string>

namespace toadfront {

enum class ErrorCode {
    InvalidArgument,
    UnknownBuiltin,
    NonPositiveDiffusivity,
    EigenSolverFailure,
    NoBracket,
    NonPositiveDbar,
    SolvabilityViolation,
    StabilityBlowup,
    NegativeDensity,
    ChecksumMismatch,
    NoConvergence,
    OrderingViolatedAtT1,
    LevelNotAttained,
    IllConditioned,
    WindowOutsideGrid,
    NonPositiveSample,
    DomainTooSmall,
    NonPositive,
    TruncationError,
    ConfigParseError,
    MissingColumn,
    IoError,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace toadfront
