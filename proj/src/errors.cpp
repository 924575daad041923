#include "toadfront/errors.hpp"

namespace toadfront {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::UnknownBuiltin: return "UnknownBuiltin";
        case ErrorCode::NonPositiveDiffusivity: return "NonPositiveDiffusivity";
        case ErrorCode::EigenSolverFailure: return "EigenSolverFailure";
        case ErrorCode::NoBracket: return "NoBracket";
        case ErrorCode::NonPositiveDbar: return "NonPositiveDbar";
        case ErrorCode::SolvabilityViolation: return "SolvabilityViolation";
        case ErrorCode::StabilityBlowup: return "StabilityBlowup";
        case ErrorCode::NegativeDensity: return "NegativeDensity";
        case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::OrderingViolatedAtT1: return "OrderingViolatedAtT1";
        case ErrorCode::LevelNotAttained: return "LevelNotAttained";
        case ErrorCode::IllConditioned: return "IllConditioned";
        case ErrorCode::WindowOutsideGrid: return "WindowOutsideGrid";
        case ErrorCode::NonPositiveSample: return "NonPositiveSample";
        case ErrorCode::DomainTooSmall: return "DomainTooSmall";
        case ErrorCode::NonPositive: return "NonPositive";
        case ErrorCode::TruncationError: return "TruncationError";
        case ErrorCode::ConfigParseError: return "ConfigParseError";
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace toadfront
