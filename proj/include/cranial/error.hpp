#pragma once

#include <stdexcept>
#include <string>

namespace cranial {

enum class ErrorKind {
    GeometryMismatch,
    EmptyVolume,
    FormatError,
    DimensionError,
    IoError,
    NoEligibleCenters,
    SynthesisFailed,
    DegenerateConfig,
    BothEmpty,
    ShapeMismatch,
    NonFiniteGradient,
    InvalidArgument,
};

const char* to_string(ErrorKind kind) noexcept;

// Single exception type for the library; callers branch on kind() when the
// distinction matters (the CLI maps kinds to exit codes).
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::GeometryMismatch: return "GeometryMismatch";
        case ErrorKind::EmptyVolume: return "EmptyVolume";
        case ErrorKind::FormatError: return "FormatError";
        case ErrorKind::DimensionError: return "DimensionError";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::NoEligibleCenters: return "NoEligibleCenters";
        case ErrorKind::SynthesisFailed: return "SynthesisFailed";
        case ErrorKind::DegenerateConfig: return "DegenerateConfig";
        case ErrorKind::BothEmpty: return "BothEmpty";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

}  // namespace cranial
