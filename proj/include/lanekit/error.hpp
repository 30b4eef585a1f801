#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lanekit {

enum class ErrorKind {
    ChannelMismatch,
    ImageTooSmall,
    DimensionMismatch,
    InsufficientViews,
    DegenerateViews,
    NumericalFailure,
    BehindCamera,
    NonConvergence,
    FileError,
    ParseError,
    DegenerateQuad,
    DegenerateConfiguration,
    PointAtInfinity,
    SingularMatrix,
    InvalidRange,
    UnknownRuleName,
    InsufficientPixels,
    DegenerateGeometry,
    LaneNotFound,
    NoPriorAndNoDetection,
    RejectedPair,
    EmptyInput,
    SpecError,
    TruthMismatch,
    ConfigError,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::ChannelMismatch: return "ChannelMismatch";
        case ErrorKind::ImageTooSmall: return "ImageTooSmall";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::InsufficientViews: return "InsufficientViews";
        case ErrorKind::DegenerateViews: return "DegenerateViews";
        case ErrorKind::NumericalFailure: return "NumericalFailure";
        case ErrorKind::BehindCamera: return "BehindCamera";
        case ErrorKind::NonConvergence: return "NonConvergence";
        case ErrorKind::FileError: return "FileError";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::DegenerateQuad: return "DegenerateQuad";
        case ErrorKind::DegenerateConfiguration: return "DegenerateConfiguration";
        case ErrorKind::PointAtInfinity: return "PointAtInfinity";
        case ErrorKind::SingularMatrix: return "SingularMatrix";
        case ErrorKind::InvalidRange: return "InvalidRange";
        case ErrorKind::UnknownRuleName: return "UnknownRuleName";
        case ErrorKind::InsufficientPixels: return "InsufficientPixels";
        case ErrorKind::DegenerateGeometry: return "DegenerateGeometry";
        case ErrorKind::LaneNotFound: return "LaneNotFound";
        case ErrorKind::NoPriorAndNoDetection: return "NoPriorAndNoDetection";
        case ErrorKind::RejectedPair: return "RejectedPair";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::SpecError: return "SpecError";
        case ErrorKind::TruthMismatch: return "TruthMismatch";
        case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the ErrorKind tags so
/// callers (and tests) can branch on the category without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace lanekit
