#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flexfor {

enum class ErrorKind {
    ParseError,
    TopologyError,
    UnitError,
    SingularVoltage,
    DimensionMismatch,
    NonConvergence,
    BadSegmentCount,
    InfeasibleBase,
    BaseViolation,
    UnknownVariable,
    InfeasibleSystem,
    EmptyRegion,
    UnboundedRegion,
    DegenerateReference,
    EmptyDistribution,
    BadParameter,
    MissingMargin,
    NoFeasibleSamples,
    NumericalFailure,
    ConfigError,
};

inline std::string_view kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::TopologyError: return "TopologyError";
        case ErrorKind::UnitError: return "UnitError";
        case ErrorKind::SingularVoltage: return "SingularVoltage";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::NonConvergence: return "NonConvergence";
        case ErrorKind::BadSegmentCount: return "BadSegmentCount";
        case ErrorKind::InfeasibleBase: return "InfeasibleBase";
        case ErrorKind::BaseViolation: return "BaseViolation";
        case ErrorKind::UnknownVariable: return "UnknownVariable";
        case ErrorKind::InfeasibleSystem: return "InfeasibleSystem";
        case ErrorKind::EmptyRegion: return "EmptyRegion";
        case ErrorKind::UnboundedRegion: return "UnboundedRegion";
        case ErrorKind::DegenerateReference: return "DegenerateReference";
        case ErrorKind::EmptyDistribution: return "EmptyDistribution";
        case ErrorKind::BadParameter: return "BadParameter";
        case ErrorKind::MissingMargin: return "MissingMargin";
        case ErrorKind::NoFeasibleSamples: return "NoFeasibleSamples";
        case ErrorKind::NumericalFailure: return "NumericalFailure";
        case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    std::string_view kind_name() const noexcept { return flexfor::kind_name(kind_); }

private:
    ErrorKind kind_;
};

} // namespace flexfor
