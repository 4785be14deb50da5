#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nrps {

enum class ErrorKind {
    DimensionMismatch,
    InvalidArgument,
    InvalidScenario,
    SingularMatrix,
    DegenerateHistory,
    SolverFailure,
    InvariantViolation,
    StreamMismatch,
    Config,
    Io,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::DimensionMismatch: return "dimension_mismatch";
        case ErrorKind::InvalidArgument: return "invalid_argument";
        case ErrorKind::InvalidScenario: return "invalid_scenario";
        case ErrorKind::SingularMatrix: return "singular_matrix";
        case ErrorKind::DegenerateHistory: return "degenerate_history";
        case ErrorKind::SolverFailure: return "solver_failure";
        case ErrorKind::InvariantViolation: return "invariant_violation";
        case ErrorKind::StreamMismatch: return "stream_mismatch";
        case ErrorKind::Config: return "config";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

/// Single exception type for the library; `kind()` is the machine-readable category.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace nrps
