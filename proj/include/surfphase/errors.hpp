#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace surfphase {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid user-supplied parameter (out-of-range level, bad config value, ...).
struct ParameterError : Error {
    using Error::Error;
};

/// Mesh geometry is unusable (degenerate triangle, broken connectivity, ...).
struct GeometryError : Error {
    using Error::Error;
};

/// A linear or nonlinear solve failed to converge.
struct SolverError : Error {
    using Error::Error;
};

/// Configuration file is syntactically or semantically invalid.
struct ConfigError : Error {
    using Error::Error;
};

/// A time step could not be completed (Newton stagnation, Krylov breakdown).
struct StepFailure : Error {
    StepFailure(const std::string& what, std::vector<double> residuals = {})
        : Error(what), residual_history(std::move(residuals)) {}
    std::vector<double> residual_history;
};

} // namespace surfphase
