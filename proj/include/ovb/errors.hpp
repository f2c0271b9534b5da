#pragma once

#include <stdexcept>
#include <string>

namespace ovb {

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a matrix that must be SPD has a non-positive (or
/// below-threshold) Cholesky pivot.
struct NotPositiveDefinite : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidAlpha : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Unpenalized MLE diverged (gradient stuck while the iterate runs away).
struct SeparationDetected : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MalformedCsv : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ovb
