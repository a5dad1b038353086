#pragma once

#include <stdexcept>
#include <string>

namespace dotsim {

/// Configuration / schema problems. The CLI maps these to exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failures (non-convergence, unreachable targets). Carries the
/// name of the failing operation; the CLI maps these to exit code 2.
class NumericalError : public std::runtime_error {
public:
    NumericalError(std::string operation, const std::string& message)
        : std::runtime_error(operation + ": " + message),
          operation_(std::move(operation)) {}
    const std::string& operation() const { return operation_; }

private:
    std::string operation_;
};

class FitError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class CalibrationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}
