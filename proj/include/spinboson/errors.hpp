// errors.hpp: Exception types shared by all spinboson modules

#pragma once

#include <stdexcept>
#include <string>

namespace sb {

// Invalid argument value (negative frequency, beta <= 0, eps_hat out of range, ...).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// A function could not be evaluated at a sample point (non-finite value).
struct EvaluationError : std::runtime_error {
    EvaluationError(const std::string& what, double at)
        : std::runtime_error(what), point(at) {}
    double point;
};

// Precondition of an operation not met by the supplied inputs.
struct PreconditionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Integral that does not converge in the sense required by the operation.
struct DivergentIntegralError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Quadrature or iterative solve failed to reach its tolerance. Carries the
// best value obtained so far.
struct AccuracyError : std::runtime_error {
    AccuracyError(const std::string& what, double partial_value, double error_estimate)
        : std::runtime_error(what), partial(partial_value), err(error_estimate) {}
    double partial;
    double err;
};

// Bad or incomplete configuration (unknown keys, missing constants, budget).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse, e.g. a non-uniform grid handed to an FFT-based routine.
struct UsageError : std::logic_error {
    using std::logic_error::logic_error;
};

} // namespace sb
