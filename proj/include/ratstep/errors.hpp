#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ratstep {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A value lies outside the domain of a mathematical operation
/// (pole hit, pole at the origin, non-A-acceptable pole placement).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid user configuration: unknown identifiers, malformed files,
/// unsupported (kind, order) pairs, non-integer step counts.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Singular linear system (repeated Vandermonde nodes, degenerate tableau).
class SingularError : public Error {
public:
    using Error::Error;
};

/// Krylov solver hit its iteration cap before the residual certificate held.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual, int iterations)
        : Error(what), residual_(residual), iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

/// NaN/Inf or a vanishing pivot inside an iteration.
class BreakdownError : public Error {
public:
    using Error::Error;
};

/// Internal invariant broken; indicates a bug rather than bad input.
class ContractViolation : public Error {
public:
    using Error::Error;
};

} // namespace ratstep
