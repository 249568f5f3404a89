#pragma once

#include <stdexcept>
#include <string>

namespace refscale {

/// Argument outside the mathematical domain of an operation (t < 1, t <= 0, empty grids).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Operands live on different manifolds, or block dimensions do not agree.
class SpecMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A sampling grid too coarse for the band limit of the data.
class AliasingError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A symbol or system violating its structural invariants.
class InvalidSymbol : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical quadrature produced a non-finite value on a subinterval.
class QuadratureFailure : public std::runtime_error {
public:
    QuadratureFailure(double lo, double hi, const std::string& what)
        : std::runtime_error(what), lo_(lo), hi_(hi) {}
    [[nodiscard]] double lo() const noexcept { return lo_; }
    [[nodiscard]] double hi() const noexcept { return hi_; }

private:
    double lo_;
    double hi_;
};

/// Operations that require an unambiguous numerical rank (projectors, solve).
class AmbiguousRank : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed configuration input; carries a location hint for diagnostics.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace refscale
