#pragma once

#include <stdexcept>
#include <string>

namespace sparsectl {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Vector or matrix sizes do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// An argument lies outside the domain of the operation (e.g. a non-positive weight).
class DomainError : public Error {
public:
    using Error::Error;
};

/// The discrete PDE operator is singular or numerically close to it.
class SingularOperatorError : public Error {
public:
    using Error::Error;
};

/// Requested variant of an operation is not available.
class NotImplementedError : public Error {
public:
    using Error::Error;
};

/// An iterative method failed to reach its tolerance within the iteration budget.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require_size(long got, long expected, const char* what)
{
    if (got != expected) {
        throw DimensionError(std::string(what) + ": expected length " + std::to_string(expected) +
                             ", got " + std::to_string(got));
    }
}

} // namespace detail

} // namespace sparsectl
