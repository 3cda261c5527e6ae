#pragma once

#include <stdexcept>
#include <string>

namespace madloop {

/// Base class for every recoverable error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Too few rows for the requested estimator.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Non-finite values, non-symmetric or indefinite matrices, mismatched shapes.
class InvalidDataError : public Error {
public:
    using Error::Error;
};

/// Argument outside its mathematical domain (e.g. lambda outside [0, 1]).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A Monte-Carlo estimate failed its own quality gate.
class DataQualityError : public Error {
public:
    using Error::Error;
};

/// An autophagous run could not continue (e.g. a fit became infeasible).
class LoopDegenerateError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Internal contract broken; indicates a bug rather than bad input.
class InvariantViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace madloop
