#pragma once

#include <stdexcept>
#include <string>

namespace seg4d {

// Base of all library errors. kind() is a stable, machine-parsable class name
// used by the CLI for its single-line error report.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept = 0;
};

// Caller handed in data that violates an operation's precondition
// (non-finite coordinate, singular pose, unnormalized probabilities, ...).
class InvalidInput : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "invalid_input"; }
};

// Internal shapes or state do not line up (width mismatch, missing cell value,
// stale cache, missing pseudo-prediction).
class StructuralError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "structural_error"; }
};

// Non-finite loss or gradient during optimization.
class NumericalError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "numerical_error"; }
};

class IoError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "io_error"; }
};

class UsageError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "usage_error"; }
};

}  // namespace seg4d
