#pragma once

#include <stdexcept>
#include <string>

namespace causal_gap {

/// Base of every exception thrown by the library. `exit_code()` maps the
/// failure class onto the CLI's process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

/// Bad arguments, violated preconditions, malformed model descriptions.
class ValidationError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

class DomainError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Numerical failure: non-convergent quadrature, degenerate intervals,
/// singular systems.
class NumericError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

class DegenerateIntervalError : public NumericError {
public:
    using NumericError::NumericError;
};

class ToleranceError : public NumericError {
public:
    using NumericError::NumericError;
};

/// File, parse and network failures.
class IoError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

class ParseError : public IoError {
public:
    using IoError::IoError;
};

class FetchError : public IoError {
public:
    using IoError::IoError;
};

namespace detail {

template <class E = ValidationError>
inline void require(bool cond, const std::string& msg) {
    if (!cond) throw E(msg);
}

}  // namespace detail

}  // namespace causal_gap
